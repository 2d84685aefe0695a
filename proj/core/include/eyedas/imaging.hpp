#pragma once

#include "eyedas/image.hpp"

// Deterministic low-level kernels shared by the experts. Every function is a
// pure function of its inputs and safe to call concurrently.
namespace eyedas::imaging {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

inline constexpr int kBlurBlock = 8;
// Coefficients (u, v) with u + v >= this index sum count as high frequency.
inline constexpr int kBlurHighFrequencyIndexSum = 8;

inline constexpr int kKMeansMaxIterations = 25;
inline constexpr double kKMeansTolerance = 1e-4;
inline constexpr std::size_t kKMeansInitSample = 4096;

inline constexpr double kMinRotationDegrees = 90.0;
inline constexpr double kMaxRotationDegrees = 180.0;

// 0.299 R + 0.587 G + 0.114 B per pixel. Rejects non-RGB input.
Image to_grayscale(const Image& rgb);

/// Mean SSIM over every fully-contained 11x11 Gaussian window (sigma 1.5),
/// with C1 = 0.01^2 and C2 = 0.03^2 for dynamic range 1. Both planes must
/// share dimensions and be at least 11x11.
///
/// The result is exactly 1 for identical inputs and exactly symmetric in its
/// arguments.
double ssim(PlaneView a, PlaneView b);
double ssim(const ScalarMap& a, const ScalarMap& b);
double ssim(const Image& gray_a, const Image& gray_b);

/// Block-DCT blur map of a gray image.
///
/// The image is edge-padded to a multiple of 8 and cut into 8x8 blocks. Each
/// block scores the share of its orthonormal DCT-II coefficient magnitude held
/// by coefficients with u + v >= 8; the score is broadcast to the block's
/// pixels and min-max normalized over the image. High values mark sharp
/// regions, low values blurred ones. A map with no spread (for example a
/// constant image) is all zeros.
ScalarMap blur_map(const Image& gray);

// Population variance of the 4-neighbour Laplacian over interior pixels.
// Requires a gray image of at least 3x3.
double sharpness(const Image& gray);

// 3x3 Sobel gradient magnitude with replicated borders, min-max normalized
// to [0,1]. Requires a gray image of at least 3x3.
ScalarMap edge_map(const Image& gray);

/// Share of pixels in the largest cluster after Lloyd's k-means on RGB values.
///
/// Initialization is deterministic: the two mutually farthest pixels (over all
/// pixels, or an evenly strided sample of 4096 on larger images), then
/// farthest-point picks for k > 2. Iteration stops once no centroid moves by
/// 1e-4 or after 25 rounds. Images with fewer than k distinct colors give 1.
double dominant_cluster_fraction(const Image& rgb, int k);

/// Rotates counterclockwise (as displayed) about the image center with
/// bilinear sampling; samples falling outside the frame replicate the nearest
/// edge. Output keeps the input dimensions. degrees must lie in [90, 180].
Image rotate(const Image& img, double degrees);

// Separable Gaussian blur with replicated borders; sigma <= 0 returns a copy.
Image gaussian_blur(const Image& img, double sigma);

// Bilinear resize using pixel-center alignment. Same-size requests return an
// identical copy.
Image resize(const Image& img, int width, int height);

}  // namespace eyedas::imaging
