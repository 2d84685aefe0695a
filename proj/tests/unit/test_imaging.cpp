#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "eyedas/error.hpp"
#include "eyedas/imaging.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace {

using namespace eyedas;
using eyedas::testing::random_image;
using eyedas::testing::smooth_image;
using namespace eyedas::oracles;

TEST(Ssim, IdentityIsExactlyOneAndSymmetric) {
  Rng rng(101);
  for (int i = 0; i < 25; ++i) {
    const Image a = smooth_image(rng, 24 + i % 5, 20 + i % 7, 1);
    const Image b = random_image(rng, a.width(), a.height(), 1);
    EXPECT_EQ(imaging::ssim(a, a), 1.0);
    EXPECT_EQ(imaging::ssim(a, b), imaging::ssim(b, a));
    EXPECT_LE(imaging::ssim(a, b), 1.0);
  }
}

TEST(Ssim, MatchesDirectWindowOracle) {
  Rng rng(7);
  for (int i = 0; i < 10; ++i) {
    const Image a = smooth_image(rng, 16, 16, 1);
    const Image b = random_image(rng, 16, 16, 1);
    EXPECT_NEAR(imaging::ssim(a, b), ssim_oracle(a, b), 1e-9);
  }
}

TEST(Ssim, RejectsMismatchedOrTinyPlanes) {
  EXPECT_THROW(imaging::ssim(Image(16, 16, 1), Image(16, 15, 1)), InvalidArgument);
  EXPECT_THROW(imaging::ssim(Image(10, 16, 1), Image(10, 16, 1)), InvalidArgument);
  EXPECT_THROW(imaging::ssim(Image(16, 16, 3), Image(16, 16, 3)), InvalidArgument);
}

TEST(BlurMap, MatchesNaiveDct) {
  Rng rng(11);
  for (const auto [w, h] : {std::pair{16, 16}, std::pair{13, 9}, std::pair{8, 16}}) {
    const Image g = random_image(rng, w, h, 1);
    const auto expected = blur_map_oracle(g);
    const auto map = imaging::blur_map(g);
    const auto got = map.data();
    ASSERT_EQ(got.size(), expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-9);
  }
}

TEST(BlurMap, ConstantImageHasNoSpread) {
  for (double v : imaging::blur_map(Image(16, 16, 1, 0.3)).data()) EXPECT_EQ(v, 0.0);
}

TEST(BlurMap, SharpRegionScoresAboveBlurredRegion) {
  Rng rng(3);
  const Image noise = random_image(rng, 32, 16, 1);
  const Image soft = imaging::gaussian_blur(noise, 2.0);
  std::vector<double> mixed(32 * 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) mixed[static_cast<std::size_t>(y * 32 + x)] = x < 16 ? noise.at(x, y) : soft.at(x, y);
  const auto map = imaging::blur_map(Image(32, 16, 1, mixed));
  EXPECT_GT(map.at(4, 4), map.at(28, 4));
}

TEST(EdgeMap, MatchesDirectConvolution) {
  Rng rng(13);
  for (const auto [w, h] : {std::pair{16, 16}, std::pair{5, 11}, std::pair{3, 3}}) {
    const Image g = random_image(rng, w, h, 1);
    const auto expected = sobel_oracle(g);
    const auto map = imaging::edge_map(g);
    const auto got = map.data();
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-9);
  }
  EXPECT_THROW(imaging::edge_map(Image(2, 5, 1)), InvalidArgument);
}

TEST(Sharpness, MatchesDirectLaplacian) {
  Rng rng(17);
  for (const auto [w, h] : {std::pair{16, 16}, std::pair{7, 12}, std::pair{3, 3}}) {
    const Image g = random_image(rng, w, h, 1);
    EXPECT_NEAR(imaging::sharpness(g), laplacian_variance_oracle(g), 1e-9);
  }
  EXPECT_EQ(imaging::sharpness(Image(8, 8, 1, 0.5)), 0.0);
  EXPECT_THROW(imaging::sharpness(Image(8, 8, 3)), InvalidArgument);
}

TEST(Sharpness, BlurLowersIt) {
  Rng rng(19);
  const Image g = random_image(rng, 32, 32, 1);
  EXPECT_LT(imaging::sharpness(imaging::gaussian_blur(g, 1.5)), imaging::sharpness(g));
}

TEST(KMeans, TwoColorImageGivesMajorityShare) {
  std::vector<double> px;
  for (int i = 0; i < 100; ++i) {
    const bool red = i < 70;
    px.insert(px.end(), {red ? 0.9 : 0.1, 0.1, red ? 0.1 : 0.8});
  }
  EXPECT_DOUBLE_EQ(imaging::dominant_cluster_fraction(Image(10, 10, 3, px), 2), 0.7);
}

TEST(KMeans, MatchesPlainLloydWithNaiveFarthestPairInit) {
  Rng rng(17);
  // 80x80 exceeds the init sample, 40x40 does not.
  for (const int side : {80, 40, 80, 40}) {
    const Image noisy = random_image(rng, side, side, 3);
    const Image smooth = smooth_image(rng, side, side, 3);
    EXPECT_EQ(imaging::dominant_cluster_fraction(noisy, 2), kmeans2_fraction_oracle(noisy));
    EXPECT_EQ(imaging::dominant_cluster_fraction(smooth, 2), kmeans2_fraction_oracle(smooth));
  }
}

TEST(KMeans, ThreeCornerColorsMatchBestTwoPartition) {
  // Half black, 30% red, 20% white, shuffled. The cheapest 2-partition by
  // within-cluster squared error decides the expected share.
  const std::array<std::array<double, 3>, 3> colors{{{0, 0, 0}, {1, 0, 0}, {1, 1, 1}}};
  const std::array<double, 3> weight{50, 30, 20};
  double best_cost = INFINITY, expected = 0.0;
  for (int mask = 1; mask < 7; ++mask) {  // colors in cluster A; the rest form cluster B
    double cost = 0.0, share_a = 0.0;
    for (const bool in_a : {true, false}) {
      std::array<double, 3> centroid{};
      double w = 0.0;
      for (std::size_t c = 0; c < 3; ++c)
        if (((mask >> c) & 1) == static_cast<int>(in_a)) {
          w += weight[c];
          for (std::size_t q = 0; q < 3; ++q) centroid[q] += weight[c] * colors[c][q];
        }
      for (double& v : centroid) v /= w;
      for (std::size_t c = 0; c < 3; ++c)
        if (((mask >> c) & 1) == static_cast<int>(in_a))
          for (std::size_t q = 0; q < 3; ++q) cost += weight[c] * std::pow(colors[c][q] - centroid[q], 2);
      if (in_a) share_a = w / 100.0;
    }
    if (cost < best_cost) {
      best_cost = cost;
      expected = std::max(share_a, 1.0 - share_a);
    }
  }
  std::vector<std::size_t> which;
  for (std::size_t c = 0; c < 3; ++c) which.insert(which.end(), static_cast<std::size_t>(weight[c]), c);
  Rng rng(23);
  for (int trial = 0; trial < 3; ++trial) {
    rng.shuffle(std::span<std::size_t>(which));
    std::vector<double> px;
    for (const std::size_t c : which) px.insert(px.end(), colors[c].begin(), colors[c].end());
    EXPECT_DOUBLE_EQ(imaging::dominant_cluster_fraction(Image(10, 10, 3, px), 2), expected);
  }
}

TEST(KMeans, SingleColorGivesOne) {
  EXPECT_EQ(imaging::dominant_cluster_fraction(Image(6, 6, 3, 0.4), 2), 1.0);
  EXPECT_THROW(imaging::dominant_cluster_fraction(Image(6, 6, 1), 2), InvalidArgument);
  EXPECT_THROW(imaging::dominant_cluster_fraction(Image(6, 6, 3), 1), InvalidArgument);
}

TEST(KMeans, FractionIsAtLeastHalfForTwoClusters) {
  Rng rng(23);
  for (int i = 0; i < 10; ++i) {
    const double f = imaging::dominant_cluster_fraction(random_image(rng, 20, 20, 3), 2);
    EXPECT_GE(f, 0.5);
    EXPECT_LE(f, 1.0);
  }
}

TEST(Rotate, HalfTurnTwiceIsIdentity) {
  Rng rng(29);
  const Image img = random_image(rng, 9, 7, 3);
  EXPECT_EQ(imaging::rotate(imaging::rotate(img, 180.0), 180.0), img);
}

TEST(Rotate, QuarterTurnMovesCorners) {
  // 3x3 gray, counterclockwise as displayed: the top-right pixel moves to the top-left.
  std::vector<double> v(9, 0.0);
  v[2] = 1.0;
  const Image out = imaging::rotate(Image(3, 3, 1, v), 90.0);
  EXPECT_EQ(out.at(0, 0), 1.0);
  EXPECT_EQ(out.at(2, 0), 0.0);
}

TEST(Rotate, RejectsAnglesOutsideRange) {
  EXPECT_THROW(imaging::rotate(Image(4, 4, 1), 45.0), InvalidArgument);
  EXPECT_THROW(imaging::rotate(Image(4, 4, 1), 181.0), InvalidArgument);
}

TEST(Grayscale, WeightsAndRange) {
  const Image white = imaging::to_grayscale(Image(2, 2, 3, 1.0));
  for (double v : white.data()) EXPECT_EQ(v, 1.0);
  const Image red = imaging::to_grayscale(Image(1, 1, 3, std::vector<double>{1.0, 0.0, 0.0}));
  EXPECT_DOUBLE_EQ(red.at(0, 0), 0.299);
  EXPECT_THROW(imaging::to_grayscale(Image(2, 2, 1)), InvalidArgument);
}

TEST(Resize, SameSizeIsCopyAndConstantStaysConstant) {
  Rng rng(31);
  const Image img = random_image(rng, 10, 8, 3);
  EXPECT_EQ(imaging::resize(img, 10, 8), img);
  const Image flat = imaging::resize(Image(10, 8, 1, 0.25), 23, 5);
  EXPECT_EQ(flat.width(), 23);
  for (double v : flat.data()) EXPECT_NEAR(v, 0.25, 1e-15);
  EXPECT_THROW(imaging::resize(img, 0, 5), InvalidArgument);
}

TEST(GaussianBlur, PreservesConstantsAndZeroSigmaCopies) {
  Rng rng(37);
  const Image img = random_image(rng, 12, 12, 3);
  EXPECT_EQ(imaging::gaussian_blur(img, 0.0), img);
  for (double v : imaging::gaussian_blur(Image(12, 12, 1, 0.6), 1.3).data()) EXPECT_NEAR(v, 0.6, 1e-12);
}

TEST(ImageType, ValidatesShapeAndRange) {
  EXPECT_THROW(Image(0, 4, 1), InvalidArgument);
  EXPECT_THROW(Image(4, 4, 2), InvalidArgument);
  EXPECT_THROW(Image(2, 2, 1, std::vector<double>{0.1, 0.2, 1.5, 0.0}), InvalidArgument);
  EXPECT_THROW(Image(2, 2, 1, std::vector<double>{0.1, 0.2}), InvalidArgument);
}

}  // namespace
