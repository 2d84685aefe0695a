#include "eyedas/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "eyedas/error.hpp"

namespace eyedas::imaging {
namespace {

void require_gray(const Image& img, const char* op) {
  if (!img.is_gray()) {
    throw InvalidArgument(std::string(op) + ": expected a 1-channel image, got " +
                          std::to_string(img.channels()) + " channels");
  }
}

void require_min_size(int width, int height, int min_side, const char* op) {
  if (width < min_side || height < min_side) {
    throw InvalidArgument(std::string(op) + ": image " + std::to_string(width) + "x" +
                          std::to_string(height) + " is smaller than " +
                          std::to_string(min_side) + "x" + std::to_string(min_side));
  }
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : kernel) w /= sum;
  return kernel;
}

const std::vector<double>& ssim_kernel() {
  static const std::vector<double> kernel = gaussian_kernel(kSsimSigma, kSsimWindow / 2);
  return kernel;
}

// Separable "valid" filtering: output is (w - n + 1) x (h - n + 1).
std::vector<double> filter_valid(std::span<const double> src, int width, int height,
                                 const std::vector<double>& kernel) {
  const int n = static_cast<int>(kernel.size());
  const int out_w = width - n + 1;
  const int out_h = height - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(out_w) * height);
  for (int y = 0; y < height; ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += kernel[k] * row[x + k];
      rows[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += kernel[k] * rows[static_cast<std::size_t>(y + k) * out_w + x];
      out[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  return out;
}

std::vector<double> min_max_normalize(std::vector<double> values) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo;
  const double span = *hi - min;
  if (!(span > 0.0)) {
    std::fill(values.begin(), values.end(), 0.0);
    return values;
  }
  for (double& v : values) v = clamp_unit((v - min) / span);
  return values;
}

// cos/sin of a rotation angle; multiples of 90 degrees are exact.
std::pair<double, double> exact_cos_sin(double degrees) {
  if (degrees == 90.0) return {0.0, 1.0};
  if (degrees == 180.0) return {-1.0, 0.0};
  const double rad = degrees * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

double sample_clamped(const Image& img, int x, int y, int c) {
  x = std::clamp(x, 0, img.width() - 1);
  y = std::clamp(y, 0, img.height() - 1);
  return img.at(x, y, c);
}

double bilinear(const Image& img, double sx, double sy, int c) {
  const double fx0 = std::floor(sx);
  const double fy0 = std::floor(sy);
  const double fx = sx - fx0;
  const double fy = sy - fy0;
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double top = (1.0 - fx) * sample_clamped(img, x0, y0, c) +
                     fx * sample_clamped(img, x0 + 1, y0, c);
  const double bottom = (1.0 - fx) * sample_clamped(img, x0, y0 + 1, c) +
                        fx * sample_clamped(img, x0 + 1, y0 + 1, c);
  return clamp_unit((1.0 - fy) * top + fy * bottom);
}

struct Rgb {
  double r, g, b;
};

double dist2(const Rgb& a, const Rgb& b) {
  const double dr = a.r - b.r;
  const double dg = a.g - b.g;
  const double db = a.b - b.b;
  return dr * dr + dg * dg + db * db;
}

bool same_color(const Rgb& a, const Rgb& b) { return a.r == b.r && a.g == b.g && a.b == b.b; }

// The first pair (in sample order) at the largest squared distance, exactly
// as the plain double loop over the sample would pick it. Every pair is
// bounded by (r_i + r_j)^2 with radii taken about the sample mean; visiting
// pairs by descending radius lets that bound cut the scan short.
std::pair<std::size_t, std::size_t> farthest_pair(const std::vector<Rgb>& pixels,
                                                  const std::vector<std::size_t>& sample) {
  const std::size_t m = sample.size();
  if (m < 2) return {sample[0], sample[0]};
  Rgb mean{0.0, 0.0, 0.0};
  for (const std::size_t idx : sample) {
    mean.r += pixels[idx].r;
    mean.g += pixels[idx].g;
    mean.b += pixels[idx].b;
  }
  mean = {mean.r / static_cast<double>(m), mean.g / static_cast<double>(m), mean.b / static_cast<double>(m)};
  std::vector<double> radius(m);
  for (std::size_t i = 0; i < m; ++i) radius[i] = std::sqrt(dist2(pixels[sample[i]], mean));
  // The slack absorbs rounding so the bound never undercuts a computed distance.
  const auto bound = [&](std::size_t a, std::size_t b) {
    const double s = radius[a] + radius[b];
    return s * s * (1.0 + 1e-9) + 1e-15;
  };
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return radius[a] > radius[b]; });

  // Pairs that are skipped lie strictly below the running maximum, so every
  // pair attaining the final maximum is visited and the earliest one wins.
  double best = -1.0;
  std::pair<std::size_t, std::size_t> first{0, 1};
  for (std::size_t a = 0; a + 1 < m; ++a) {
    if (bound(order[a], order[a + 1]) < best) break;
    const Rgb& p = pixels[sample[order[a]]];
    for (std::size_t b = a + 1; b < m; ++b) {
      if (bound(order[a], order[b]) < best) break;
      const double d = dist2(p, pixels[sample[order[b]]]);
      if (d < best) continue;
      const std::pair<std::size_t, std::size_t> pos = std::minmax(order[a], order[b]);
      if (d > best || pos < first) first = pos;
      best = d;
    }
  }
  return {sample[first.first], sample[first.second]};
}

std::vector<Rgb> initial_centroids(const std::vector<Rgb>& pixels, int k) {
  std::vector<std::size_t> sample;
  const std::size_t n = pixels.size();
  if (n <= kKMeansInitSample) {
    sample.resize(n);
    for (std::size_t i = 0; i < n; ++i) sample[i] = i;
  } else {
    sample.resize(kKMeansInitSample);
    for (std::size_t i = 0; i < kKMeansInitSample; ++i) sample[i] = i * n / kKMeansInitSample;
  }

  const auto [best_a, best_b] = farthest_pair(pixels, sample);
  std::vector<Rgb> centroids{pixels[best_a], pixels[best_b]};
  while (static_cast<int>(centroids.size()) < k) {
    std::size_t pick = sample[0];
    double farthest = -1.0;
    for (const std::size_t idx : sample) {
      double nearest = dist2(pixels[idx], centroids[0]);
      for (std::size_t c = 1; c < centroids.size(); ++c) {
        nearest = std::min(nearest, dist2(pixels[idx], centroids[c]));
      }
      if (nearest > farthest) {
        farthest = nearest;
        pick = idx;
      }
    }
    centroids.push_back(pixels[pick]);
  }
  return centroids;
}

}  // namespace

Image to_grayscale(const Image& rgb) {
  if (!rgb.is_rgb()) {
    throw InvalidArgument("to_grayscale: expected a 3-channel image, got " +
                          std::to_string(rgb.channels()) + " channels");
  }
  const auto src = rgb.data();
  std::vector<double> out(rgb.pixel_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = src[3 * i];
    const double g = src[3 * i + 1];
    const double b = src[3 * i + 2];
    // Summation order keeps white at exactly 1.0.
    out[i] = clamp_unit(0.299 * r + (0.587 * g + 0.114 * b));
  }
  return Image(rgb.width(), rgb.height(), 1, std::move(out));
}

double ssim(PlaneView a, PlaneView b) {
  if (a.width != b.width || a.height != b.height) {
    throw InvalidArgument("ssim: shape mismatch " + std::to_string(a.width) + "x" +
                          std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                          std::to_string(b.height));
  }
  require_min_size(a.width, a.height, kSsimWindow, "ssim");

  const std::size_t n = a.values.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a.values[i] * a.values[i];
    bb[i] = b.values[i] * b.values[i];
    ab[i] = a.values[i] * b.values[i];
  }
  const auto& kernel = ssim_kernel();
  const auto mu_a = filter_valid(a.values, a.width, a.height, kernel);
  const auto mu_b = filter_valid(b.values, a.width, a.height, kernel);
  const auto e_aa = filter_valid(aa, a.width, a.height, kernel);
  const auto e_bb = filter_valid(bb, a.width, a.height, kernel);
  const auto e_ab = filter_valid(ab, a.width, a.height, kernel);

  constexpr double c1 = kSsimK1 * kSsimK1;
  constexpr double c2 = kSsimK2 * kSsimK2;
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double mab = ma * mb;
    const double var_a = e_aa[i] - ma * ma;
    const double var_b = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - mab;
    const double num = (2.0 * mab + c1) * (2.0 * cov + c2);
    const double den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

double ssim(const ScalarMap& a, const ScalarMap& b) { return ssim(view_of(a), view_of(b)); }

double ssim(const Image& gray_a, const Image& gray_b) {
  return ssim(view_of(gray_a), view_of(gray_b));
}

ScalarMap blur_map(const Image& gray) {
  require_gray(gray, "blur_map");
  const int w = gray.width();
  const int h = gray.height();
  const int blocks_x = (w + kBlurBlock - 1) / kBlurBlock;
  const int blocks_y = (h + kBlurBlock - 1) / kBlurBlock;

  // basis[u][x] = alpha(u) cos((2x + 1) u pi / 16)
  static const auto basis = [] {
    std::array<std::array<double, kBlurBlock>, kBlurBlock> table{};
    for (int u = 0; u < kBlurBlock; ++u) {
      const double alpha = std::sqrt((u == 0 ? 1.0 : 2.0) / kBlurBlock);
      for (int x = 0; x < kBlurBlock; ++x) {
        table[u][x] = alpha * std::cos((2 * x + 1) * u * std::numbers::pi / (2.0 * kBlurBlock));
      }
    }
    return table;
  }();

  std::vector<double> block_score(static_cast<std::size_t>(blocks_x) * blocks_y);
  std::array<std::array<double, kBlurBlock>, kBlurBlock> block{};
  std::array<std::array<double, kBlurBlock>, kBlurBlock> rows{};
  for (int by = 0; by < blocks_y; ++by) {
    for (int bx = 0; bx < blocks_x; ++bx) {
      for (int y = 0; y < kBlurBlock; ++y) {
        const int sy = std::min(by * kBlurBlock + y, h - 1);
        for (int x = 0; x < kBlurBlock; ++x) {
          const int sx = std::min(bx * kBlurBlock + x, w - 1);
          block[y][x] = gray.at(sx, sy);
        }
      }
      // Transform along x, then along y.
      for (int y = 0; y < kBlurBlock; ++y) {
        for (int u = 0; u < kBlurBlock; ++u) {
          double acc = 0.0;
          for (int x = 0; x < kBlurBlock; ++x) acc += basis[u][x] * block[y][x];
          rows[y][u] = acc;
        }
      }
      double high = 0.0;
      double total = 0.0;
      for (int v = 0; v < kBlurBlock; ++v) {
        for (int u = 0; u < kBlurBlock; ++u) {
          double acc = 0.0;
          for (int y = 0; y < kBlurBlock; ++y) acc += basis[v][y] * rows[y][u];
          const double mag = std::abs(acc);
          total += mag;
          if (u + v >= kBlurHighFrequencyIndexSum) high += mag;
        }
      }
      block_score[static_cast<std::size_t>(by) * blocks_x + bx] = total > 0.0 ? high / total : 0.0;
    }
  }

  std::vector<double> map(gray.pixel_count());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      map[static_cast<std::size_t>(y) * w + x] =
          block_score[static_cast<std::size_t>(y / kBlurBlock) * blocks_x + x / kBlurBlock];
    }
  }
  return ScalarMap(w, h, min_max_normalize(std::move(map)));
}

double sharpness(const Image& gray) {
  require_gray(gray, "sharpness");
  require_min_size(gray.width(), gray.height(), 3, "sharpness");
  const int w = gray.width();
  const int h = gray.height();
  std::vector<double> response;
  response.reserve(static_cast<std::size_t>(w - 2) * (h - 2));
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      response.push_back(gray.at(x - 1, y) + gray.at(x + 1, y) + gray.at(x, y - 1) +
                         gray.at(x, y + 1) - 4.0 * gray.at(x, y));
    }
  }
  double mean = 0.0;
  for (const double r : response) mean += r;
  mean /= static_cast<double>(response.size());
  double var = 0.0;
  for (const double r : response) var += (r - mean) * (r - mean);
  return var / static_cast<double>(response.size());
}

ScalarMap edge_map(const Image& gray) {
  require_gray(gray, "edge_map");
  require_min_size(gray.width(), gray.height(), 3, "edge_map");
  const int w = gray.width();
  const int h = gray.height();
  // Largest possible magnitude for intensities in [0,1].
  const double max_magnitude = 4.0 * std::numbers::sqrt2;
  std::vector<double> mag(gray.pixel_count());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto p = [&](int dx, int dy) { return sample_clamped(gray, x + dx, y + dy, 0); };
      const double gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
      const double gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
      mag[static_cast<std::size_t>(y) * w + x] = std::min(std::sqrt(gx * gx + gy * gy), max_magnitude);
    }
  }
  return ScalarMap(w, h, min_max_normalize(std::move(mag)));
}

double dominant_cluster_fraction(const Image& rgb, int k) {
  if (!rgb.is_rgb()) throw InvalidArgument("dominant_cluster_fraction: expected an RGB image");
  if (k < 2) throw InvalidArgument("dominant_cluster_fraction: k must be >= 2, got " + std::to_string(k));

  const std::size_t n = rgb.pixel_count();
  const auto src = rgb.data();
  std::vector<Rgb> pixels(n);
  for (std::size_t i = 0; i < n; ++i) pixels[i] = {src[3 * i], src[3 * i + 1], src[3 * i + 2]};

  std::vector<Rgb> distinct;
  for (const Rgb& p : pixels) {
    if (std::none_of(distinct.begin(), distinct.end(), [&](const Rgb& d) { return same_color(d, p); })) {
      distinct.push_back(p);
      if (static_cast<int>(distinct.size()) >= k) break;
    }
  }
  if (static_cast<int>(distinct.size()) < k) return 1.0;

  std::vector<Rgb> centroids = initial_centroids(pixels, k);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k));
  std::vector<Rgb> sums(static_cast<std::size_t>(k));
  for (int iter = 0; iter < kKMeansMaxIterations; ++iter) {
    std::fill(counts.begin(), counts.end(), 0);
    std::fill(sums.begin(), sums.end(), Rgb{0.0, 0.0, 0.0});
    for (const Rgb& p : pixels) {
      std::size_t best = 0;
      double best_d = dist2(p, centroids[0]);
      for (std::size_t c = 1; c < centroids.size(); ++c) {
        const double d = dist2(p, centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      ++counts[best];
      sums[best].r += p.r;
      sums[best].g += p.g;
      sums[best].b += p.b;
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      if (counts[c] == 0) continue;  // empty clusters keep their centroid
      const double inv = 1.0 / static_cast<double>(counts[c]);
      const Rgb next{sums[c].r * inv, sums[c].g * inv, sums[c].b * inv};
      movement = std::max(movement, std::sqrt(dist2(next, centroids[c])));
      centroids[c] = next;
    }
    if (movement < kKMeansTolerance) break;
  }
  const std::size_t largest = *std::max_element(counts.begin(), counts.end());
  return static_cast<double>(largest) / static_cast<double>(n);
}

Image rotate(const Image& img, double degrees) {
  if (!(degrees >= kMinRotationDegrees && degrees <= kMaxRotationDegrees)) {
    throw InvalidArgument("rotate: degrees must lie in [90,180], got " + std::to_string(degrees));
  }
  const auto [cos_t, sin_t] = exact_cos_sin(degrees);
  const double cx = (img.width() - 1) / 2.0;
  const double cy = (img.height() - 1) / 2.0;
  const int channels = img.channels();
  std::vector<double> out(img.data().size());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = cx + cos_t * dx - sin_t * dy;
      const double sy = cy + sin_t * dx + cos_t * dy;
      for (int c = 0; c < channels; ++c) {
        out[(static_cast<std::size_t>(y) * img.width() + x) * channels + c] = bilinear(img, sx, sy, c);
      }
    }
  }
  return Image(img.width(), img.height(), channels, std::move(out));
}

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma > 0.0)) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const auto kernel = gaussian_kernel(sigma, radius);
  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  const auto src = img.data();

  std::vector<double> tmp(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int sx = std::clamp(x + k, 0, w - 1);
          acc += kernel[static_cast<std::size_t>(k + radius)] *
                 src[(static_cast<std::size_t>(y) * w + sx) * ch + c];
        }
        tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
      }
    }
  }
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int sy = std::clamp(y + k, 0, h - 1);
          acc += kernel[static_cast<std::size_t>(k + radius)] *
                 tmp[(static_cast<std::size_t>(sy) * w + x) * ch + c];
        }
        out[(static_cast<std::size_t>(y) * w + x) * ch + c] = clamp_unit(acc);
      }
    }
  }
  return Image(w, h, ch, std::move(out));
}

Image resize(const Image& img, int width, int height) {
  if (width <= 0 || height <= 0) {
    throw InvalidArgument("resize: target dimensions must be positive");
  }
  if (width == img.width() && height == img.height()) return img;
  const double scale_x = static_cast<double>(img.width()) / width;
  const double scale_y = static_cast<double>(img.height()) / height;
  const int ch = img.channels();
  std::vector<double> out(static_cast<std::size_t>(width) * height * ch);
  for (int y = 0; y < height; ++y) {
    const double sy = (y + 0.5) * scale_y - 0.5;
    for (int x = 0; x < width; ++x) {
      const double sx = (x + 0.5) * scale_x - 0.5;
      for (int c = 0; c < ch; ++c) {
        out[(static_cast<std::size_t>(y) * width + x) * ch + c] = bilinear(img, sx, sy, c);
      }
    }
  }
  return Image(width, height, ch, std::move(out));
}

}  // namespace eyedas::imaging
