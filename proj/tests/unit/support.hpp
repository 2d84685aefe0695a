#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eyedas/experts.hpp"
#include "eyedas/gbm.hpp"
#include "eyedas/image.hpp"
#include "eyedas/rng.hpp"

namespace eyedas::testing {

inline Image random_image(Rng& rng, int width, int height, int channels) {
  std::vector<double> values(static_cast<std::size_t>(width) * height * channels);
  for (double& v : values) v = rng.uniform();
  return Image(width, height, channels, std::move(values));
}

// Smooth random field: a few random sinusoids plus light noise, so kernels see
// structure rather than pure white noise.
inline Image smooth_image(Rng& rng, int width, int height, int channels) {
  std::vector<double> values(static_cast<std::size_t>(width) * height * channels);
  const double fx = rng.uniform(0.05, 0.6);
  const double fy = rng.uniform(0.05, 0.6);
  const double phase = rng.uniform(0.0, 6.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const double v = 0.5 + 0.35 * std::sin(fx * x + fy * y + phase + c) + 0.1 * (rng.uniform() - 0.5);
        values[(static_cast<std::size_t>(y) * width + x) * channels + c] = clamp_unit(v);
      }
    }
  }
  return Image(width, height, channels, std::move(values));
}

// A random labeled feature matrix; positives are shifted so the trees have
// something to find.
struct Dataset {
  gbm::FeatureMatrix x{4};
  std::vector<int> y;
};

inline Dataset random_dataset(Rng& rng, std::size_t rows, std::size_t cols, double shift) {
  Dataset d;
  d.x = gbm::FeatureMatrix(cols);
  std::vector<double> row(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const int label = r % 3 == 0 ? 0 : 1;
    for (std::size_t c = 0; c < cols; ++c) row[c] = rng.normal() + (label == 1 && c % 2 == 0 ? shift : 0.0);
    d.x.add_row(row);
    d.y.push_back(label);
  }
  return d;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() / ("eyedas_" + tag + "_" + std::to_string(stamp));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ignored;
    std::filesystem::remove_all(path_, ignored);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace eyedas::testing
