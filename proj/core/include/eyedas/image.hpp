#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace eyedas {

// Row-major image with 1 (gray) or 3 (RGB, interleaved) channels and every
// intensity in [0, 1]. 8-bit sources are divided by 255 at ingest. The
// constructors validate shape and range, so a constructed Image always
// satisfies its invariants; kernels enforce their own minimum sizes.
class Image {
 public:
  Image(int width, int height, int channels, double fill = 0.0);
  Image(int width, int height, int channels, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool is_gray() const noexcept { return channels_ == 1; }
  bool is_rgb() const noexcept { return channels_ == 3; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  double at(int x, int y, int c = 0) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int width_;
  int height_;
  int channels_;
  std::vector<double> data_;
};

// Single-channel scalar field with values in [0, 1] (blur maps, edge maps).
class ScalarMap {
 public:
  ScalarMap(int width, int height, double fill = 0.0);
  ScalarMap(int width, int height, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double at(int x, int y) const noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const ScalarMap&) const = default;

 private:
  int width_;
  int height_;
  std::vector<double> data_;
};

// Read-only single-plane view shared by the SSIM overloads.
struct PlaneView {
  int width;
  int height;
  std::span<const double> values;
};

PlaneView view_of(const ScalarMap& map) noexcept;
// Requires a gray image; throws InvalidArgument otherwise.
PlaneView view_of(const Image& gray);

inline double clamp_unit(double v) noexcept { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace eyedas
