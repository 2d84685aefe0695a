#include "eyedas/image.hpp"

#include <cmath>
#include <string>

#include "eyedas/error.hpp"

namespace eyedas {
namespace {

void check_values(std::span<const double> values, const char* what) {
  for (const double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidArgument(std::string(what) + ": intensity outside [0,1]: " +
                            std::to_string(v));
    }
  }
}

void check_dims(int width, int height, const char* what) {
  if (width <= 0 || height <= 0) {
    throw InvalidArgument(std::string(what) + ": dimensions must be positive, got " +
                          std::to_string(width) + "x" + std::to_string(height));
  }
}

}  // namespace

Image::Image(int width, int height, int channels, double fill)
    : Image(width, height, channels,
            std::vector<double>(static_cast<std::size_t>(width > 0 ? width : 0) *
                                    static_cast<std::size_t>(height > 0 ? height : 0) *
                                    static_cast<std::size_t>(channels > 0 ? channels : 0),
                                fill)) {}

Image::Image(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  check_dims(width, height, "Image");
  if (channels != 1 && channels != 3) {
    throw InvalidArgument("Image: channels must be 1 or 3, got " + std::to_string(channels));
  }
  const std::size_t expected = pixel_count() * static_cast<std::size_t>(channels);
  if (data_.size() != expected) {
    throw InvalidArgument("Image: data length " + std::to_string(data_.size()) +
                          " != width*height*channels " + std::to_string(expected));
  }
  check_values(data_, "Image");
}

ScalarMap::ScalarMap(int width, int height, double fill)
    : ScalarMap(width, height,
                std::vector<double>(static_cast<std::size_t>(width > 0 ? width : 0) *
                                        static_cast<std::size_t>(height > 0 ? height : 0),
                                    fill)) {}

ScalarMap::ScalarMap(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height, "ScalarMap");
  const std::size_t expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (data_.size() != expected) {
    throw InvalidArgument("ScalarMap: data length " + std::to_string(data_.size()) +
                          " != width*height " + std::to_string(expected));
  }
  check_values(data_, "ScalarMap");
}

PlaneView view_of(const ScalarMap& map) noexcept {
  return {map.width(), map.height(), map.data()};
}

PlaneView view_of(const Image& gray) {
  if (!gray.is_gray()) throw InvalidArgument("expected a 1-channel image");
  return {gray.width(), gray.height(), gray.data()};
}

}  // namespace eyedas
