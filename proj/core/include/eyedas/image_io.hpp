#pragma once

#include <filesystem>

#include "eyedas/image.hpp"

// Decoder boundary: PNG and JPEG in, PNG out. Decoded images are RGB with
// 8-bit samples divided by 255.
namespace eyedas::io {

// Detects the format from the file signature. Throws DataError on failure.
Image read_image(const std::filesystem::path& path);

// Writes an 8-bit PNG (gray or RGB); values are scaled by 255 and rounded.
void write_png(const Image& image, const std::filesystem::path& path);

}  // namespace eyedas::io
