#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scriptor/errors.hpp"
#include "scriptor/tensor.hpp"

namespace scriptor {

// 8-bit raster, channels interleaved row-major; 1 (gray) or 3 (rgb) channels.
struct ImageU8 {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t channels = 1;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::int64_t y, std::int64_t x, std::int64_t c = 0) const {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
  std::uint8_t& at(std::int64_t y, std::int64_t x, std::int64_t c = 0) {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
};

ImageU8 make_image(std::int64_t height, std::int64_t width, std::int64_t channels,
                   std::uint8_t fill = 255);

// Format by signature: PGM (P2/P5), PPM (P3/P6), or 8-bit non-interlaced PNG
// (gray, rgb, and their alpha variants; alpha is composited over white).
ImageU8 load_image(const std::string& path);
ImageU8 decode_image(const std::vector<std::uint8_t>& bytes);

void save_pgm(const ImageU8& img, const std::string& path);  // binary P5, gray only
void save_png(const ImageU8& img, const std::string& path);
std::vector<std::uint8_t> encode_png(const ImageU8& img);

// White padding on the bottom/right edges up to the next multiple.
ImageU8 pad_to_multiple(const ImageU8& img, std::int64_t multiple);

// [3, h, w] tensor in [0,1]; grayscale replicated across the three planes.
Tensor image_to_tensor(const ImageU8& img);

// Load, pad to multiples of pad_multiple, convert. The standard model input path.
Tensor load_image_tensor(const std::string& path, std::int64_t pad_multiple = 32);

}  // namespace scriptor
