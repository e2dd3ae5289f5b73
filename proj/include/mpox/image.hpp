#pragma once

#include "mpox/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace mpox {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit interleaved RGB.
struct Image8 {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  std::uint8_t& at(Index y, Index x, Index c) { return pixels[std::size_t((y * width + x) * 3 + c)]; }
  std::uint8_t at(Index y, Index x, Index c) const {
    return pixels[std::size_t((y * width + x) * 3 + c)];
  }
};

enum class ImageFormat { kUnknown, kPng, kJpeg };

/// Sniffs the leading magic bytes.
ImageFormat detect_image_format(const std::filesystem::path& path);

/// Decodes PNG or JPEG into RGB. Alpha is dropped, grayscale replicated.
Image8 decode_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Image8& image);
void write_jpeg(const std::filesystem::path& path, const Image8& image, int quality = 95);

/// Raw 0..255 values as a float (h, w, 3) tensor.
TensorF to_tensor(const Image8& image);

/// Bilinear resize of an (h, w, c) tensor with half-pixel centers:
/// source = (i + 0.5) * in / out - 0.5, clamped to the valid range.
TensorF resize_bilinear(const TensorF& image, Index out_h, Index out_w);

/// Multiplies every value by 1/255.
TensorF rescale(const TensorF& image);
float rescale_value(float v);

/// [0, 1] float image to 8-bit with round-to-nearest.
Image8 to_image8(const TensorF& image);

/// decode -> resize to size x size -> rescale.
TensorF load_image(const std::filesystem::path& path, Index size);

}  // namespace mpox
