#pragma once

// 8-bit RGB images with PNG I/O. Rows are stored bottom-up (y = 0 at the
// bottom, matching the geometry module); the PNG reader/writer flips rows.

#include <string>
#include <vector>

#include "uvface/errors.hpp"
#include "uvface/tensor.hpp"

namespace uvface {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> rgb;  // 3 * width * height

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(3) * w * h, 0) {}

  unsigned char* px(int x, int y) {
    return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
  const unsigned char* px(int x, int y) const {
    return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
  bool inside(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& image);

// [3, H, W] in [0, 1] <-> 8-bit image (clamped, rounded on the way out)
Tensor image_to_tensor(const Image& image);
Image tensor_to_image(const Tensor& t);

// 8-bit grayscale with 0/255 semantics for masks; `mask` is R*R row-major
// (bottom-up like Image).
void write_mask_png(const std::string& path, const std::vector<uint8_t>& mask, int res);
std::vector<uint8_t> read_mask_png(const std::string& path, int* res_out);

}  // namespace uvface
