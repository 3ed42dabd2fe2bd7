#include "uvface/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace uvface {

Image read_png(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw DataError("png: cannot read " + path + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&png);
    throw DataError("png: decode failed for " + path + ": " + png.message);
  }
  Image out(static_cast<int>(png.width), static_cast<int>(png.height));
  // PNG rows are top-down; internal storage is bottom-up.
  const size_t stride = static_cast<size_t>(out.width) * 3;
  for (int y = 0; y < out.height; ++y)
    std::memcpy(out.rgb.data() + static_cast<size_t>(y) * stride,
                buf.data() + static_cast<size_t>(out.height - 1 - y) * stride, stride);
  return out;
}

void write_png(const std::string& path, const Image& image) {
  if (image.width <= 0 || image.height <= 0)
    throw UsageError("png: cannot write empty image");
  std::vector<unsigned char> buf(image.rgb.size());
  const size_t stride = static_cast<size_t>(image.width) * 3;
  for (int y = 0; y < image.height; ++y)
    std::memcpy(buf.data() + static_cast<size_t>(y) * stride,
                image.rgb.data() + static_cast<size_t>(image.height - 1 - y) * stride,
                stride);
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, buf.data(), 0, nullptr))
    throw DataError("png: cannot write " + path + ": " + png.message);
}

Tensor image_to_tensor(const Image& image) {
  Tensor t({3, image.height, image.width});
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const unsigned char* p = image.px(x, y);
      for (int c = 0; c < 3; ++c)
        t.at(c, y, x) = static_cast<double>(p[c]) / 255.0;
    }
  return t;
}

Image tensor_to_image(const Tensor& t) {
  if (t.ndim() != 3 || t.dim(0) != 3)
    throw ShapeError("tensor_to_image: expected [3,H,W], got " + dims_str(t.dims()));
  Image out(t.dim(2), t.dim(1));
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      unsigned char* p = out.px(x, y);
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(t.at(c, y, x), 0.0, 1.0);
        p[c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  return out;
}

void write_mask_png(const std::string& path, const std::vector<uint8_t>& mask, int res) {
  if (mask.size() != static_cast<size_t>(res) * res)
    throw ShapeError("mask png: size mismatch");
  std::vector<unsigned char> buf(mask.size());
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x)
      buf[static_cast<size_t>(y) * res + x] =
          mask[static_cast<size_t>(res - 1 - y) * res + x] ? 255 : 0;
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(res);
  png.height = static_cast<png_uint_32>(res);
  png.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, buf.data(), 0, nullptr))
    throw DataError("png: cannot write " + path + ": " + png.message);
}

std::vector<uint8_t> read_mask_png(const std::string& path, int* res_out) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw DataError("png: cannot read " + path + ": " + png.message);
  png.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&png);
    throw DataError("png: decode failed for " + path + ": " + png.message);
  }
  if (png.width != png.height) throw DataError("mask png: expected square image");
  const int res = static_cast<int>(png.width);
  std::vector<uint8_t> mask(static_cast<size_t>(res) * res);
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x)
      mask[static_cast<size_t>(y) * res + x] =
          buf[static_cast<size_t>(res - 1 - y) * res + x] >= 128 ? 1 : 0;
  if (res_out) *res_out = res;
  return mask;
}

}  // namespace uvface
