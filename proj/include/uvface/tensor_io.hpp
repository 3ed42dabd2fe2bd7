#pragma once

// UVT1 binary tensor files: magic "UVT1" (55 56 54 31), u8 dtype
// (1 = f32, 2 = f64), u8 ndim, ndim x u32 little-endian dims, then the
// row-major little-endian payload. Used for checkpoints and golden files.

#include <string>

#include "uvface/tensor.hpp"

namespace uvface {

enum class UvtDtype : uint8_t { kF32 = 1, kF64 = 2 };

void write_uvt(const std::string& path, const Tensor& t,
               UvtDtype dtype = UvtDtype::kF64);
Tensor read_uvt(const std::string& path);

}  // namespace uvface
