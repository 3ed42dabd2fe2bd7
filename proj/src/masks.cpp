#include "uvface/masks.hpp"

#include <cmath>

#include "uvface/errors.hpp"
#include "uvface/geometry.hpp"
#include "uvface/image.hpp"

namespace uvface {

const char* attribute_name(Attribute a) {
  switch (a) {
    case Attribute::kSG: return "SG";
    case Attribute::kLS: return "LS";
    case Attribute::kSH: return "SH";
    case Attribute::kSM: return "SM";
    case Attribute::kBA: return "BA";
  }
  return "?";
}

Attribute parse_attribute(const std::string& s) {
  for (Attribute a : kAllAttributes)
    if (s == attribute_name(a)) return a;
  throw UsageError("unknown attribute '" + s + "' (expected SG, LS, SH, SM or BA)");
}

MaskRegion region_for_attribute(Attribute a) {
  switch (a) {
    case Attribute::kSG: return MaskRegion::kEyeBand;
    case Attribute::kLS: return MaskRegion::kMouth;
    case Attribute::kSM: return MaskRegion::kMouth;  // lipstick and smile share it
    case Attribute::kSH: return MaskRegion::kLowerFace;
    case Attribute::kBA: return MaskRegion::kForehead;
  }
  throw UsageError("bad attribute");
}

// v runs bottom (chin, v=0) to top (forehead, v=1); the face front is
// centered at u = 0.5.
bool in_region(MaskRegion region, double u, double v) {
  switch (region) {
    case MaskRegion::kEyeBand:
      return u >= 0.20 && u <= 0.80 && v >= 0.52 && v <= 0.68;
    case MaskRegion::kMouth: {
      const double du = (u - 0.5) / 0.18;
      const double dv = (v - 0.30) / 0.08;
      return du * du + dv * dv <= 1.0;
    }
    case MaskRegion::kLowerFace:
      return u >= 0.12 && u <= 0.88 && v >= 0.08 && v <= 0.42;
    case MaskRegion::kForehead:
      return u >= 0.10 && u <= 0.90 && v >= 0.74 && v <= 0.92;
    case MaskRegion::kFullRegion:
      return true;
  }
  return false;
}

Tensor region_mask(MaskRegion region, int res) {
  check_uv_resolution(res);
  Tensor m({1, 1, res, res});
  const double denom = static_cast<double>(res - 1);
  for (int iv = 0; iv < res; ++iv)
    for (int iu = 0; iu < res; ++iu)
      m.at(0, 0, iv, iu) =
          in_region(region, static_cast<double>(iu) / denom, static_cast<double>(iv) / denom)
              ? 1.0
              : 0.0;
  return m;
}

Tensor attribute_mask(Attribute a, int res) {
  Tensor area = region_mask(region_for_attribute(a), res);
  for (long long i = 0; i < area.numel(); ++i) area[i] = 1.0 - area[i];
  return area;
}

Tensor full_mask(int res) {
  check_uv_resolution(res);
  return Tensor::ones({1, 1, res, res});
}

Tensor downsample_mask(const Tensor& mask, int to_res) {
  if (mask.ndim() != 4 || mask.dim(0) != 1 || mask.dim(1) != 1 || mask.dim(2) != mask.dim(3))
    throw ShapeError("downsample_mask: expected [1,1,R,R]");
  const int from = mask.dim(2);
  if (to_res > from) throw UsageError("downsample_mask: target larger than source");
  Tensor out({1, 1, to_res, to_res});
  for (int iv = 0; iv < to_res; ++iv)
    for (int iu = 0; iu < to_res; ++iu) {
      const int sv = uv_texel(static_cast<double>(iv) / (to_res - 1), from);
      const int su = uv_texel(static_cast<double>(iu) / (to_res - 1), from);
      out.at(0, 0, iv, iu) = mask.at(0, 0, sv, su);
    }
  return out;
}

void save_mask_png(const std::string& path, const Tensor& mask) {
  if (mask.ndim() != 4 || mask.dim(2) != mask.dim(3))
    throw ShapeError("save_mask_png: expected [1,1,R,R]");
  const int res = mask.dim(2);
  std::vector<uint8_t> bits(static_cast<size_t>(res) * res);
  for (int iv = 0; iv < res; ++iv)
    for (int iu = 0; iu < res; ++iu)
      bits[static_cast<size_t>(iv) * res + iu] = mask.at(0, 0, iv, iu) >= 0.5 ? 1 : 0;
  write_mask_png(path, bits, res);
}

Tensor load_mask_png(const std::string& path) {
  int res = 0;
  const std::vector<uint8_t> bits = read_mask_png(path, &res);
  Tensor m({1, 1, res, res});
  for (int iv = 0; iv < res; ++iv)
    for (int iu = 0; iu < res; ++iu)
      m.at(0, 0, iv, iu) = bits[static_cast<size_t>(iv) * res + iu] ? 1.0 : 0.0;
  return m;
}

}  // namespace uvface
