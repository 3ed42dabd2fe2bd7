#pragma once

// Attribute codes and the UV-space masks guarding the reconstruction loss.
//
// Omega(attr) is the NON-attribute region: 1 where the generator must leave
// the texture alone, 0 over the attribute's own area. Regions are
// procedurally generated rectangles/ellipses in UV coordinates and can be
// versioned to PNG. A sixth all-ones mask exists (kFullRegion) without being
// bound to any attribute.

#include <array>
#include <string>
#include <vector>

#include "uvface/tensor.hpp"

namespace uvface {

enum class Attribute { kSG = 0, kLS = 1, kSH = 2, kSM = 3, kBA = 4 };
inline constexpr int kAttributeCount = 5;
inline constexpr std::array<Attribute, 5> kAllAttributes = {
    Attribute::kSG, Attribute::kLS, Attribute::kSH, Attribute::kSM, Attribute::kBA};

const char* attribute_name(Attribute a);          // "SG", "LS", ...
Attribute parse_attribute(const std::string& s);  // throws UsageError on unknown names

enum class MaskRegion { kEyeBand, kMouth, kLowerFace, kForehead, kFullRegion };

MaskRegion region_for_attribute(Attribute a);

// Continuous region predicate in UV coordinates (u, v in [0,1]).
bool in_region(MaskRegion region, double u, double v);

// Attribute-area indicator (1 inside the region) sampled at texel centers,
// shaped [1, 1, R, R].
Tensor region_mask(MaskRegion region, int res);

// Omega_i: complement of the attribute's region, [1, 1, R, R].
Tensor attribute_mask(Attribute a, int res);

Tensor full_mask(int res);  // all ones

// Nearest-neighbour resampling for the mask asset pipeline.
Tensor downsample_mask(const Tensor& mask, int to_res);

// PNG versioning with 0/255 semantics.
void save_mask_png(const std::string& path, const Tensor& mask);
Tensor load_mask_png(const std::string& path);

}  // namespace uvface
