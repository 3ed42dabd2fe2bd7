#pragma once

// Procedural head meshes: a front-hemisphere ellipsoid with a nose bump,
// per-identity shape/texture variation, and toggleable attribute decals
// aligned to the mask regions. Stands in for captured face scans at desk
// scale.
//
// Decal colors are assigned from each vertex's final UV coordinate (after
// normalization), so toggling a decal changes vertex colors only inside the
// attribute's mask region.

#include <array>
#include <cstdint>

#include "uvface/geometry.hpp"
#include "uvface/masks.hpp"
#include "uvface/tensor.hpp"

namespace uvface {

struct SynthHeadParams {
  int grid = 96;  // vertices per UV axis; grid^2 total
  // When positive, vertices are laid out on the exact texel lattice of this
  // resolution and carry explicit reference UV coordinates (one vertex per
  // texel), the same fixed-reference-UV idiom the rendering pipeline uses.
  int uv_grid_res = 0;
  // shape identity
  double y_radius = 1.0;
  double nose = 0.22;
  double wobble_amp = 0.04;
  double wobble_fu = 2.0, wobble_fv = 3.0, wobble_phase = 0.0;
  // texture identity
  std::array<double, 3> skin = {0.78, 0.60, 0.50};
  double pattern_amp = 0.08;
  double pattern_fu = 3.0, pattern_fv = 2.0, pattern_phase = 0.0;
  // attribute decals, indexed by Attribute
  std::array<bool, kAttributeCount> attrs = {false, false, false, false, false};
};

// Normalized (unit ball) colored triangle mesh.
PointCloud make_synth_head(const SynthHeadParams& params);

// Random identity; attribute bits are set separately by the caller.
SynthHeadParams random_head_params(Rng& rng);

}  // namespace uvface
