#include "uvface/synth.hpp"

#include <cmath>

namespace uvface {

namespace {

std::array<double, 3> decal_color(const SynthHeadParams& p, double u, double v,
                                  const std::array<double, 3>& base) {
  std::array<double, 3> c = base;
  if (p.attrs[static_cast<size_t>(Attribute::kSH)] &&
      in_region(MaskRegion::kLowerFace, u, v)) {
    for (double& x : c) x *= 0.55;  // stubble darkening
  }
  if (p.attrs[static_cast<size_t>(Attribute::kLS)] && in_region(MaskRegion::kMouth, u, v)) {
    c = {0.75, 0.10, 0.16};
  }
  if (p.attrs[static_cast<size_t>(Attribute::kSM)]) {
    // bright smile arc inside the mouth region
    const double arc_v = 0.27 + 0.8 * (u - 0.5) * (u - 0.5);
    if (std::abs(u - 0.5) <= 0.14 && std::abs(v - arc_v) <= 0.012 &&
        in_region(MaskRegion::kMouth, u, v))
      c = {0.93, 0.90, 0.85};
  }
  if (p.attrs[static_cast<size_t>(Attribute::kSG)] &&
      in_region(MaskRegion::kEyeBand, u, v)) {
    c = {0.07, 0.07, 0.10};
  }
  if (p.attrs[static_cast<size_t>(Attribute::kBA)] &&
      in_region(MaskRegion::kForehead, u, v)) {
    c = {0.16, 0.11, 0.08};
  }
  return c;
}

}  // namespace

PointCloud make_synth_head(const SynthHeadParams& p) {
  const bool exact = p.uv_grid_res > 0;
  const int G = exact ? p.uv_grid_res : p.grid;
  if (G < 8) throw UsageError("make_synth_head: grid too small");
  PointCloud cloud;
  cloud.vertices.reserve(static_cast<size_t>(G) * G);
  if (exact) cloud.uvs.reserve(static_cast<size_t>(G) * G);

  // Front hemisphere parameterized close to the sphere-UV chart; small
  // radial warps keep the chart nearly injective.
  for (int j = 0; j < G; ++j) {
    const double v = exact ? static_cast<double>(j) / (G - 1)
                           : 0.03 + 0.94 * static_cast<double>(j) / (G - 1);
    for (int i = 0; i < G; ++i) {
      const double u = exact ? static_cast<double>(i) / (G - 1)
                             : 0.03 + 0.94 * static_cast<double>(i) / (G - 1);
      const double y = std::cos(M_PI * (1.0 - v));
      const double rho = std::sqrt(std::max(0.0, 1.0 - y * y));
      const double alpha = M_PI * u;
      Vec3 dir{rho * std::cos(alpha), y * p.y_radius, rho * std::sin(alpha)};
      double r = 1.0;
      const double du = (u - 0.5) / 0.09, dv = (v - 0.45) / 0.11;
      r += p.nose * std::exp(-(du * du + dv * dv));
      r += p.wobble_amp * std::sin(2.0 * M_PI * (p.wobble_fu * u + p.wobble_phase)) *
           std::sin(2.0 * M_PI * p.wobble_fv * v);
      cloud.vertices.push_back(dir * r);
      if (exact) cloud.uvs.push_back({u, v});
    }
  }
  for (int j = 0; j + 1 < G; ++j)
    for (int i = 0; i + 1 < G; ++i) {
      const int a = j * G + i, b = j * G + i + 1, c = (j + 1) * G + i, d = (j + 1) * G + i + 1;
      cloud.triangles.push_back({a, b, d});
      cloud.triangles.push_back({a, d, c});
    }

  PointCloud out = normalize_shape(cloud);

  out.colors.resize(out.vertices.size());
  for (size_t k = 0; k < out.vertices.size(); ++k) {
    const auto uv = exact ? out.uvs[k] : sphere_uv(out.vertices[k]);
    const double tex = 1.0 + p.pattern_amp *
                                 std::sin(2.0 * M_PI * (p.pattern_fu * uv[0] + p.pattern_phase)) *
                                 std::cos(2.0 * M_PI * p.pattern_fv * uv[1]);
    std::array<double, 3> base = {p.skin[0] * tex, p.skin[1] * tex, p.skin[2] * tex};
    for (double& c : base) c = std::clamp(c, 0.0, 1.0);
    const auto col = decal_color(p, uv[0], uv[1], base);
    out.colors[k] = {col[0], col[1], col[2]};
  }
  return out;
}

SynthHeadParams random_head_params(Rng& rng) {
  SynthHeadParams p;
  p.y_radius = rng.uniform(0.9, 1.1);
  p.nose = rng.uniform(0.15, 0.3);
  p.wobble_amp = rng.uniform(0.02, 0.06);
  p.wobble_fu = rng.uniform(1.5, 3.5);
  p.wobble_fv = rng.uniform(2.0, 4.0);
  p.wobble_phase = rng.uniform(0.0, 1.0);
  const double r = rng.uniform(0.55, 0.9);
  p.skin = {r, r * rng.uniform(0.70, 0.85), r * rng.uniform(0.55, 0.75)};
  p.pattern_amp = rng.uniform(0.04, 0.12);
  p.pattern_fu = rng.uniform(2.0, 4.0);
  p.pattern_fv = rng.uniform(1.5, 3.0);
  p.pattern_phase = rng.uniform(0.0, 1.0);
  return p;
}

}  // namespace uvface
