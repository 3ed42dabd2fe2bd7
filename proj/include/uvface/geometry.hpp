#pragma once

// 3D <-> UV geometry: sphere UV mapping, UV position/texture maps, z-buffer
// visibility, weak-perspective rendering both directions, and shape
// alignment (landmark Procrustes + rigid ICP).
//
// Conventions, used everywhere:
//  - Clouds passed to UV ops are normalized: centroid at the origin, scaled
//    by the maximum vertex norm so every coordinate lies in the unit ball.
//  - Weak perspective: pixel = scale * (rot * v).xy + (tx, ty); depth =
//    scale * (rot * v).z with larger depth nearer the camera.
//  - Image coordinates: x right, y up (row 0 at the bottom); the PNG layer
//    flips rows at the file boundary.
//  - UV texel index = round(coord * (R - 1)), ties away from zero. Texture
//    and position grids are stored [3, R, R] as [channel][v-row][u-col].

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "uvface/errors.hpp"
#include "uvface/tensor.hpp"

namespace uvface {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
};

struct Mat3 {
  // row-major
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }
  static Mat3 rotation_x(double rad);
  static Mat3 rotation_y(double rad);
  static Mat3 rotation_z(double rad);

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const;
  Mat3 transposed() const;
  double det() const;
  bool is_rotation(double tol = 1e-9) const;
};

// Weak-perspective camera: uniform scale, rotation, 2D translation.
struct Pose {
  double scale = 1.0;
  Mat3 rot;
  double tx = 0.0, ty = 0.0;

  Vec3 camera(const Vec3& v) const {
    Vec3 r = rot * v;
    return {scale * r.x + tx, scale * r.y + ty, scale * r.z};
  }
  void validate() const;
};

// Centers a normalized unit-ball cloud in a W x H frame. `fill` is the
// fraction of the smaller frame extent covered by the unit diameter.
Pose frontal_pose(int width, int height, double fill = 0.9);
Pose pose_with_yaw(const Pose& base, double yaw_degrees);

struct PointCloud {
  std::vector<Vec3> vertices;
  std::vector<Vec3> colors;                  // optional per-vertex RGB in [0,1]
  std::vector<std::array<int, 3>> triangles; // optional
  std::vector<std::array<double, 2>> uvs;    // optional explicit (u,v) per vertex

  size_t size() const { return vertices.size(); }
  void validate() const;  // N >= 3, indices in range, finite coordinates
};

// Translate to the centroid, scale by the maximum vertex norm.
PointCloud normalize_shape(const PointCloud& cloud);

// Eq-style sphere mapping for a unit-ball vertex:
//   u = arccos(x / sqrt(x^2 + z^2)) / pi,  v = 1 - arccos(y) / pi.
// Pole convention: x^2 + z^2 < 1e-12 yields u = 0.5.
std::array<double, 2> sphere_uv(const Vec3& v);

// round(coord * (R-1)), ties away from zero
inline int uv_texel(double coord, int res) {
  return static_cast<int>(std::lround(coord * (res - 1)));
}

void check_uv_resolution(int res);  // one of {32, 64, 128, 256}

struct UvPositionMap {
  int res = 0;
  Tensor xyz;                  // [3, R, R]
  std::vector<uint8_t> valid;  // R*R, [v-row * R + u-col]

  bool valid_at(int iu, int iv) const { return valid[static_cast<size_t>(iv) * res + iu] != 0; }
  Vec3 at(int iu, int iv) const {
    return {xyz.at(0, iv, iu), xyz.at(1, iv, iu), xyz.at(2, iv, iu)};
  }
};

struct UvTextureMap {
  int res = 0;
  Tensor rgb;                    // [3, R, R], values in [0, 1]
  std::vector<uint8_t> visible;  // R*R

  bool visible_at(int iu, int iv) const {
    return visible[static_cast<size_t>(iv) * res + iu] != 0;
  }
  Vec3 color_at(int iu, int iv) const {
    return {rgb.at(0, iv, iu), rgb.at(1, iv, iu), rgb.at(2, iv, iu)};
  }
  long long visible_count() const;
};

struct Image;  // image.hpp

// Texel (iu, iv) receives the barycentric xyz of the triangle covering UV
// point (iu/(R-1), iv/(R-1)); without triangles, vertices scatter to their
// nearest texel. Degenerate UV triangles are skipped.
UvPositionMap build_position_map(const PointCloud& cloud, int res);

// Per-vertex visibility: project with the pose, keep the depth-maximal
// vertex per occupied pixel; vertices projecting outside the image are
// invisible.
std::vector<uint8_t> zbuffer_visibility(const PointCloud& cloud, const Pose& pose,
                                        int width, int height);

struct RenderStats {
  long long visible_vertices = 0;
  long long filled_texels = 0;
  bool empty = false;  // no vertex was visible
};

// Look-up rendering: U_t(u,v) = I(x,y) for visible vertices, zeros (black
// holes) elsewhere.
UvTextureMap render_uv_texture(const Image& image, const PointCloud& cloud,
                               const Pose& pose, int res, RenderStats* stats = nullptr);

UvTextureMap flip_uv(const UvTextureMap& map);

// Projects every valid & visible texel through the pose; per pixel the
// nearest texel's RGB wins; uncovered pixels stay black.
Image render_to_image(const UvTextureMap& texture, const UvPositionMap& position,
                      const Pose& pose, int width, int height);

// Triangle rasterization with z-buffer and barycentric vertex colors; used
// to produce source images of colored meshes.
Image render_cloud_image(const PointCloud& cloud, const Pose& pose, int width,
                         int height);

struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rot;
  Vec3 t;

  Vec3 apply(const Vec3& v) const { return (rot * v) * scale + t; }
  SimilarityTransform then(const SimilarityTransform& next) const;  // next(this(x))
};

struct AlignResult {
  SimilarityTransform transform;
  PointCloud aligned;
  double rmse = 0.0;
  int icp_iterations = 0;
};

// Stage 1: closed-form similarity Procrustes on landmark pairs
// (source index, reference index); needs >= 3 non-collinear landmarks.
// Stage 2: rigid ICP refinement (nearest neighbours, max 50 iterations,
// stop when the RMSE improvement drops below 1e-6).
AlignResult align_shape(const PointCloud& source, const PointCloud& reference,
                        const std::vector<std::pair<int, int>>& landmarks);

// Mesh ingestion: OBJ (v/vt/f lines, optional vertex colors after xyz) and
// whitespace-separated XYZ text. Dispatch by extension.
PointCloud load_point_cloud(const std::string& path);
PointCloud parse_obj(std::istream& in);
PointCloud parse_xyz(std::istream& in);

}  // namespace uvface
