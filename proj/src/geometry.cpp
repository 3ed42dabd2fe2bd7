#include "uvface/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "uvface/image.hpp"

namespace uvface {

// ---------------------------------------------------------------------------
// Small linear algebra
// ---------------------------------------------------------------------------

Mat3 Mat3::rotation_x(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Mat3 r;
  r.m = {1, 0, 0, 0, c, -s, 0, s, c};
  return r;
}

Mat3 Mat3::rotation_y(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Mat3 r;
  r.m = {c, 0, s, 0, 1, 0, -s, 0, c};
  return r;
}

Mat3 Mat3::rotation_z(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Mat3 r;
  r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
  return r;
}

Mat3 Mat3::operator*(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += m[i * 3 + k] * o.m[k * 3 + j];
      r.m[i * 3 + j] = acc;
    }
  return r;
}

Mat3 Mat3::transposed() const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i * 3 + j] = m[j * 3 + i];
  return r;
}

double Mat3::det() const {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

bool Mat3::is_rotation(double tol) const {
  Mat3 rt = *this * transposed();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      if (std::abs(rt.m[i * 3 + j] - want) > tol) return false;
    }
  return std::abs(det() - 1.0) <= tol;
}

void Pose::validate() const {
  if (!(scale > 0.0)) throw UsageError("pose: scale must be positive");
  if (!rot.is_rotation(1e-6))
    throw UsageError("pose: rotation must be orthonormal with det +1");
}

Pose frontal_pose(int width, int height, double fill) {
  Pose p;
  p.scale = fill * 0.5 * static_cast<double>(std::min(width, height));
  p.tx = 0.5 * static_cast<double>(width);
  p.ty = 0.5 * static_cast<double>(height);
  return p;
}

Pose pose_with_yaw(const Pose& base, double yaw_degrees) {
  Pose p = base;
  p.rot = base.rot * Mat3::rotation_y(yaw_degrees * M_PI / 180.0);
  return p;
}

// ---------------------------------------------------------------------------
// Point clouds
// ---------------------------------------------------------------------------

void PointCloud::validate() const {
  if (vertices.size() < 3) throw DataError("point cloud: fewer than 3 vertices");
  for (const Vec3& v : vertices)
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
      throw DataError("point cloud: non-finite coordinate");
  const int n = static_cast<int>(vertices.size());
  for (const auto& t : triangles)
    for (int k : t)
      if (k < 0 || k >= n) throw DataError("point cloud: triangle index out of range");
  if (!colors.empty() && colors.size() != vertices.size())
    throw DataError("point cloud: color count mismatch");
  if (!uvs.empty() && uvs.size() != vertices.size())
    throw DataError("point cloud: uv count mismatch");
}

PointCloud normalize_shape(const PointCloud& cloud) {
  cloud.validate();
  PointCloud out = cloud;
  Vec3 centroid{0, 0, 0};
  for (const Vec3& v : cloud.vertices) centroid = centroid + v;
  centroid = centroid * (1.0 / static_cast<double>(cloud.vertices.size()));
  double max_norm = 0.0;
  for (Vec3& v : out.vertices) {
    v = v - centroid;
    max_norm = std::max(max_norm, v.norm());
  }
  if (max_norm <= 0.0) throw DataError("normalize_shape: degenerate cloud");
  const double inv = 1.0 / max_norm;
  for (Vec3& v : out.vertices) v = v * inv;
  return out;
}

std::array<double, 2> sphere_uv(const Vec3& v) {
  const double rxz2 = v.x * v.x + v.z * v.z;
  double u;
  if (rxz2 < 1e-12) {
    u = 0.5;  // pole convention
  } else {
    const double c = std::clamp(v.x / std::sqrt(rxz2), -1.0, 1.0);
    u = std::acos(c) / M_PI;
  }
  const double vy = std::clamp(v.y, -1.0, 1.0);
  const double vv = 1.0 - std::acos(vy) / M_PI;
  return {u, vv};
}

void check_uv_resolution(int res) {
  if (res != 32 && res != 64 && res != 128 && res != 256)
    throw UsageError("uv resolution must be one of {32, 64, 128, 256}, got " +
                     std::to_string(res));
}

long long UvTextureMap::visible_count() const {
  long long n = 0;
  for (uint8_t v : visible) n += v;
  return n;
}

namespace {

std::array<double, 2> vertex_uv(const PointCloud& cloud, size_t i) {
  if (!cloud.uvs.empty()) return cloud.uvs[i];
  return sphere_uv(cloud.vertices[i]);
}

void check_normalized(const PointCloud& cloud) {
  for (const Vec3& v : cloud.vertices)
    if (v.norm() > 1.0 + 1e-9)
      throw UsageError("cloud must be normalized to the unit ball (see normalize_shape)");
}

}  // namespace

UvPositionMap build_position_map(const PointCloud& cloud, int res) {
  check_uv_resolution(res);
  cloud.validate();
  check_normalized(cloud);
  UvPositionMap map;
  map.res = res;
  map.xyz = Tensor({3, res, res});
  map.valid.assign(static_cast<size_t>(res) * res, 0);

  auto write_texel = [&](int iu, int iv, const Vec3& p) {
    map.xyz.at(0, iv, iu) = p.x;
    map.xyz.at(1, iv, iu) = p.y;
    map.xyz.at(2, iv, iu) = p.z;
    map.valid[static_cast<size_t>(iv) * res + iu] = 1;
  };

  if (cloud.triangles.empty()) {
    for (size_t i = 0; i < cloud.vertices.size(); ++i) {
      const auto uv = vertex_uv(cloud, i);
      write_texel(uv_texel(uv[0], res), uv_texel(uv[1], res), cloud.vertices[i]);
    }
    return map;
  }

  const double rmax = static_cast<double>(res - 1);
  for (const auto& tri : cloud.triangles) {
    const auto uva = vertex_uv(cloud, static_cast<size_t>(tri[0]));
    const auto uvb = vertex_uv(cloud, static_cast<size_t>(tri[1]));
    const auto uvc = vertex_uv(cloud, static_cast<size_t>(tri[2]));
    const double ax = uva[0] * rmax, ay = uva[1] * rmax;
    const double bx = uvb[0] * rmax, by = uvb[1] * rmax;
    const double cx = uvc[0] * rmax, cy = uvc[1] * rmax;
    const double denom = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    if (std::abs(denom) < 1e-14) continue;  // zero-area in UV space
    const int u0 = std::max(0, static_cast<int>(std::ceil(std::min({ax, bx, cx}) - 1e-9)));
    const int u1 = std::min(res - 1, static_cast<int>(std::floor(std::max({ax, bx, cx}) + 1e-9)));
    const int v0 = std::max(0, static_cast<int>(std::ceil(std::min({ay, by, cy}) - 1e-9)));
    const int v1 = std::min(res - 1, static_cast<int>(std::floor(std::max({ay, by, cy}) + 1e-9)));
    for (int iv = v0; iv <= v1; ++iv)
      for (int iu = u0; iu <= u1; ++iu) {
        const double px = static_cast<double>(iu), py = static_cast<double>(iv);
        const double wb = ((px - ax) * (cy - ay) - (py - ay) * (cx - ax)) / denom;
        const double wc = ((bx - ax) * (py - ay) - (by - ay) * (px - ax)) / denom;
        const double wa = 1.0 - wb - wc;
        const double tol = -1e-9;
        if (wa < tol || wb < tol || wc < tol) continue;
        const Vec3 p = cloud.vertices[static_cast<size_t>(tri[0])] * wa +
                       cloud.vertices[static_cast<size_t>(tri[1])] * wb +
                       cloud.vertices[static_cast<size_t>(tri[2])] * wc;
        write_texel(iu, iv, p);
      }
  }
  return map;
}

std::vector<uint8_t> zbuffer_visibility(const PointCloud& cloud, const Pose& pose,
                                        int width, int height) {
  cloud.validate();
  pose.validate();
  const size_t n = cloud.vertices.size();
  std::vector<uint8_t> visible(n, 0);
  std::vector<double> depth(static_cast<size_t>(width) * height,
                            -std::numeric_limits<double>::infinity());
  std::vector<int> owner(static_cast<size_t>(width) * height, -1);
  for (size_t i = 0; i < n; ++i) {
    const Vec3 c = pose.camera(cloud.vertices[i]);
    const int x = static_cast<int>(std::lround(c.x));
    const int y = static_cast<int>(std::lround(c.y));
    if (x < 0 || x >= width || y < 0 || y >= height) continue;  // off-image: invisible
    const size_t pix = static_cast<size_t>(y) * width + x;
    if (c.z > depth[pix]) {
      depth[pix] = c.z;
      owner[pix] = static_cast<int>(i);
    }
  }
  for (int o : owner)
    if (o >= 0) visible[static_cast<size_t>(o)] = 1;
  return visible;
}

UvTextureMap render_uv_texture(const Image& image, const PointCloud& cloud,
                               const Pose& pose, int res, RenderStats* stats) {
  check_uv_resolution(res);
  check_normalized(cloud);
  UvTextureMap map;
  map.res = res;
  map.rgb = Tensor({3, res, res});
  map.visible.assign(static_cast<size_t>(res) * res, 0);

  const std::vector<uint8_t> vis = zbuffer_visibility(cloud, pose, image.width, image.height);
  std::vector<double> texel_depth(static_cast<size_t>(res) * res,
                                  -std::numeric_limits<double>::infinity());
  long long visible_vertices = 0;
  for (size_t i = 0; i < cloud.vertices.size(); ++i) {
    if (!vis[i]) continue;
    ++visible_vertices;
    const Vec3 c = pose.camera(cloud.vertices[i]);
    const int x = static_cast<int>(std::lround(c.x));
    const int y = static_cast<int>(std::lround(c.y));
    const auto uv = vertex_uv(cloud, i);
    const int iu = uv_texel(uv[0], res);
    const int iv = uv_texel(uv[1], res);
    const size_t tix = static_cast<size_t>(iv) * res + iu;
    if (c.z <= texel_depth[tix]) continue;
    texel_depth[tix] = c.z;
    const unsigned char* p = image.px(x, y);
    map.rgb.at(0, iv, iu) = static_cast<double>(p[0]) / 255.0;
    map.rgb.at(1, iv, iu) = static_cast<double>(p[1]) / 255.0;
    map.rgb.at(2, iv, iu) = static_cast<double>(p[2]) / 255.0;
    map.visible[tix] = 1;
  }
  if (stats) {
    stats->visible_vertices = visible_vertices;
    stats->filled_texels = map.visible_count();
    stats->empty = visible_vertices == 0;
  }
  return map;
}

UvTextureMap flip_uv(const UvTextureMap& map) {
  UvTextureMap out;
  out.res = map.res;
  out.rgb = Tensor(map.rgb.dims());
  out.visible.assign(map.visible.size(), 0);
  const int R = map.res;
  for (int iv = 0; iv < R; ++iv)
    for (int iu = 0; iu < R; ++iu) {
      const int ju = R - 1 - iu;
      for (int c = 0; c < 3; ++c) out.rgb.at(c, iv, iu) = map.rgb.at(c, iv, ju);
      out.visible[static_cast<size_t>(iv) * R + iu] =
          map.visible[static_cast<size_t>(iv) * R + ju];
    }
  return out;
}

Image render_to_image(const UvTextureMap& texture, const UvPositionMap& position,
                      const Pose& pose, int width, int height) {
  if (texture.res != position.res)
    throw ShapeError("render_to_image: texture and position resolution differ");
  pose.validate();
  Image out(width, height);
  std::vector<double> depth(static_cast<size_t>(width) * height,
                            -std::numeric_limits<double>::infinity());
  const int R = texture.res;
  for (int iv = 0; iv < R; ++iv)
    for (int iu = 0; iu < R; ++iu) {
      if (!position.valid_at(iu, iv) || !texture.visible_at(iu, iv)) continue;
      const Vec3 c = pose.camera(position.at(iu, iv));
      const int x = static_cast<int>(std::lround(c.x));
      const int y = static_cast<int>(std::lround(c.y));
      if (!out.inside(x, y)) continue;
      const size_t pix = static_cast<size_t>(y) * width + x;
      if (c.z <= depth[pix]) continue;
      depth[pix] = c.z;
      unsigned char* p = out.px(x, y);
      const Vec3 col = texture.color_at(iu, iv);
      p[0] = static_cast<unsigned char>(std::lround(std::clamp(col.x, 0.0, 1.0) * 255.0));
      p[1] = static_cast<unsigned char>(std::lround(std::clamp(col.y, 0.0, 1.0) * 255.0));
      p[2] = static_cast<unsigned char>(std::lround(std::clamp(col.z, 0.0, 1.0) * 255.0));
    }
  return out;
}

Image render_cloud_image(const PointCloud& cloud, const Pose& pose, int width,
                         int height) {
  cloud.validate();
  pose.validate();
  if (cloud.colors.empty())
    throw UsageError("render_cloud_image: cloud has no vertex colors");
  Image out(width, height);
  std::vector<double> depth(static_cast<size_t>(width) * height,
                            -std::numeric_limits<double>::infinity());

  auto put = [&](int x, int y, double z, const Vec3& col) {
    if (x < 0 || x >= width || y < 0 || y >= height) return;
    const size_t pix = static_cast<size_t>(y) * width + x;
    if (z <= depth[pix]) return;
    depth[pix] = z;
    unsigned char* p = out.px(x, y);
    p[0] = static_cast<unsigned char>(std::lround(std::clamp(col.x, 0.0, 1.0) * 255.0));
    p[1] = static_cast<unsigned char>(std::lround(std::clamp(col.y, 0.0, 1.0) * 255.0));
    p[2] = static_cast<unsigned char>(std::lround(std::clamp(col.z, 0.0, 1.0) * 255.0));
  };

  if (cloud.triangles.empty()) {
    for (size_t i = 0; i < cloud.vertices.size(); ++i) {
      const Vec3 c = pose.camera(cloud.vertices[i]);
      put(static_cast<int>(std::lround(c.x)), static_cast<int>(std::lround(c.y)), c.z,
          cloud.colors[i]);
    }
    return out;
  }

  for (const auto& tri : cloud.triangles) {
    const Vec3 pa = pose.camera(cloud.vertices[static_cast<size_t>(tri[0])]);
    const Vec3 pb = pose.camera(cloud.vertices[static_cast<size_t>(tri[1])]);
    const Vec3 pc = pose.camera(cloud.vertices[static_cast<size_t>(tri[2])]);
    const double denom = (pb.x - pa.x) * (pc.y - pa.y) - (pb.y - pa.y) * (pc.x - pa.x);
    if (std::abs(denom) < 1e-12) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({pa.x, pb.x, pc.x}))));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({pa.x, pb.x, pc.x}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({pa.y, pb.y, pc.y}))));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({pa.y, pb.y, pc.y}))));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double px = static_cast<double>(x), py = static_cast<double>(y);
        const double wb = ((px - pa.x) * (pc.y - pa.y) - (py - pa.y) * (pc.x - pa.x)) / denom;
        const double wc = ((pb.x - pa.x) * (py - pa.y) - (pb.y - pa.y) * (px - pa.x)) / denom;
        const double wa = 1.0 - wb - wc;
        if (wa < -1e-9 || wb < -1e-9 || wc < -1e-9) continue;
        const double z = wa * pa.z + wb * pb.z + wc * pc.z;
        const Vec3 col = cloud.colors[static_cast<size_t>(tri[0])] * wa +
                         cloud.colors[static_cast<size_t>(tri[1])] * wb +
                         cloud.colors[static_cast<size_t>(tri[2])] * wc;
        put(x, y, z, col);
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape alignment
// ---------------------------------------------------------------------------

SimilarityTransform SimilarityTransform::then(const SimilarityTransform& next) const {
  SimilarityTransform out;
  out.scale = next.scale * scale;
  out.rot = next.rot * rot;
  out.t = (next.rot * t) * next.scale + next.t;
  return out;
}

namespace {

// Umeyama similarity fit y ~ s R x + t over paired points.
SimilarityTransform procrustes(const std::vector<Vec3>& x, const std::vector<Vec3>& y,
                               bool with_scale) {
  const size_t k = x.size();
  Eigen::Vector3d mx = Eigen::Vector3d::Zero(), my = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < k; ++i) {
    mx += Eigen::Vector3d(x[i].x, x[i].y, x[i].z);
    my += Eigen::Vector3d(y[i].x, y[i].y, y[i].z);
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double var_x = 0.0;
  for (size_t i = 0; i < k; ++i) {
    const Eigen::Vector3d dx = Eigen::Vector3d(x[i].x, x[i].y, x[i].z) - mx;
    const Eigen::Vector3d dy = Eigen::Vector3d(y[i].x, y[i].y, y[i].z) - my;
    cov += dy * dx.transpose();
    var_x += dx.squaredNorm();
  }
  cov /= static_cast<double>(k);
  var_x /= static_cast<double>(k);

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (sv(1) <= 1e-12 * std::max(sv(0), 1e-300))
    throw DataError("align_shape: degenerate (collinear) landmark configuration");
  Eigen::Vector3d d = Eigen::Vector3d::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2) = -1.0;
  const Eigen::Matrix3d rot = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  double scale = 1.0;
  if (with_scale) {
    if (var_x <= 0.0) throw DataError("align_shape: zero-variance landmarks");
    scale = sv.dot(d) / var_x;
    if (scale <= 0.0) throw DataError("align_shape: non-positive recovered scale");
  }
  const Eigen::Vector3d t = my - scale * rot * mx;
  SimilarityTransform out;
  out.scale = scale;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.rot.m[static_cast<size_t>(i) * 3 + j] = rot(i, j);
  out.t = {t(0), t(1), t(2)};
  return out;
}

double nearest_sq(const Vec3& p, const std::vector<Vec3>& pts, int* idx) {
  double best = std::numeric_limits<double>::infinity();
  int bi = -1;
  for (size_t i = 0; i < pts.size(); ++i) {
    const Vec3 d = pts[i] - p;
    const double dd = d.dot(d);
    if (dd < best) {
      best = dd;
      bi = static_cast<int>(i);
    }
  }
  if (idx) *idx = bi;
  return best;
}

}  // namespace

AlignResult align_shape(const PointCloud& source, const PointCloud& reference,
                        const std::vector<std::pair<int, int>>& landmarks) {
  source.validate();
  reference.validate();
  if (landmarks.size() < 3)
    throw DataError("align_shape: need at least 3 landmark correspondences");
  std::vector<Vec3> lx, ly;
  for (const auto& [si, ri] : landmarks) {
    if (si < 0 || si >= static_cast<int>(source.size()) || ri < 0 ||
        ri >= static_cast<int>(reference.size()))
      throw DataError("align_shape: landmark index out of range");
    lx.push_back(source.vertices[static_cast<size_t>(si)]);
    ly.push_back(reference.vertices[static_cast<size_t>(ri)]);
  }

  SimilarityTransform total = procrustes(lx, ly, /*with_scale=*/true);

  std::vector<Vec3> moved(source.size());
  for (size_t i = 0; i < source.size(); ++i) moved[i] = total.apply(source.vertices[i]);

  auto rmse_of = [&](const std::vector<Vec3>& pts) {
    double acc = 0.0;
    for (const Vec3& p : pts) acc += nearest_sq(p, reference.vertices, nullptr);
    return std::sqrt(acc / static_cast<double>(pts.size()));
  };

  double rmse = rmse_of(moved);
  int iters = 0;
  for (; iters < 50; ++iters) {
    std::vector<Vec3> tgt(moved.size());
    for (size_t i = 0; i < moved.size(); ++i) {
      int idx = 0;
      nearest_sq(moved[i], reference.vertices, &idx);
      tgt[i] = reference.vertices[static_cast<size_t>(idx)];
    }
    SimilarityTransform step = procrustes(moved, tgt, /*with_scale=*/false);
    for (Vec3& p : moved) p = step.apply(p);
    total = total.then(step);
    const double next = rmse_of(moved);
    const double gain = rmse - next;
    rmse = next;
    if (gain < 1e-6) {
      ++iters;
      break;
    }
  }

  AlignResult out;
  out.transform = total;
  out.aligned = source;
  out.aligned.vertices = std::move(moved);
  out.rmse = rmse;
  out.icp_iterations = iters;
  return out;
}

// ---------------------------------------------------------------------------
// Mesh ingestion
// ---------------------------------------------------------------------------

namespace {

int parse_face_index(const std::string& token, size_t vertex_count) {
  // "7", "7/1", "7/1/2", "7//2"
  const size_t slash = token.find('/');
  const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
  int idx = 0;
  try {
    idx = std::stoi(head);
  } catch (const std::exception&) {
    throw DataError("obj: bad face index '" + token + "'");
  }
  if (idx < 0) idx = static_cast<int>(vertex_count) + idx + 1;  // negative = relative
  if (idx <= 0 || idx > static_cast<int>(vertex_count))
    throw DataError("obj: face index out of range: " + token);
  return idx - 1;
}

}  // namespace

PointCloud parse_obj(std::istream& in) {
  PointCloud cloud;
  std::vector<std::array<double, 2>> vts;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag.empty() || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw DataError("obj: malformed vertex line: " + line);
      cloud.vertices.push_back({x, y, z});
      double r, g, b;
      if (ls >> r >> g >> b) cloud.colors.push_back({r, g, b});
    } else if (tag == "vt") {
      double u, v;
      if (!(ls >> u >> v)) throw DataError("obj: malformed vt line: " + line);
      vts.push_back({u, v});
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) idx.push_back(parse_face_index(tok, cloud.vertices.size()));
      if (idx.size() < 3) throw DataError("obj: face with fewer than 3 vertices");
      for (size_t k = 2; k < idx.size(); ++k)  // fan-triangulate polygons
        cloud.triangles.push_back({idx[0], idx[k - 1], idx[k]});
    }
  }
  if (!cloud.colors.empty() && cloud.colors.size() != cloud.vertices.size())
    throw DataError("obj: vertex colors on only some vertices");
  if (!vts.empty()) {
    if (vts.size() != cloud.vertices.size())
      throw DataError("obj: vt count differs from vertex count");
    cloud.uvs = std::move(vts);
  }
  cloud.validate();
  return cloud;
}

PointCloud parse_xyz(std::istream& in) {
  PointCloud cloud;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z)) {
      // allow blank/comment lines
      std::istringstream probe(line);
      std::string first;
      if (probe >> first && first[0] != '#')
        throw DataError("xyz: malformed line: " + line);
      continue;
    }
    cloud.vertices.push_back({x, y, z});
    double r, g, b;
    if (ls >> r >> g >> b) cloud.colors.push_back({r, g, b});
  }
  if (!cloud.colors.empty() && cloud.colors.size() != cloud.vertices.size())
    throw DataError("xyz: colors on only some vertices");
  cloud.validate();
  return cloud;
}

PointCloud load_point_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open mesh file: " + path);
  const std::string ext = std::filesystem::path(path).extension().string();
  if (ext == ".obj") return parse_obj(in);
  if (ext == ".xyz" || ext == ".txt") return parse_xyz(in);
  throw UsageError("unsupported mesh format '" + ext + "' (expected .obj or .xyz)");
}

}  // namespace uvface
