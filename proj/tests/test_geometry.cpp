#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <queue>
#include <sstream>

#include "uvface/geometry.hpp"
#include "uvface/image.hpp"
#include "uvface/masks.hpp"
#include "uvface/synth.hpp"

using namespace uvface;

namespace {

// Independent O(N^2)-style occlusion oracle: per pixel, collect every vertex
// projecting there and keep the depth-maximal one (first wins ties).
std::vector<uint8_t> zbuffer_oracle(const PointCloud& cloud, const Pose& pose,
                                    int width, int height) {
  std::vector<uint8_t> visible(cloud.size(), 0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      int best = -1;
      double best_z = -std::numeric_limits<double>::infinity();
      for (size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 c = pose.camera(cloud.vertices[i]);
        if (static_cast<int>(std::lround(c.x)) != x ||
            static_cast<int>(std::lround(c.y)) != y)
          continue;
        if (c.z > best_z) {
          best_z = c.z;
          best = static_cast<int>(i);
        }
      }
      if (best >= 0) visible[static_cast<size_t>(best)] = 1;
    }
  return visible;
}

PointCloud random_cloud(Rng& rng, int n) {
  PointCloud c;
  for (int i = 0; i < n; ++i) {
    Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double norm = v.norm();
    if (norm > 1.0) v = v * (0.999 / norm);
    c.vertices.push_back(v);
  }
  return c;
}

int connected_components(const Tensor& mask) {
  const int R = mask.dim(2);
  std::vector<int> seen(static_cast<size_t>(R) * R, 0);
  int comps = 0;
  for (int sv = 0; sv < R; ++sv)
    for (int su = 0; su < R; ++su) {
      if (mask.at(0, 0, sv, su) < 0.5 || seen[static_cast<size_t>(sv) * R + su]) continue;
      ++comps;
      std::queue<std::pair<int, int>> q;
      q.push({sv, su});
      seen[static_cast<size_t>(sv) * R + su] = 1;
      while (!q.empty()) {
        auto [v, u] = q.front();
        q.pop();
        const int dv[4] = {1, -1, 0, 0}, du[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nv = v + dv[k], nu = u + du[k];
          if (nv < 0 || nv >= R || nu < 0 || nu >= R) continue;
          if (mask.at(0, 0, nv, nu) < 0.5 || seen[static_cast<size_t>(nv) * R + nu]) continue;
          seen[static_cast<size_t>(nv) * R + nu] = 1;
          q.push({nv, nu});
        }
      }
    }
  return comps;
}

}  // namespace

TEST_CASE("sphere_uv closed forms") {
  auto uv = sphere_uv({1, 0, 0});
  CHECK(std::abs(uv[0] - 0.0) < 1e-12);
  CHECK(std::abs(uv[1] - 0.5) < 1e-12);
  uv = sphere_uv({0, 0, 1});
  CHECK(std::abs(uv[0] - 0.5) < 1e-12);
  CHECK(std::abs(uv[1] - 0.5) < 1e-12);
  uv = sphere_uv({-1, 0, 0});
  CHECK(std::abs(uv[0] - 1.0) < 1e-12);
  CHECK(std::abs(uv[1] - 0.5) < 1e-12);
  uv = sphere_uv({0, 1, 0});  // pole convention
  CHECK(std::abs(uv[0] - 0.5) < 1e-12);
  CHECK(std::abs(uv[1] - 1.0) < 1e-12);
}

TEST_CASE("sphere_uv lands in the unit square for unit-ball vertices") {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double n = v.norm();
    if (n > 1.0) v = v * (1.0 / n);
    const auto uv = sphere_uv(v);
    CHECK(uv[0] >= 0.0);
    CHECK(uv[0] <= 1.0);
    CHECK(uv[1] >= 0.0);
    CHECK(uv[1] <= 1.0);
  }
}

TEST_CASE("build_position_map interpolates a UV-square triangle") {
  PointCloud cloud;
  cloud.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  cloud.uvs = {{0, 0}, {1, 0}, {0, 1}};
  cloud.triangles = {{0, 1, 2}};
  const int R = 256;
  UvPositionMap map = build_position_map(cloud, R);
  // interior texel of the lower-left triangle half: xyz = (u, v, 0)
  for (auto [iu, iv] : {std::pair{128, 0}, {10, 30}, {100, 100}, {0, 0}, {255, 0}}) {
    REQUIRE(map.valid_at(iu, iv));
    const Vec3 p = map.at(iu, iv);
    CHECK(p.x == doctest::Approx(iu / 255.0).epsilon(1e-12));
    CHECK(p.y == doctest::Approx(iv / 255.0).epsilon(1e-12));
    CHECK(p.z == 0.0);
  }
  // above the diagonal the triangle does not cover the square
  CHECK_FALSE(map.valid_at(255, 255));
}

TEST_CASE("build_position_map scatter mode hits one texel") {
  PointCloud cloud;
  cloud.vertices = {{0, 0, 1}, {0, 0, 1}, {0, 0, 1}};  // sphere_uv = (0.5, 0.5)
  UvPositionMap map = build_position_map(cloud, 256);
  long long count = 0;
  for (uint8_t v : map.valid) count += v;
  CHECK(count == 1);
  CHECK(map.valid_at(128, 128));  // round(0.5 * 255) = 128, ties away from zero
}

TEST_CASE("zbuffer depth-max rule") {
  PointCloud cloud;
  cloud.vertices = {{0, 0, 0.5}, {0, 0, 0.9}, {1, 1, 0}};
  Pose pose;  // identity
  auto vis = zbuffer_visibility(cloud, pose, 4, 4);
  CHECK(vis[0] == 0);
  CHECK(vis[1] == 1);
  CHECK(vis[2] == 1);
}

TEST_CASE("zbuffer distinct pixels all visible, off-image invisible") {
  PointCloud cloud;
  cloud.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 1, 0}, {9, 0, 0}};
  Pose pose;
  auto vis = zbuffer_visibility(cloud, pose, 4, 4);
  CHECK(vis[0] == 1);
  CHECK(vis[1] == 1);
  CHECK(vis[2] == 1);
  CHECK(vis[3] == 0);  // projects outside the 4x4 image
}

TEST_CASE("zbuffer matches the brute-force oracle on random clouds") {
  Rng rng(11);
  for (int round = 0; round < 25; ++round) {
    const int n = 50 + rng.uniform_int(0, 450);
    PointCloud cloud = random_cloud(rng, n);
    Pose pose = frontal_pose(24, 24, rng.uniform(0.5, 1.0));
    pose = pose_with_yaw(pose, rng.uniform(-80.0, 80.0));
    const auto got = zbuffer_visibility(cloud, pose, 24, 24);
    const auto want = zbuffer_oracle(cloud, pose, 24, 24);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
  }
}

TEST_CASE("render_uv_texture on the synthetic head") {
  SynthHeadParams params;
  params.grid = 96;
  PointCloud head = make_synth_head(params);
  const int R = 32, W = 64, H = 64;
  Pose frontal = frontal_pose(W, H);
  Image img = render_cloud_image(head, frontal, W, H);

  UvPositionMap pos = build_position_map(head, R);
  RenderStats stats;
  UvTextureMap tex = render_uv_texture(img, head, frontal, R, &stats);
  CHECK_FALSE(stats.empty);

  long long valid = 0, both = 0;
  for (int iv = 0; iv < R; ++iv)
    for (int iu = 0; iu < R; ++iu) {
      if (!pos.valid_at(iu, iv)) continue;
      ++valid;
      if (tex.visible_at(iu, iv)) ++both;
    }
  REQUIRE(valid > 0);
  CHECK(static_cast<double>(both) / static_cast<double>(valid) > 0.95);

  // self-occlusion grows with yaw
  RenderStats s15, s75;
  render_uv_texture(render_cloud_image(head, pose_with_yaw(frontal, 15), W, H), head,
                    pose_with_yaw(frontal, 15), R, &s15);
  render_uv_texture(render_cloud_image(head, pose_with_yaw(frontal, 75), W, H), head,
                    pose_with_yaw(frontal, 75), R, &s75);
  CHECK(s75.filled_texels < s15.filled_texels);

  // constant-white image: every visible texel is (1,1,1)
  Image white(W, H);
  std::fill(white.rgb.begin(), white.rgb.end(), 255);
  UvTextureMap wt = render_uv_texture(white, head, frontal, R);
  for (int iv = 0; iv < R; ++iv)
    for (int iu = 0; iu < R; ++iu)
      if (wt.visible_at(iu, iv)) {
        CHECK(wt.rgb.at(0, iv, iu) == 1.0);
        CHECK(wt.rgb.at(1, iv, iu) == 1.0);
        CHECK(wt.rgb.at(2, iv, iu) == 1.0);
      }
}

TEST_CASE("render_uv_texture empty visible set raises the warning flag") {
  PointCloud cloud;
  cloud.vertices = {{0, 0, 0.1}, {0.1, 0, 0}, {0, 0.1, 0}};
  Pose pose;
  pose.tx = -100.0;  // everything projects off-image
  Image img(8, 8);
  RenderStats stats;
  UvTextureMap map = render_uv_texture(img, cloud, pose, 32, &stats);
  CHECK(stats.empty);
  CHECK(map.visible_count() == 0);
}

TEST_CASE("flip_uv involution and half-visibility mirror") {
  const int R = 32;
  UvTextureMap map;
  map.res = R;
  map.rgb = Tensor({3, R, R});
  map.visible.assign(static_cast<size_t>(R) * R, 0);
  Rng rng(17);
  for (int iv = 0; iv < R; ++iv)
    for (int iu = 0; iu < R / 2; ++iu) {  // left half visible
      map.visible[static_cast<size_t>(iv) * R + iu] = 1;
      for (int c = 0; c < 3; ++c) map.rgb.at(c, iv, iu) = rng.uniform();
    }
  UvTextureMap flipped = flip_uv(map);
  for (int iv = 0; iv < R; ++iv)
    for (int iu = 0; iu < R; ++iu)
      CHECK(flipped.visible_at(iu, iv) == map.visible_at(R - 1 - iu, iv));
  UvTextureMap twice = flip_uv(flipped);
  for (long long i = 0; i < map.rgb.numel(); ++i) CHECK(twice.rgb[i] == map.rgb[i]);
  CHECK(twice.visible == map.visible);
}

TEST_CASE("round trip: uv render then back-projection is pixel-faithful") {
  const int R = 32, W = 96, H = 96;
  SynthHeadParams params;
  params.uv_grid_res = R;  // reference-UV lattice, one vertex per texel
  params.attrs[static_cast<size_t>(Attribute::kSG)] = true;
  params.attrs[static_cast<size_t>(Attribute::kLS)] = true;
  PointCloud head = make_synth_head(params);
  Pose frontal = frontal_pose(W, H);

  Image src = render_cloud_image(head, frontal, W, H);
  UvTextureMap tex = render_uv_texture(src, head, frontal, R);
  UvPositionMap pos = build_position_map(head, R);
  Image back = render_to_image(tex, pos, frontal, W, H);

  long long covered = 0;
  int max_err = 0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const unsigned char* b = back.px(x, y);
      if (b[0] == 0 && b[1] == 0 && b[2] == 0) continue;
      ++covered;
      const unsigned char* s = src.px(x, y);
      for (int c = 0; c < 3; ++c)
        max_err = std::max(max_err, std::abs(static_cast<int>(b[c]) - static_cast<int>(s[c])));
    }
  REQUIRE(covered > 200);
  CHECK(max_err < 2);
}

TEST_CASE("render_to_image of an all-black texture is all black") {
  const int R = 32;
  SynthHeadParams params;
  PointCloud head = make_synth_head(params);
  UvPositionMap pos = build_position_map(head, R);
  UvTextureMap tex;
  tex.res = R;
  tex.rgb = Tensor({3, R, R});
  tex.visible.assign(static_cast<size_t>(R) * R, 1);
  Image img = render_to_image(tex, pos, frontal_pose(64, 64), 64, 64);
  for (unsigned char v : img.rgb) CHECK(v == 0);
}

TEST_CASE("180-degree yaw shows the empty back side") {
  const int R = 32, W = 64, H = 64;
  SynthHeadParams params;
  PointCloud head = make_synth_head(params);
  Pose frontal = frontal_pose(W, H);
  Image src = render_cloud_image(head, frontal, W, H);
  UvTextureMap tex = render_uv_texture(src, head, frontal, R);
  UvPositionMap pos = build_position_map(head, R);

  auto coverage = [&](const Pose& pose) {
    Image img = render_to_image(tex, pos, pose, W, H);
    long long nonzero = 0;
    for (size_t i = 0; i < img.rgb.size(); i += 3)
      if (img.rgb[i] || img.rgb[i + 1] || img.rgb[i + 2]) ++nonzero;
    return static_cast<double>(nonzero) / (W * H);
  };
  const double front = coverage(frontal);
  const double behind = coverage(pose_with_yaw(frontal, 180.0));
  REQUIRE(front > 0.1);
  CHECK(behind < 0.1);
  CHECK(behind < front);
}

TEST_CASE("attribute masks: polarity, disjointness, connectivity") {
  const int R = 256;
  for (Attribute a : kAllAttributes) {
    Tensor omega = attribute_mask(a, R);
    Tensor region = region_mask(region_for_attribute(a), R);
    for (long long i = 0; i < omega.numel(); ++i) {
      CHECK(omega[i] + region[i] == 1.0);  // complement: omega OR region = all ones
    }
  }
  // eye band and forehead band never overlap
  Tensor eye = region_mask(MaskRegion::kEyeBand, R);
  Tensor fore = region_mask(MaskRegion::kForehead, R);
  for (long long i = 0; i < eye.numel(); ++i) CHECK(eye[i] * fore[i] == 0.0);

  // downsampling 256 -> 32 preserves single-component regions
  for (MaskRegion r : {MaskRegion::kEyeBand, MaskRegion::kMouth, MaskRegion::kLowerFace,
                       MaskRegion::kForehead}) {
    Tensor big = region_mask(r, 256);
    CHECK(connected_components(big) == 1);
    Tensor small = downsample_mask(big, 32);
    CHECK(connected_components(small) == 1);
  }
  CHECK_THROWS_AS(parse_attribute("XX"), UsageError);
}

TEST_CASE("mask png round trip") {
  namespace fs = std::filesystem;
  Tensor m = attribute_mask(Attribute::kSG, 64);
  fs::path path = fs::temp_directory_path() / "uvface_mask_sg.png";
  save_mask_png(path.string(), m);
  Tensor back = load_mask_png(path.string());
  REQUIRE(back.dims() == m.dims());
  for (long long i = 0; i < m.numel(); ++i) CHECK(back[i] == m[i]);
  fs::remove(path);
}

TEST_CASE("align_shape: identity alignment") {
  SynthHeadParams params;
  params.grid = 24;
  PointCloud head = make_synth_head(params);
  std::vector<std::pair<int, int>> lm;
  for (int i : {0, 57, 191, 300, 413, 540}) lm.push_back({i, i});
  AlignResult res = align_shape(head, head, lm);
  CHECK(res.rmse < 1e-9);
  CHECK(res.transform.scale == doctest::Approx(1.0));
  CHECK(res.transform.t.norm() < 1e-9);
}

TEST_CASE("align_shape recovers a known similarity transform") {
  SynthHeadParams params;
  params.grid = 24;
  PointCloud source = make_synth_head(params);
  SimilarityTransform truth;
  truth.scale = 1.3;
  truth.rot = Mat3::rotation_y(20.0 * M_PI / 180.0);
  truth.t = {1, 2, 3};
  PointCloud reference = source;
  for (Vec3& v : reference.vertices) v = truth.apply(v);

  std::vector<std::pair<int, int>> lm;
  for (int i : {3, 99, 222, 345, 470, 555}) lm.push_back({i, i});
  AlignResult res = align_shape(source, reference, lm);
  CHECK(res.rmse < 1e-6);
  CHECK(res.transform.scale == doctest::Approx(1.3).epsilon(1e-6));
  for (int i = 0; i < 9; ++i)
    CHECK(res.transform.rot.m[static_cast<size_t>(i)] ==
          doctest::Approx(truth.rot.m[static_cast<size_t>(i)]).epsilon(1e-6));
}

TEST_CASE("align_shape tolerates small noise") {
  SynthHeadParams params;
  params.grid = 24;
  PointCloud source = make_synth_head(params);
  PointCloud reference = source;
  Rng rng(23);
  for (Vec3& v : reference.vertices) {
    v.x += rng.normal(0.0, 0.01);
    v.y += rng.normal(0.0, 0.01);
    v.z += rng.normal(0.0, 0.01);
  }
  std::vector<std::pair<int, int>> lm;
  for (int i : {3, 99, 222, 345, 470, 555}) lm.push_back({i, i});
  AlignResult res = align_shape(source, reference, lm);
  CHECK(res.rmse <= 0.02);
}

TEST_CASE("align_shape rejects collinear landmarks") {
  PointCloud source, reference;
  for (int i = 0; i < 8; ++i) {
    source.vertices.push_back({static_cast<double>(i), 0, 0});
    reference.vertices.push_back({static_cast<double>(i) + 1, 0, 0});
  }
  std::vector<std::pair<int, int>> lm = {{0, 0}, {3, 3}, {6, 6}};
  CHECK_THROWS_AS(align_shape(source, reference, lm), DataError);
}

TEST_CASE("obj parser reads vertices, colors, uvs and faces") {
  std::istringstream in(
      "# comment\n"
      "v 0 0 0 0.5 0.25 0.125\n"
      "v 1 0 0 1 1 1\n"
      "v 0 1 0 0 0 0\n"
      "vt 0 0\nvt 1 0\nvt 0 1\n"
      "f 1 2 3\n");
  PointCloud c = parse_obj(in);
  REQUIRE(c.size() == 3);
  REQUIRE(c.triangles.size() == 1);
  CHECK(c.triangles[0][2] == 2);
  REQUIRE(c.uvs.size() == 3);
  CHECK(c.uvs[1][0] == 1.0);
  CHECK(c.colors[0].y == 0.25);

  std::istringstream bad("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n");
  CHECK_THROWS_AS(parse_obj(bad), DataError);
}

TEST_CASE("xyz parser reads plain points") {
  std::istringstream in("0 0 0\n1 0 0\n0.5 1 -0.25\n");
  PointCloud c = parse_xyz(in);
  REQUIRE(c.size() == 3);
  CHECK(c.vertices[2].z == -0.25);
}
