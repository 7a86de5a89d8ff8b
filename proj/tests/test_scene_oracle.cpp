// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>

#include "gpnerf/scene.hpp"

using namespace gpnerf;

namespace {
SceneConfig base_config(int n_objects, uint64_t seed) {
  SceneConfig cfg;
  cfg.room_extent = {5.0, 5.0, 3.2};
  cfg.n_objects = n_objects;
  cfg.class_palette = SceneConfig::default_palette(5);
  cfg.image_h = cfg.image_w = 64;
  cfg.seed = seed;
  return cfg;
}
}  // namespace

TEST_CASE("empty scene renders background class everywhere") {
  const Scene scene = generate_scene(base_config(0, 3));
  CHECK(scene.boxes.empty());
  const auto cams = sample_camera_ring(scene, 2, 9, 32, 32);
  const ViewRecord view = render_view_oracle(scene, cams[0]);
  for (int64_t i = 0; i < view.semantic.numel(); ++i) {
    CHECK(view.semantic[i] == 0);
    CHECK(view.instance[i] == 0);
    CHECK(view.depth[i] > 0.0);
  }
}

TEST_CASE("identical config and seed give byte-identical scenes") {
  const Scene a = generate_scene(base_config(3, 7));
  const Scene b = generate_scene(base_config(3, 7));
  REQUIRE(a.boxes.size() == b.boxes.size());
  for (size_t i = 0; i < a.boxes.size(); ++i) {
    CHECK(a.boxes[i].lo.x == b.boxes[i].lo.x);
    CHECK(a.boxes[i].hi.z == b.boxes[i].hi.z);
    CHECK(a.boxes[i].class_id == b.boxes[i].class_id);
  }
}

TEST_CASE("objects get distinct instance ids and stay inside the room") {
  const Scene scene = generate_scene(base_config(3, 7));
  REQUIRE(scene.boxes.size() == 3);
  std::set<int> ids;
  const Vec3 half = scene.half();
  for (const auto& b : scene.boxes) {
    ids.insert(b.instance_id);
    CHECK(b.lo.x < b.hi.x);
    CHECK(b.lo.y < b.hi.y);
    CHECK(b.lo.z < b.hi.z);
    CHECK(b.lo.x > -half.x);
    CHECK(b.hi.x < half.x);
    CHECK(b.lo.z > -half.z);
    CHECK(b.hi.z < half.z);
  }
  CHECK(ids == std::set<int>{1, 2, 3});
}

TEST_CASE("impossible placement is rejected with an error") {
  SceneConfig cfg = base_config(60, 1);
  cfg.room_extent = {1.6, 1.6, 1.6};  // no room for 60 non-overlapping boxes
  CHECK_THROWS_AS(generate_scene(cfg), Error);
}

TEST_CASE("camera facing a wall reads the analytic distance") {
  const Scene scene = generate_scene(base_config(0, 1));
  // Looking along +x from the origin: the wall sits at half extent.
  const CameraModel cam = look_at({0, 0, 0}, {1, 0, 0}, {0, 0, 1}, 40, 40, 15.5,
                                  15.5, 32, 32);
  const ViewRecord view = render_view_oracle(scene, cam);
  const double expected = scene.half().x;
  // Center pixels straddle the principal point; both rays are near-axial.
  CHECK(view.depth.at({15, 15}) == doctest::Approx(expected).epsilon(2e-3));
  // Exactly axial ray through the principal point:
  const RayHit hit = intersect_scene(scene, {0, 0, 0}, {1, 0, 0});
  CHECK(hit.t == doctest::Approx(expected).epsilon(1e-12));
  CHECK(hit.class_id == 0);
}

TEST_CASE("a box covering the frustum owns every semantic pixel") {
  SceneConfig cfg = base_config(0, 1);
  Scene scene = generate_scene(cfg);
  Box b;
  b.lo = {0.5, -2.0, -1.2};
  b.hi = {1.5, 2.0, 1.2};
  b.class_id = 2;
  b.instance_id = 1;
  b.color = {0.1, 0.65, 0.2};
  scene.boxes.push_back(b);
  // Camera close to the box, looking straight at its large face.
  const CameraModel cam = look_at({-0.2, 0, 0}, {1, 0, 0}, {0, 0, 1}, 60, 60,
                                  15.5, 15.5, 32, 32);
  const ViewRecord view = render_view_oracle(scene, cam);
  for (int64_t i = 0; i < view.semantic.numel(); ++i) {
    CHECK(view.semantic[i] == 2);
    CHECK(view.instance[i] == 1);
  }
}

TEST_CASE("oracle rendering is deterministic") {
  const Scene scene = generate_scene(base_config(4, 5));
  const auto cams = sample_camera_ring(scene, 3, 2, 48, 48);
  const ViewRecord a = render_view_oracle(scene, cams[1]);
  const ViewRecord b = render_view_oracle(scene, cams[1]);
  for (int64_t i = 0; i < a.rgb.numel(); ++i) CHECK(a.rgb[i] == b.rgb[i]);
  for (int64_t i = 0; i < a.depth.numel(); ++i) CHECK(a.depth[i] == b.depth[i]);
}

TEST_CASE("camera ring: look-at constraint, determinism, inside the room") {
  const Scene scene = generate_scene(base_config(3, 11));
  const auto single = sample_camera_ring(scene, 1, 4, 64, 64);
  REQUIRE(single.size() == 1);
  // The centroid projects to the principal point.
  const ProjectedPoint p = project(scene.centroid(), single[0]);
  REQUIRE(p.valid);
  CHECK(p.u == doctest::Approx(single[0].cx).epsilon(1e-9));
  CHECK(p.v == doctest::Approx(single[0].cy).epsilon(1e-9));

  const auto ring1 = sample_camera_ring(scene, 12, 31, 64, 64);
  const auto ring2 = sample_camera_ring(scene, 12, 31, 64, 64);
  REQUIRE(ring1.size() == 12);
  const Vec3 half = scene.half();
  for (size_t i = 0; i < ring1.size(); ++i) {
    CHECK(ring1[i].center.x == ring2[i].center.x);
    CHECK(ring1[i].center.z == ring2[i].center.z);
    CHECK(std::abs(ring1[i].center.x) < half.x);
    CHECK(std::abs(ring1[i].center.y) < half.y);
    CHECK(std::abs(ring1[i].center.z) < half.z);
  }
}

TEST_CASE("depth consistency: re-intersecting reconstructed rays") {
  const Scene scene = generate_scene(base_config(4, 13));
  const auto cams = sample_camera_ring(scene, 2, 8, 48, 48);
  const ViewRecord view = render_view_oracle(scene, cams[0]);
  for (int py = 0; py < 48; py += 5)
    for (int px = 0; px < 48; px += 5) {
      const Vec3 dir = view.camera.pixel_ray_dir(px, py);
      const RayHit hit = intersect_scene(scene, view.camera.center, dir);
      const double stored = view.depth.at({py, px});
      CHECK(std::abs(hit.t - stored) / stored < 1e-6);
    }
}

TEST_CASE("pixels of one instance share a base color before shading") {
  const Scene scene = generate_scene(base_config(4, 17));
  for (const auto& b : scene.boxes) {
    // The stored box color is the palette color of its class.
    for (const auto& e : scene.palette)
      if (e.class_id == b.class_id) CHECK(b.color == e.color);
  }
  // Shading divides out: rgb / shade-factor recovers a color proportional to
  // the base color; instead verify via the oracle hit record directly.
  const auto cams = sample_camera_ring(scene, 1, 3, 32, 32);
  const ViewRecord view = render_view_oracle(scene, cams[0]);
  for (int py = 0; py < 32; py += 3)
    for (int px = 0; px < 32; px += 3) {
      const RayHit hit =
          intersect_scene(scene, view.camera.center, view.camera.pixel_ray_dir(px, py));
      const int inst = view.instance[(int64_t)py * 32 + px];
      if (inst == 0) continue;
      CHECK(hit.base_color == scene.boxes[inst - 1].color);
    }
}

TEST_CASE("scene config validation") {
  SceneConfig cfg = base_config(1, 1);
  cfg.image_h = 4;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = base_config(1, 1);
  cfg.class_palette = {{1, {0.2, 0.2, 0.2}}};  // background class missing
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = base_config(1, 1);
  cfg.class_palette[1].color = {1.4, 0.0, 0.0};
  CHECK_THROWS_AS(cfg.validate(), Error);
}
