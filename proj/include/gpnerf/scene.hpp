// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Procedural multi-view scenes: colored axis-aligned boxes inside a closed
// room, with analytic per-pixel ground truth (color, depth, class, instance).
#pragma once

#include <array>
#include <vector>

#include "gpnerf/camera.hpp"
#include "gpnerf/geometry.hpp"
#include "gpnerf/tensor.hpp"

namespace gpnerf {

struct PaletteEntry {
  int class_id = 0;
  std::array<double, 3> color{0.5, 0.5, 0.5};
};

struct SceneConfig {
  std::array<double, 3> room_extent{5.0, 5.0, 3.2};  // full side lengths
  int n_objects = 4;
  std::vector<PaletteEntry> class_palette;  // must include background class 0
  int image_h = 64, image_w = 64;
  uint64_t seed = 1;

  static std::vector<PaletteEntry> default_palette(int n_classes);
  void validate() const;
};

struct Box {
  Vec3 lo, hi;  // min/max corners, lo < hi componentwise
  int class_id = 0;
  int instance_id = 0;
  std::array<double, 3> color{0, 0, 0};
};

/// Room is the axis-aligned volume [-extent/2, extent/2]^3; its six walls
/// carry class 0, instance 0.
struct Scene {
  std::array<double, 3> room_extent{};
  std::vector<Box> boxes;
  std::vector<PaletteEntry> palette;

  Vec3 half() const {
    return {room_extent[0] / 2, room_extent[1] / 2, room_extent[2] / 2};
  }
  /// Mean of box centers; room center when empty.
  Vec3 centroid() const;
  int num_classes() const { return (int)palette.size(); }
};

struct ViewRecord {
  Tensor rgb;           // [H,W,3] in [0,1]
  Tensor depth;         // [H,W] along-ray distance, > 0
  LabelArray semantic;  // [H,W] class ids
  LabelArray instance;  // [H,W] instance ids (0 = walls)
  CameraModel camera;
};

struct RayHit {
  double t = 0;
  int class_id = 0;
  int instance_id = 0;
  std::array<double, 3> base_color{};
  Vec3 normal;  // toward the viewer side
};

Scene generate_scene(const SceneConfig& config);

/// Nearest analytic intersection of a ray from inside the room.
RayHit intersect_scene(const Scene& scene, const Vec3& origin, const Vec3& dir);

/// Fixed-light Lambertian shading of a hit.
std::array<double, 3> shade(const RayHit& hit);

ViewRecord render_view_oracle(const Scene& scene, const CameraModel& camera);

/// Cameras on a ring inside the room, look-at the scene centroid, with a
/// small deterministic positional jitter.
std::vector<CameraModel> sample_camera_ring(const Scene& scene, int n_views,
                                            uint64_t seed, int image_h,
                                            int image_w,
                                            double fov_deg = 62.0);

/// Conservative [t_near, t_far] for rays cast from inside this room.
void scene_t_range(const Scene& scene, double& t_near, double& t_far);

}  // namespace gpnerf
