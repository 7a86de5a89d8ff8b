// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/scene.hpp"

#include <algorithm>
#include <cmath>

#include "gpnerf/rng.hpp"

namespace gpnerf {

namespace {
// Light direction (from the light toward the scene), slightly tilted so
// every wall orientation gets a distinct shade.
const Vec3 kLightDir = Vec3{-0.35, -0.22, -0.91}.normalized();
constexpr double kAmbient = 0.35;
constexpr double kDiffuse = 0.65;
}  // namespace

std::vector<PaletteEntry> SceneConfig::default_palette(int n_classes) {
  GPNERF_CHECK(n_classes >= 1, "palette needs at least the background class");
  std::vector<PaletteEntry> p;
  p.push_back({0, {0.72, 0.70, 0.66}});  // walls
  const std::array<std::array<double, 3>, 8> base{{{0.85, 0.15, 0.12},
                                                   {0.10, 0.65, 0.20},
                                                   {0.15, 0.25, 0.85},
                                                   {0.90, 0.75, 0.10},
                                                   {0.65, 0.15, 0.75},
                                                   {0.10, 0.72, 0.72},
                                                   {0.92, 0.45, 0.10},
                                                   {0.45, 0.30, 0.12}}};
  for (int c = 1; c < n_classes; ++c)
    p.push_back({c, base[(c - 1) % base.size()]});
  return p;
}

void SceneConfig::validate() const {
  GPNERF_CHECK(n_objects >= 0, "n_objects must be >= 0");
  GPNERF_CHECK(image_h >= 8 && image_w >= 8, "image size must be >= 8");
  GPNERF_CHECK(room_extent[0] > 0 && room_extent[1] > 0 && room_extent[2] > 0,
               "room extent must be positive");
  bool has_bg = false;
  for (const auto& e : class_palette) {
    has_bg = has_bg || e.class_id == 0;
    for (double c : e.color)
      GPNERF_CHECK(c >= 0.0 && c <= 1.0, "palette colors must lie in [0,1]");
  }
  GPNERF_CHECK(has_bg, "palette must contain background class 0");
}

Vec3 Scene::centroid() const {
  if (boxes.empty()) return {0, 0, 0};
  Vec3 c{0, 0, 0};
  for (const auto& b : boxes) c = c + (b.lo + b.hi) * 0.5;
  return c * (1.0 / boxes.size());
}

Scene generate_scene(const SceneConfig& config) {
  config.validate();
  Scene scene;
  scene.room_extent = config.room_extent;
  scene.palette = config.class_palette.empty()
                      ? SceneConfig::default_palette(5)
                      : config.class_palette;

  std::vector<int> object_classes;
  for (const auto& e : scene.palette)
    if (e.class_id != 0) object_classes.push_back(e.class_id);
  GPNERF_CHECK(config.n_objects == 0 || !object_classes.empty(),
               "cannot place objects with a background-only palette");

  Rng rng(Rng::mix(config.seed, 0xb0c5));
  const Vec3 half = scene.half();
  // Objects stay in the inner region so ring cameras never sit inside one.
  const double margin = 0.52;
  const double hxy = std::min(half.x, half.y);
  for (int i = 0; i < config.n_objects; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      // Sizes scale with the room and shrink as attempts fail, so crowded
      // configs still terminate.
      const double shrink = 1.0 - 0.5 * attempt / 200.0;
      const double sx = hxy * rng.uniform(0.22, 0.42) * shrink;
      const double sy = hxy * rng.uniform(0.22, 0.42) * shrink;
      const double sz = half.z * rng.uniform(0.40, 0.85) * shrink;
      const double cx = rng.uniform(-(half.x * margin - sx / 2), half.x * margin - sx / 2);
      const double cy = rng.uniform(-(half.y * margin - sy / 2), half.y * margin - sy / 2);
      const double cz = rng.uniform(-half.z + 0.05 + sz / 2, half.z * 0.45 - sz / 2);
      Box b;
      b.lo = {cx - sx / 2, cy - sy / 2, cz - sz / 2};
      b.hi = {cx + sx / 2, cy + sy / 2, cz + sz / 2};
      const int cls = object_classes[i % object_classes.size()];
      b.class_id = cls;
      b.instance_id = i + 1;
      for (const auto& e : scene.palette)
        if (e.class_id == cls) b.color = e.color;
      bool overlaps = false;
      for (const auto& o : scene.boxes) {
        const bool apart = b.hi.x < o.lo.x - 0.06 || o.hi.x < b.lo.x - 0.06 ||
                           b.hi.y < o.lo.y - 0.06 || o.hi.y < b.lo.y - 0.06 ||
                           b.hi.z < o.lo.z - 0.06 || o.hi.z < b.lo.z - 0.06;
        overlaps = overlaps || !apart;
      }
      if (!overlaps) {
        scene.boxes.push_back(b);
        placed = true;
      }
    }
    GPNERF_CHECK(placed, "could not place object " + std::to_string(i + 1) +
                             " inside the room after 200 attempts");
  }
  return scene;
}

RayHit intersect_scene(const Scene& scene, const Vec3& origin, const Vec3& dir) {
  RayHit best;
  best.t = 1e30;

  // Room exit (ray starts inside): smallest positive t where the ray leaves
  // the slab volume. The hit wall's inward normal faces the viewer.
  const Vec3 half = scene.half();
  double t_exit = 1e30;
  int exit_axis = 0;
  double exit_sign = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double d = dir[a];
    if (std::abs(d) < 1e-12) continue;
    const double bound = (d > 0 ? half[a] : -half[a]);
    const double o = origin[a];
    const double t = (bound - o) / d;
    if (t > 0 && t < t_exit) {
      t_exit = t;
      exit_axis = a;
      exit_sign = d > 0 ? -1.0 : 1.0;  // inward normal
    }
  }
  best.t = t_exit;
  best.class_id = 0;
  best.instance_id = 0;
  for (const auto& e : scene.palette)
    if (e.class_id == 0) best.base_color = e.color;
  best.normal = {0, 0, 0};
  if (exit_axis == 0) best.normal.x = exit_sign;
  if (exit_axis == 1) best.normal.y = exit_sign;
  if (exit_axis == 2) best.normal.z = exit_sign;

  for (const auto& b : scene.boxes) {
    double t_lo = -1e30, t_hi = 1e30;
    int axis_lo = -1;
    double sign_lo = 0;
    for (int a = 0; a < 3; ++a) {
      const double d = dir[a], o = origin[a];
      const double lo = a == 0 ? b.lo.x : (a == 1 ? b.lo.y : b.lo.z);
      const double hi = a == 0 ? b.hi.x : (a == 1 ? b.hi.y : b.hi.z);
      if (std::abs(d) < 1e-12) {
        if (o < lo || o > hi) {
          t_lo = 1e30;  // parallel miss
          break;
        }
        continue;
      }
      double t0 = (lo - o) / d, t1 = (hi - o) / d;
      double sgn = -1.0;  // normal of the lo face points toward -axis
      if (t0 > t1) {
        std::swap(t0, t1);
        sgn = 1.0;
      }
      if (t0 > t_lo) {
        t_lo = t0;
        axis_lo = a;
        sign_lo = sgn;
      }
      t_hi = std::min(t_hi, t1);
    }
    if (t_lo > t_hi || t_hi < 1e-9) continue;
    const double t = t_lo > 1e-9 ? t_lo : t_hi;
    if (t >= best.t) continue;
    best.t = t;
    best.class_id = b.class_id;
    best.instance_id = b.instance_id;
    best.base_color = b.color;
    best.normal = {0, 0, 0};
    const double s = t_lo > 1e-9 ? sign_lo : -sign_lo;
    if (axis_lo == 0) best.normal.x = s;
    if (axis_lo == 1) best.normal.y = s;
    if (axis_lo == 2) best.normal.z = s;
  }
  return best;
}

std::array<double, 3> shade(const RayHit& hit) {
  const double lambert = std::max(0.0, hit.normal.dot(kLightDir * -1.0));
  const double k = kAmbient + kDiffuse * lambert;
  return {std::clamp(hit.base_color[0] * k, 0.0, 1.0),
          std::clamp(hit.base_color[1] * k, 0.0, 1.0),
          std::clamp(hit.base_color[2] * k, 0.0, 1.0)};
}

ViewRecord render_view_oracle(const Scene& scene, const CameraModel& camera) {
  const int H = camera.height, W = camera.width;
  GPNERF_CHECK(H > 0 && W > 0, "camera has no image size");
  ViewRecord view;
  view.camera = camera;
  view.rgb = Tensor({H, W, 3});
  view.depth = Tensor({H, W});
  view.semantic = LabelArray({H, W});
  view.instance = LabelArray({H, W});
#pragma omp parallel for schedule(static)
  for (int py = 0; py < H; ++py) {
    for (int px = 0; px < W; ++px) {
      const Vec3 dir = camera.pixel_ray_dir(px, py);
      const RayHit hit = intersect_scene(scene, camera.center, dir);
      const auto rgb = shade(hit);
      view.rgb.at({py, px, 0}) = rgb[0];
      view.rgb.at({py, px, 1}) = rgb[1];
      view.rgb.at({py, px, 2}) = rgb[2];
      view.depth.at({py, px}) = hit.t;
      view.semantic[(int64_t)py * W + px] = hit.class_id;
      view.instance[(int64_t)py * W + px] = hit.instance_id;
    }
  }
  return view;
}

std::vector<CameraModel> sample_camera_ring(const Scene& scene, int n_views,
                                            uint64_t seed, int image_h,
                                            int image_w, double fov_deg) {
  GPNERF_CHECK(n_views >= 1, "need at least one view");
  const Vec3 half = scene.half();
  const Vec3 target = scene.centroid();
  const double radius = 0.78 * std::min(half.x, half.y);
  const double focal =
      image_w / (2.0 * std::tan(fov_deg * 3.14159265358979323846 / 360.0));
  Rng rng(Rng::mix(seed, 0xcafe));
  std::vector<CameraModel> cams;
  cams.reserve(n_views);
  for (int i = 0; i < n_views; ++i) {
    const double angle = 2.0 * 3.14159265358979323846 * i / n_views +
                         rng.uniform(-0.06, 0.06);
    const double r = radius * (1.0 + rng.uniform(-0.05, 0.05));
    const double z = 0.30 * half.z + rng.uniform(-0.12, 0.12) * half.z;
    const Vec3 eye{r * std::cos(angle), r * std::sin(angle), z};
    cams.push_back(look_at(eye, target, {0, 0, 1}, focal, focal,
                           (image_w - 1) / 2.0, (image_h - 1) / 2.0, image_w,
                           image_h));
  }
  return cams;
}

void scene_t_range(const Scene& scene, double& t_near, double& t_far) {
  const Vec3 e{scene.room_extent[0], scene.room_extent[1], scene.room_extent[2]};
  t_near = 0.05 * std::min({e.x, e.y, e.z});
  t_far = e.norm();  // room diagonal bounds any inside ray
}

}  // namespace gpnerf
