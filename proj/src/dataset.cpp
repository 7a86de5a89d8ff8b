// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "gpnerf/image.hpp"
#include "gpnerf/rng.hpp"

namespace gpnerf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string view_stem(int idx) {
  std::ostringstream os;
  os << std::setw(3) << std::setfill('0') << idx;
  return os.str();
}

json scene_to_json(const SceneDataset& sd, int image_h, int image_w) {
  json j;
  j["room_extent"] = sd.scene.room_extent;
  j["image_size"] = {image_h, image_w};
  j["n_views"] = sd.views.size();
  j["depth_range"] = {sd.t_near, sd.t_far};
  j["palette"] = json::array();
  for (const auto& e : sd.scene.palette)
    j["palette"].push_back({{"class_id", e.class_id}, {"color", e.color}});
  j["boxes"] = json::array();
  for (const auto& b : sd.scene.boxes)
    j["boxes"].push_back({{"lo", {b.lo.x, b.lo.y, b.lo.z}},
                          {"hi", {b.hi.x, b.hi.y, b.hi.z}},
                          {"class_id", b.class_id},
                          {"instance_id", b.instance_id},
                          {"color", b.color}});
  return j;
}

json load_json_file(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw Error(std::string(what) + " missing: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(std::string(what) + " corrupt: " + path.string() + ": " + e.what());
  }
  return j;
}

template <typename T>
T field(const json& j, const char* name, const fs::path& path) {
  if (!j.contains(name))
    throw Error("field '" + std::string(name) + "' missing in " + path.string());
  try {
    return j.at(name).get<T>();
  } catch (const std::exception& e) {
    throw Error("field '" + std::string(name) + "' invalid in " + path.string() +
                ": " + e.what());
  }
}

void save_scene_dir(const SceneDataset& sd, const fs::path& dir) {
  fs::create_directories(dir / "views");
  const int H = sd.views.empty() ? 0 : sd.views[0].camera.height;
  const int W = sd.views.empty() ? 0 : sd.views[0].camera.width;
  {
    std::ofstream out(dir / "scene.json");
    out << scene_to_json(sd, H, W).dump(2) << "\n";
  }
  for (size_t i = 0; i < sd.views.size(); ++i) {
    const auto& v = sd.views[i];
    const std::string stem = view_stem((int)i);
    const fs::path views = dir / "views";
    write_png8((views / (stem + "_rgb.png")).string(), rgb_to_u8(v.rgb));
    write_png16((views / (stem + "_depth.png")).string(),
                depth_to_u16(v.depth, sd.t_near, sd.t_far));
    write_png8((views / (stem + "_sem.png")).string(), labels_to_u8(v.semantic));
    write_png8((views / (stem + "_inst.png")).string(), labels_to_u8(v.instance));
    json pose;
    const auto& c = v.camera;
    pose["cam_to_world"] = {
        {c.rot.m[0], c.rot.m[1], c.rot.m[2], c.center.x},
        {c.rot.m[3], c.rot.m[4], c.rot.m[5], c.center.y},
        {c.rot.m[6], c.rot.m[7], c.rot.m[8], c.center.z},
        {0.0, 0.0, 0.0, 1.0}};
    pose["fx"] = c.fx;
    pose["fy"] = c.fy;
    pose["cx"] = c.cx;
    pose["cy"] = c.cy;
    pose["width"] = c.width;
    pose["height"] = c.height;
    std::ofstream out(views / (stem + "_pose.json"));
    out << pose.dump(2) << "\n";
  }
}

SceneDataset load_scene_dir(const fs::path& dir) {
  SceneDataset sd;
  const fs::path scene_path = dir / "scene.json";
  json j = load_json_file(scene_path, "scene.json");

  sd.scene.room_extent = field<std::array<double, 3>>(j, "room_extent", scene_path);
  const auto depth_range = field<std::array<double, 2>>(j, "depth_range", scene_path);
  sd.t_near = depth_range[0];
  sd.t_far = depth_range[1];
  for (const auto& pj : field<json>(j, "palette", scene_path)) {
    PaletteEntry e;
    e.class_id = field<int>(pj, "class_id", scene_path);
    e.color = field<std::array<double, 3>>(pj, "color", scene_path);
    sd.scene.palette.push_back(e);
  }
  for (const auto& bj : field<json>(j, "boxes", scene_path)) {
    Box b;
    const auto lo = field<std::array<double, 3>>(bj, "lo", scene_path);
    const auto hi = field<std::array<double, 3>>(bj, "hi", scene_path);
    b.lo = {lo[0], lo[1], lo[2]};
    b.hi = {hi[0], hi[1], hi[2]};
    b.class_id = field<int>(bj, "class_id", scene_path);
    b.instance_id = field<int>(bj, "instance_id", scene_path);
    b.color = field<std::array<double, 3>>(bj, "color", scene_path);
    sd.scene.boxes.push_back(b);
  }

  const int n_views = field<int>(j, "n_views", scene_path);
  for (int i = 0; i < n_views; ++i) {
    const std::string stem = view_stem(i);
    const fs::path views = dir / "views";
    ViewRecord v;

    const fs::path pose_path = views / (stem + "_pose.json");
    json pose = load_json_file(pose_path, ("pose of view " + stem).c_str());
    const auto mat =
        field<std::array<std::array<double, 4>, 4>>(pose, "cam_to_world", pose_path);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) v.camera.rot.m[r * 3 + c] = mat[r][c];
    v.camera.center = {mat[0][3], mat[1][3], mat[2][3]};
    v.camera.fx = field<double>(pose, "fx", pose_path);
    v.camera.fy = field<double>(pose, "fy", pose_path);
    v.camera.cx = field<double>(pose, "cx", pose_path);
    v.camera.cy = field<double>(pose, "cy", pose_path);
    v.camera.width = field<int>(pose, "width", pose_path);
    v.camera.height = field<int>(pose, "height", pose_path);
    v.camera.validate();

    v.rgb = u8_to_rgb(read_png8((views / (stem + "_rgb.png")).string()));
    v.depth = u16_to_depth(read_png16((views / (stem + "_depth.png")).string()),
                           sd.t_near, sd.t_far);
    v.semantic = u8_to_labels(read_png8((views / (stem + "_sem.png")).string()));
    v.instance = u8_to_labels(read_png8((views / (stem + "_inst.png")).string()));
    sd.views.push_back(std::move(v));
  }
  return sd;
}

}  // namespace

Dataset make_dataset(const SceneConfig& base_config, int n_scenes, int n_views,
                     uint64_t seed) {
  GPNERF_CHECK(n_scenes >= 1 && n_views >= 1, "need scenes and views");
  Dataset ds;
  for (int s = 0; s < n_scenes; ++s) {
    SceneConfig cfg = base_config;
    cfg.seed = Rng::mix(seed, 1000 + s);
    SceneDataset sd;
    sd.scene = generate_scene(cfg);
    scene_t_range(sd.scene, sd.t_near, sd.t_far);
    const auto cams = sample_camera_ring(sd.scene, n_views,
                                         Rng::mix(seed, 2000 + s), cfg.image_h,
                                         cfg.image_w);
    for (const auto& cam : cams) sd.views.push_back(render_view_oracle(sd.scene, cam));
    ds.scenes.push_back(std::move(sd));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir, bool force) {
  const fs::path root(dir);
  if (fs::exists(root) && !fs::is_empty(root) && !force)
    throw Error("refusing to overwrite existing path " + dir + " (use --force)");
  fs::create_directories(root);
  for (size_t s = 0; s < ds.scenes.size(); ++s) {
    std::ostringstream name;
    name << "scene_" << std::setw(3) << std::setfill('0') << s;
    save_scene_dir(ds.scenes[s], root / name.str());
  }
}

Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::exists(root)) throw Error("dataset directory missing: " + dir);
  Dataset ds;
  if (fs::exists(root / "scene.json")) {
    ds.scenes.push_back(load_scene_dir(root));
    return ds;
  }
  std::vector<fs::path> scene_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && e.path().filename().string().rfind("scene_", 0) == 0)
      scene_dirs.push_back(e.path());
  std::sort(scene_dirs.begin(), scene_dirs.end());
  if (scene_dirs.empty())
    throw Error("no scene.json or scene_* directories under " + dir);
  for (const auto& p : scene_dirs) ds.scenes.push_back(load_scene_dir(p));
  return ds;
}

}  // namespace gpnerf
