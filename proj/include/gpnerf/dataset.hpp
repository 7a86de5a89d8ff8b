// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// On-disk dataset layout (one directory per scene):
//   scene.json                      boxes, palette, room, image size, depth range
//   views/<idx>_rgb.png             8-bit RGB
//   views/<idx>_depth.png           16-bit gray, linear [t_near,t_far] -> [0,65535]
//   views/<idx>_sem.png             8-bit class index
//   views/<idx>_inst.png            8-bit instance index
//   views/<idx>_pose.json           4x4 camera-to-world (row-major) + intrinsics
// A multi-scene root holds scene_000/, scene_001/, ...
#pragma once

#include <string>
#include <vector>

#include "gpnerf/scene.hpp"

namespace gpnerf {

struct SceneDataset {
  Scene scene;
  std::vector<ViewRecord> views;
  double t_near = 0, t_far = 0;
};

struct Dataset {
  std::vector<SceneDataset> scenes;
};

/// Procedurally generates n_scenes scenes with n_views ring cameras each.
Dataset make_dataset(const SceneConfig& base_config, int n_scenes, int n_views,
                     uint64_t seed);

void save_dataset(const Dataset& ds, const std::string& dir, bool force);

/// Accepts either a multi-scene root or a single scene directory.
Dataset load_dataset(const std::string& dir);

}  // namespace gpnerf
