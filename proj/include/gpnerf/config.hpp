// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat key = value config with optional [section] headers (organizational
// only; keys are globally unique). Unknown keys are rejected. CLI flags
// override file values; GPNERF_SEED overrides the seed.
#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "gpnerf/losses.hpp"

namespace gpnerf {

struct RunConfig {
  // scene / dataset generation
  std::array<double, 3> room_extent{5.0, 5.0, 3.2};
  int n_objects = 4;
  int n_classes = 5;
  int image_h = 64, image_w = 64;
  int scenes = 2;
  int views = 20;

  // model dims
  std::array<int, 4> enc_channels{16, 32, 64, 128};
  int d_rgb = 32;  // d_sem = 4 * d_rgb
  int rgb_stride = 2;
  int n_heads = 1;
  int n_blocks = 1;
  int pe_freqs = 6;

  // training (full-scale defaults; toy runs override steps/lrs/decay)
  std::string mode = "generalization";  // or "finetune"
  int steps = 200000;
  int rays_per_step = 512;
  int samples_per_ray = 64;  // M
  int n_ref = 10;            // N reference views
  double lr_extractor = 5e-3;
  double lr_transformer = 1e-5;
  double lr_head = 5e-5;
  double lr_decay = 0.999995;  // per-step exponential factor
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  LossWeights loss;
  bool gradient_block = true;
  std::string ce_support = "fused";  // "fused" | "rendered"
  double ce_rendered_boost = 2.0;
  bool stratified = true;
  int checkpoint_every = 1000;
  bool instance_mode = false;
  int holdout_views = 4;  // trailing views per scene reserved for eval
  uint64_t seed = 1;

  // paths
  std::string dataset_dir;
  std::string out_dir = "out";
  std::string checkpoint_path;

  static RunConfig from_file(const std::string& path);
  /// Set one field by key name; throws on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Effective flat dump (stable key order), embedded in checkpoints/reports.
  std::string dump() const;
  /// Apply environment overrides (GPNERF_SEED).
  void apply_env();
  void validate() const;
};

}  // namespace gpnerf
