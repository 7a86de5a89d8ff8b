// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared multi-scale extractor: a strided conv encoder with an FPN producing
// four semantic pyramid levels (strides 4/8/16/32), their fused stride-4
// concatenation, and a low-level grid for radiance aggregation. The same
// parameters serve reference views and the teacher path.
#pragma once

#include <array>
#include <vector>

#include "gpnerf/nn.hpp"

namespace gpnerf {

struct BackboneConfig {
  std::array<int, 4> channels{16, 32, 64, 128};
  int d_rgb = 32;      // low-level grid width; d_sem = 4 * d_rgb
  int rgb_stride = 2;  // stride of the low-level grid
};

struct FeatureGridSet {
  Var rgb;                     // [N, D_rgb, H/s, W/s]
  Var sem_fused;               // [N, D_sem, H/4, W/4], level k at channels [k*D..(k+1)*D)
  std::array<Var, 4> pyramid;  // level k: [N, D_sem/4, H/(4<<k), W/(4<<k)]
  int d_rgb = 0, d_sem = 0, rgb_stride = 0;
};

/// Teacher features carry no graph: gradient propagation is severed
/// end-to-end (values equal the student-path extraction bit-exactly).
struct TeacherMap {
  Tensor sem_fused;  // [1, D_sem, H/4, W/4]
};

class Backbone {
 public:
  static Backbone create(ParamStore& ps, const BackboneConfig& cfg, Rng& rng);

  /// images are [H,W,3] in [0,1]; H, W must be divisible by 32.
  FeatureGridSet extract(const std::vector<Tensor>& images) const;

  TeacherMap teacher_features(const Tensor& novel_image) const;

  int d_sem() const { return cfg_.d_rgb * 4; }
  const BackboneConfig& config() const { return cfg_; }

 private:
  BackboneConfig cfg_;
  Conv stem_, stage1_, stage2_, stage3_, stage4_;
  std::array<Conv, 4> lateral_;
  std::array<Conv, 4> out_;
  Conv rgb1_, rgb2_, rgb_skip_;
};

/// [H,W,3] images -> one [N,3,H,W] batch; rejects non-finite values.
Tensor images_to_batch(const std::vector<Tensor>& images);

}  // namespace gpnerf
