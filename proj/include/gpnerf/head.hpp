// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Context-aware segmentation head. Rendered semantic feature maps live on
// the stride-4 grid; the head splits them into the four pyramid slices,
// pools coarser slices to their native strides, decodes with a U-Net-style
// top-down pass and emits logits at image resolution.
#pragma once

#include <array>
#include <utility>
#include <vector>

#include "gpnerf/nn.hpp"

namespace gpnerf {

/// Training-time feature image: teacher everywhere except the cells that
/// were actually rendered this step.
struct FusedMap {
  Var map;               // [1, D_sem, Hf, Wf]
  MaskArray provenance;  // [Hf, Wf]: 1 = rendered, 0 = teacher
  int64_t duplicate_warnings = 0;
};

/// Teacher cells keep their values bit-exactly and contribute no gradient;
/// duplicate cells resolve last-write-wins (counted).
FusedMap fuse_maps(const Tensor& teacher, const Var& rendered,
                   const std::vector<std::pair<int, int>>& cells /*(gy,gx)*/);

class PerceptionHead {
 public:
  static PerceptionHead create(ParamStore& ps, int d_sem, int n_classes, Rng& rng);

  /// Channel-wise split into 4 equal slices (slice k = pyramid level k).
  /// Concatenating the result recovers the input bit-exactly.
  std::array<Var, 4> split_features(const Var& map) const;

  /// Coarser slices are average-pooled to their native strides, then
  /// decoded coarsest-to-finest: s'_k = ConvBlock(s_k + UpConv(s'_{k+1})).
  /// Emits [1, C, 4*Hf, 4*Wf] logits (bilinear x4).
  Var decode(const std::array<Var, 4>& parts) const;

  /// Inference path; throws if any cell has teacher provenance.
  Var predict_full(const Var& map, const MaskArray& provenance) const;

  int n_classes() const { return n_classes_; }
  int d_sem() const { return d_sem_; }

 private:
  int d_sem_ = 0, n_classes_ = 0;
  struct Block {
    Conv c1, c2;
  };
  std::array<Block, 4> blocks_;  // index 0 = finest (stride 4)
  std::array<UpConv2, 3> ups_;   // ups_[k] lifts level k+1 into level k
  Conv classifier_;
};

}  // namespace gpnerf
