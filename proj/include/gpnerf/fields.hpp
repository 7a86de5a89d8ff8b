// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Field-Aggregation Transformer (FAT): cross-view attention turning per-view
// projected features into per-point radiance features, exporting per-view
// weights. The semantic-embedding field reuses those weights (shared
// attention) over high-level features. Ray-Aggregation Transformer (RAT):
// attention along each ray producing per-ray outputs and per-point weights,
// reused to render semantic features.
#pragma once

#include <array>
#include <vector>

#include "gpnerf/nn.hpp"

namespace gpnerf {

struct FieldsConfig {
  int d_rgb = 32;  // token width; the semantic width is 4*d_rgb
  int n_heads = 1;
  int n_blocks = 1;   // (FAT, RAT) rounds; later blocks query with ray tokens
  int pe_freqs = 6;
  double coord_scale = 1.0;  // multiplies coordinates before the encoding

  int d_sem() const { return 4 * d_rgb; }
  int pe_dim() const { return 3 + 6 * pe_freqs; }
};

/// Exported aggregation weights of one forward pass.
struct AttentionRecord {
  Tensor a_fat;  // [P, N]: per point, over reference views (rows sum to 1
                 // over valid views; masked views exactly 0)
  Tensor a_rat;  // [R, M]: per ray, over sample points (rows sum to 1)
};

/// Per-(point, view) inputs gathered by epipolar projection.
struct EpipolarInputs {
  Var x_rgb;               // [P, N, D_rgb]
  Var x_sem;               // [P, N, D_sem]
  Var rel_dirs;            // [P, N, 3] constant
  MaskArray valid;         // [P, N]
  Tensor point_valid;      // [P] 1.0 when any view sees the point
  Tensor pe_coords;        // [P, pe_dim] constant
  Tensor pe_dirs;          // [P, pe_dim] constant
  int rays = 0, samples = 0;
};

struct FieldOutputs {
  Var color;         // [R, 3] in (0,1)
  Var sem_ray;       // [R, D_sem]
  Var f_sem_points;  // [P, D_sem] retained for the depth-guided loss
  Var f_rgb_points;  // [P, D_rgb]
  Var a_fat;         // [P, N] graph-tracked weights
  Var a_rat;         // [R, M]
  AttentionRecord attn() const { return {a_fat.value(), a_rat.value()}; }
};

/// [P,3] coords -> [P, 3+6F]: scaled input plus sin/cos at octave frequencies.
Tensor positional_encoding(const Tensor& x, int freqs, double scale);

class FieldAggregator {
 public:
  static FieldAggregator create(ParamStore& ps, const FieldsConfig& cfg, Rng& rng);

  /// Full joint pass: radiance + semantic features for every ray.
  FieldOutputs run(const EpipolarInputs& in) const;

  const FieldsConfig& config() const { return cfg_; }

  // Pieces of the pipeline, exposed for tests.
  struct FatOut {
    Var tokens;  // [P, D] per-point radiance features (invalid points zeroed)
    Var a_fat;   // [P, N]
    Var p_pos;   // [P, N, D] positional term
  };
  FatOut fat_aggregate(int block, const Var& x_rgb, const Var& rel_dirs,
                       const MaskArray& valid, const Var& query_init,
                       const Tensor& point_valid) const;

  /// f_sem = sum_views a_fat * (x_sem + p_pos tiled to D_sem); the weights
  /// are already normalized so this is the mean reduction over views.
  Var semantic_field(const Var& a_fat, const Var& x_sem, const Var& p_pos,
                     const Tensor& point_valid) const;

  struct RatOut {
    Var tokens;  // [R, M, D]
    Var a_rat;   // [R, M] (mean over query rows and heads)
  };
  RatOut rat_aggregate(int block, const Var& tokens3, const Var& pe_x,
                       const Var& pe_d) const;

  Var render_color(const Var& rat_tokens) const;  // [R,M,D] -> [R,3]
  Var render_semantic(const Var& a_rat, const Var& f_sem_points3) const;

 private:
  FieldsConfig cfg_;
  struct FatBlock {
    Linear fq, fk, fv, fa;
    Mlp2 fp, frgb;
  };
  struct RatBlock {
    Linear fin, fq, fk, fv;
    Mlp2 fout;
  };
  std::vector<FatBlock> fat_;
  std::vector<RatBlock> rat_;
  Mlp2 color_mlp_;
  Mlp2 sem_mlp_;
};

}  // namespace gpnerf
