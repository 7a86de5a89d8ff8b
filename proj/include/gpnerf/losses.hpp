// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "gpnerf/autodiff.hpp"

namespace gpnerf {

struct LossWeights {
  double rgb = 1.0;           // alpha_1
  double sem = 1.0;           // alpha_2
  double sem_distill = 0.1;   // alpha_3
  double depth_guided = 0.1;  // alpha_4
  void validate() const;
};

struct LossReport {
  double l_rgb = 0, l_sem = 0, l_sd = 0, l_dg = 0, l_all = 0;
  int64_t clamped_depth_rays = 0;
  int64_t zero_norm_features = 0;
  int64_t missing_depth_rays = 0;
  int64_t invalid_points = 0;
  int64_t duplicate_cells = 0;
};

/// sum over rays of the squared L2 color error.
Var photometric_loss(const Var& pred, const Tensor& gt);

/// Softmax cross entropy over all pixels, log-sum-exp stabilized.
/// logits [1,C,H,W]; labels [H,W]; pixel_weights [H,W] optional.
Var semantic_ce_loss(const Var& logits, const LabelArray& labels,
                     const Tensor& pixel_weights);

/// sum over rays of 1 - cos(student, teacher); cosine eps-guarded so
/// zero-norm rows contribute exactly 1 (counted).
Var semantic_distill_loss(const Var& sem_rendered, const Tensor& teacher_rows,
                          int64_t* zero_norm_warnings);

/// Per-point distillation with the N_p index band around the GT-depth
/// sample: |i - i_d| < N_p pulls toward the teacher (1 - cos), |i - i_d| >
/// N_p penalizes similarity (max(0, cos)), |i - i_d| = N_p contributes 0.
/// Rays with NaN gt_depth are skipped (counted).
Var depth_guided_distill_loss(const Var& f_sem_points, const Tensor& teacher_rows,
                              const Tensor& ts, const std::vector<double>& gt_depth,
                              double t_near, double t_far, int n_p,
                              LossReport* report);

/// alpha-weighted sum; undefined terms count as zero.
Var total_loss(const Var& l_rgb, const Var& l_sem, const Var& l_sd,
               const Var& l_dg, const LossWeights& w);

/// [1,C,H,W] -> [H*W, C] (differentiable layout change for the CE kernel).
Var chw_to_rows(const Var& image);

constexpr double kCosineEps = 1e-8;

}  // namespace gpnerf
