// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/losses.hpp"

#include <cmath>

#include "gpnerf/geometry.hpp"

namespace gpnerf {

void LossWeights::validate() const {
  GPNERF_CHECK(rgb >= 0 && sem >= 0 && sem_distill >= 0 && depth_guided >= 0,
               "loss weights must be nonnegative");
  GPNERF_CHECK(std::isfinite(rgb + sem + sem_distill + depth_guided),
               "loss weights must be finite");
}

Var photometric_loss(const Var& pred, const Tensor& gt) {
  GPNERF_CHECK(pred.value().same_shape(gt), "photometric shape mismatch " +
                                                pred.value().shape_str() +
                                                " vs " + gt.shape_str());
  const Var d = sub(pred, Var::constant(gt));
  return sum_all(mul(d, d));
}

Var chw_to_rows(const Var& image) {
  GPNERF_CHECK(image.value().rank() == 4 && image.shape()[0] == 1,
               "chw_to_rows expects [1,C,H,W]");
  const int C = image.shape()[1];
  const int64_t HW = (int64_t)image.shape()[2] * image.shape()[3];
  Tensor y({(int)HW, C});
  const Tensor& v = image.value();
  for (int64_t p = 0; p < HW; ++p)
    for (int c = 0; c < C; ++c) y[p * C + c] = v[(int64_t)c * HW + p];
  return Var::make("chw_to_rows", std::move(y), {image}, [C, HW](autodiff::Node& nd) {
    auto& parent = *nd.parents[0];
    if (!parent.requires_grad) return;
    parent.ensure_grad();
    for (int64_t p = 0; p < HW; ++p)
      for (int c = 0; c < C; ++c)
        parent.grad[(int64_t)c * HW + p] += nd.grad[p * C + c];
  });
}

Var semantic_ce_loss(const Var& logits, const LabelArray& labels,
                     const Tensor& pixel_weights) {
  const int64_t HW = (int64_t)logits.shape()[2] * logits.shape()[3];
  GPNERF_CHECK(labels.numel() == HW, "label map size mismatch");
  if (pixel_weights.defined())
    GPNERF_CHECK(pixel_weights.numel() == HW, "pixel weight size mismatch");
  Tensor w = pixel_weights.defined()
                 ? pixel_weights.reshaped({(int)HW})
                 : Tensor();
  LabelArray flat = LabelArray::from(
      {(int)HW}, std::vector<int32_t>(labels.data(), labels.data() + HW));
  return cross_entropy(chw_to_rows(logits), flat, w);
}

Var semantic_distill_loss(const Var& sem_rendered, const Tensor& teacher_rows,
                          int64_t* zero_norm_warnings) {
  GPNERF_CHECK(sem_rendered.value().same_shape(teacher_rows),
               "distill shape mismatch");
  const int64_t R = sem_rendered.shape()[0];
  const int D = sem_rendered.shape()[1];
  if (zero_norm_warnings) {
    for (int64_t r = 0; r < R; ++r) {
      double na = 0, nb = 0;
      for (int d = 0; d < D; ++d) {
        na += sem_rendered.value()[r * D + d] * sem_rendered.value()[r * D + d];
        nb += teacher_rows[r * D + d] * teacher_rows[r * D + d];
      }
      if (na < 1e-24 || nb < 1e-24) ++(*zero_norm_warnings);
    }
  }
  const Var cos = cosine_rows(sem_rendered, Var::constant(teacher_rows), kCosineEps);
  return sum_all(affine(cos, -1.0, 1.0));
}

Var depth_guided_distill_loss(const Var& f_sem_points, const Tensor& teacher_rows,
                              const Tensor& ts, const std::vector<double>& gt_depth,
                              double t_near, double t_far, int n_p,
                              LossReport* report) {
  const int R = ts.dim(0), M = ts.dim(1);
  const int D = f_sem_points.shape()[1];
  GPNERF_CHECK(f_sem_points.shape()[0] == R * M, "per-point features mismatch");
  GPNERF_CHECK((int)gt_depth.size() == R, "one gt depth per ray");
  GPNERF_CHECK(teacher_rows.dim(0) == R && teacher_rows.dim(1) == D,
               "teacher rows mismatch");

  // Teacher feature of the ray repeated for each of its sample points.
  Tensor teacher_rep({R * M, D});
  Tensor near_mask({R * M}), far_mask({R * M});
  for (int r = 0; r < R; ++r) {
    const bool missing = !std::isfinite(gt_depth[r]);
    if (missing && report) ++report->missing_depth_rays;
    int i_d = 0;
    if (!missing)
      i_d = depth_to_sample_index(ts.data() + (int64_t)r * M, M, gt_depth[r],
                                  t_near, t_far,
                                  report ? &report->clamped_depth_rays : nullptr);
    for (int m = 0; m < M; ++m) {
      for (int d = 0; d < D; ++d)
        teacher_rep[((int64_t)r * M + m) * D + d] = teacher_rows[(int64_t)r * D + d];
      if (missing) continue;
      const int band = std::abs(m - i_d);
      if (band < n_p) near_mask[(int64_t)r * M + m] = 1.0;
      if (band > n_p) far_mask[(int64_t)r * M + m] = 1.0;
      // band == n_p contributes nothing: the two cases are strict.
    }
  }
  const Var cos = cosine_rows(f_sem_points, Var::constant(teacher_rep), kCosineEps);
  const Var near_term = mul_const(affine(cos, -1.0, 1.0), near_mask);
  const Var far_term = mul_const(relu(cos), far_mask);
  return sum_all(add(near_term, far_term));
}

Var total_loss(const Var& l_rgb, const Var& l_sem, const Var& l_sd,
               const Var& l_dg, const LossWeights& w) {
  w.validate();
  Var total = Var::constant(Tensor::scalar(0.0));
  auto accumulate = [&total](const Var& term, double alpha) {
    if (term.defined() && alpha != 0.0) total = add(total, affine(term, alpha, 0.0));
  };
  accumulate(l_rgb, w.rgb);
  accumulate(l_sem, w.sem);
  accumulate(l_sd, w.sem_distill);
  accumulate(l_dg, w.depth_guided);
  return total;
}

}  // namespace gpnerf
