// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gpnerf/model.hpp"

namespace gpnerf {

/// 10*log10(1/MSE) for images in [0,1]; +inf when MSE == 0.
double psnr(const Tensor& pred, const Tensor& gt);

/// Mean local SSIM over valid 11x11 windows (Gaussian sigma 1.5, K1=0.01,
/// K2=0.03, L=1) on the luminance channel. Throws if the image is smaller
/// than the window.
double ssim(const Tensor& pred, const Tensor& gt);

struct SegMetrics {
  double miou = 0, total_acc = 0, avg_acc = 0;
};

/// Confusion-matrix metrics. Classes absent from GT are excluded from mIoU
/// and avg_acc; background (class 0) counts unless include_background=false.
SegMetrics segmentation_metrics(const LabelArray& pred, const LabelArray& gt,
                                int n_classes, bool include_background = true);

/// Simplified mask AP at IoU 0.75: masks are 4-connected components of each
/// nonzero label, matched greedily one-to-one by descending IoU (ties toward
/// the lower gt id, then lower pred id). AP = TP / (TP + FP) for one view.
double ap75(const LabelArray& pred, const LabelArray& gt);

/// Top-3 PCA projection of per-pixel features, min-max normalized to RGB
/// ([H,W,3]). Degenerate covariance falls back to grayscale (flagged).
Tensor pca_feature_image(const Tensor& sem_map, bool* degenerate = nullptr,
                         std::vector<std::vector<double>>* components = nullptr);
void pca_feature_export(const Tensor& sem_map, const std::string& path);

struct EvalReport {
  struct PerView {
    int scene = 0, view = 0;
    double psnr = 0, ssim = 0, miou = 0, total_acc = 0, avg_acc = 0;
    std::optional<double> ap75;
  };
  std::vector<PerView> views;
  double psnr = 0, ssim = 0, miou = 0, total_acc = 0, avg_acc = 0;
  std::optional<double> ap75;
  std::vector<int64_t> gt_class_pixels;

  std::string to_json(const std::string& config_dump) const;
};

/// Renders every held-out view (references drawn from the training split)
/// and aggregates metrics as means over test views.
EvalReport evaluate_model(const GpnerfModel& model, const Dataset& data);

}  // namespace gpnerf
