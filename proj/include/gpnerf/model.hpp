// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "gpnerf/backbone.hpp"
#include "gpnerf/config.hpp"
#include "gpnerf/dataset.hpp"
#include "gpnerf/fields.hpp"
#include "gpnerf/head.hpp"

namespace gpnerf {

struct GpnerfModel {
  ParamStore params;
  Backbone backbone;
  FieldAggregator fields;
  PerceptionHead head;
  RunConfig cfg;

  static GpnerfModel create(const RunConfig& cfg);

  /// Parameter-group resolution: backbone.* -> extractor lr, fat./rat.* ->
  /// transformer lr, head.* -> head lr.
  double base_lr(const std::string& param_name) const;
  int head_classes() const { return head.n_classes(); }
};

/// Both field passes over one ray batch: the rendering pass and (optionally)
/// the distillation pass whose epipolar inputs are gradient-blocked at the
/// extractor boundary. Values of the two passes are bit-identical.
struct RayForward {
  FieldOutputs live;
  FieldOutputs blocked;  // Vars undefined when the blocked pass is off
  SampledPoints points;
  int64_t invalid_points = 0;
};

EpipolarInputs build_epipolar_inputs(const GpnerfModel& model,
                                     const FeatureGridSet& feats,
                                     const std::vector<CameraModel>& ref_cams,
                                     const RayBatch& rays,
                                     const SampledPoints& points);

RayForward forward_rays(const GpnerfModel& model, const FeatureGridSet& feats,
                        const std::vector<CameraModel>& ref_cams,
                        const RayBatch& rays, int samples, bool stratified,
                        uint64_t seed, bool with_blocked_pass);

/// Stride-4 cell (gy,gx) -> image pixel center of that cell.
inline std::pair<double, double> cell_to_pixel(int gy, int gx) {
  return {4.0 * gx + 1.5, 4.0 * gy + 1.5};
}

/// Inference-time full view render (no gradients, chunked rays).
struct FullViewRender {
  Tensor rgb;            // [H,W,3]
  Tensor sem_map;        // [1,D_sem,Hf,Wf]
  Tensor logits;         // [1,C,H,W]
  LabelArray labels;     // [H,W] argmax
  AttentionRecord attn;  // from the last semantic chunk
};

FullViewRender render_full_view(const GpnerfModel& model, const SceneDataset& sd,
                                const std::vector<int>& ref_ids,
                                const CameraModel& target, int rgb_chunk = 512);

/// Reference selection: nearest camera centers, target excluded, ties by
/// lower index. Only views in `candidates` are considered.
std::vector<int> select_reference_views(const std::vector<CameraModel>& cams,
                                        const std::vector<int>& candidates,
                                        int target, int n_ref);

/// Bilinear lookup into an [H,W,C] image at pixel coords.
std::vector<double> sample_image_bilinear(const Tensor& img, double u, double v);

}  // namespace gpnerf
