// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "gpnerf/checkpoint.hpp"

namespace gpnerf {

TrainState make_train_state(const RunConfig& cfg) {
  TrainState st;
  st.model = GpnerfModel::create(cfg);
  st.adam = Adam(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  return st;
}

std::vector<int> train_view_ids(const SceneDataset& sd, int holdout) {
  const int n = (int)sd.views.size();
  GPNERF_CHECK(holdout >= 0 && holdout < n, "holdout leaves no training views");
  std::vector<int> ids;
  for (int i = 0; i < n - holdout; ++i) ids.push_back(i);
  return ids;
}

std::vector<int> test_view_ids(const SceneDataset& sd, int holdout) {
  const int n = (int)sd.views.size();
  std::vector<int> ids;
  for (int i = n - holdout; i < n; ++i) ids.push_back(i);
  return ids;
}

ForwardBundle training_forward(const GpnerfModel& model, const Dataset& data,
                               int64_t step_index,
                               const TeacherMap* frozen_teacher) {
  const RunConfig& cfg = model.cfg;
  GPNERF_CHECK(!data.scenes.empty(), "empty dataset");
  if (cfg.instance_mode)
    GPNERF_CHECK(cfg.mode == "finetune", "instance mode requires finetune");
  if (cfg.mode == "finetune")
    GPNERF_CHECK(data.scenes.size() == 1, "finetune expects a single scene");

  Rng rng(Rng::mix(cfg.seed, (uint64_t)step_index * 2 + 1));
  const int scene_idx = rng.uniform_int(0, (int)data.scenes.size() - 1);
  const SceneDataset& sd = data.scenes[scene_idx];
  const auto train_ids = train_view_ids(sd, cfg.holdout_views);
  GPNERF_CHECK((int)train_ids.size() >= cfg.n_ref + 1,
               "scene has " + std::to_string(train_ids.size()) +
                   " training views; need n_ref+1 = " +
                   std::to_string(cfg.n_ref + 1));
  const int target = train_ids[rng.uniform_int(0, (int)train_ids.size() - 1)];
  const ViewRecord& tv = sd.views[target];

  std::vector<CameraModel> cams;
  for (const auto& v : sd.views) cams.push_back(v.camera);
  const auto ref_ids = select_reference_views(cams, train_ids, target, cfg.n_ref);

  std::vector<Tensor> ref_images;
  std::vector<CameraModel> ref_cams;
  for (int id : ref_ids) {
    ref_images.push_back(sd.views[id].rgb);
    ref_cams.push_back(sd.views[id].camera);
  }

  const FeatureGridSet feats = model.backbone.extract(ref_images);
  const TeacherMap teacher =
      frozen_teacher ? *frozen_teacher : model.backbone.teacher_features(tv.rgb);

  // Ray batch: a deterministic shuffle of the stride-4 cell grid of one
  // target view (the fused map needs a single view per step).
  const int Hf = tv.camera.height / 4, Wf = tv.camera.width / 4;
  std::vector<std::pair<int, int>> all_cells;
  for (int gy = 0; gy < Hf; ++gy)
    for (int gx = 0; gx < Wf; ++gx) all_cells.push_back({gy, gx});
  for (int i = (int)all_cells.size() - 1; i > 0; --i)
    std::swap(all_cells[i], all_cells[rng.uniform_int(0, i)]);
  const int R = std::min<int>(cfg.rays_per_step, (int)all_cells.size());
  std::vector<std::pair<int, int>> cells(all_cells.begin(), all_cells.begin() + R);

  std::vector<std::pair<double, double>> pixels;
  for (const auto& [gy, gx] : cells) pixels.push_back(cell_to_pixel(gy, gx));
  const RayBatch rays = generate_rays(tv.camera, pixels, sd.t_near, sd.t_far);

  const bool want_distill = cfg.loss.sem_distill > 0 || cfg.loss.depth_guided > 0;
  const bool blocked_pass = want_distill && cfg.gradient_block;
  RayForward fw = forward_rays(model, feats, ref_cams, rays, cfg.samples_per_ray,
                               cfg.stratified,
                               Rng::mix(cfg.seed, (uint64_t)step_index * 2),
                               blocked_pass);
  // Without the gradient block the distillation losses read the live pass
  // (paper ablation row 3); with it they read the extractor-detached pass.
  const FieldOutputs& distill_src = blocked_pass ? fw.blocked : fw.live;

  ForwardBundle out;
  out.scene = scene_idx;
  out.target_view = target;
  out.report.invalid_points = fw.invalid_points;

  Tensor gt_colors({R, 3});
  std::vector<double> gt_depth(R);
  for (int r = 0; r < R; ++r) {
    const auto rgb = sample_image_bilinear(tv.rgb, pixels[r].first, pixels[r].second);
    for (int c = 0; c < 3; ++c) gt_colors[(int64_t)r * 3 + c] = rgb[c];
    const int px = std::min((int)std::lround(pixels[r].first), tv.camera.width - 1);
    const int py = std::min((int)std::lround(pixels[r].second), tv.camera.height - 1);
    gt_depth[r] = tv.depth.at({py, px});
  }
  out.l_rgb = photometric_loss(fw.live.color, gt_colors);

  FusedMap fused = fuse_maps(teacher.sem_fused, fw.live.sem_ray, cells);
  out.report.duplicate_cells = fused.duplicate_warnings;
  const Var logits = model.head.decode(model.head.split_features(fused.map));

  const LabelArray& gt_labels = cfg.instance_mode ? tv.instance : tv.semantic;
  const int H = tv.camera.height, W = tv.camera.width;
  Tensor ce_weights({H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const bool rendered = fused.provenance[(int64_t)(y / 4) * Wf + (x / 4)] != 0;
      ce_weights.at({y, x}) =
          rendered ? cfg.ce_rendered_boost : (cfg.ce_support == "fused" ? 1.0 : 0.0);
    }
  out.l_sem = semantic_ce_loss(logits, gt_labels, ce_weights);

  const int DS = model.head.d_sem();
  Tensor teacher_rows({R, DS});
  for (int r = 0; r < R; ++r) {
    const auto [gy, gx] = cells[r];
    for (int d = 0; d < DS; ++d)
      teacher_rows[(int64_t)r * DS + d] =
          teacher.sem_fused[((int64_t)d * Hf + gy) * Wf + gx];
  }

  if (cfg.loss.sem_distill > 0)
    out.l_sd = semantic_distill_loss(distill_src.sem_ray, teacher_rows,
                                     &out.report.zero_norm_features);
  if (cfg.loss.depth_guided > 0)
    out.l_dg = depth_guided_distill_loss(distill_src.f_sem_points, teacher_rows,
                                         fw.points.ts, gt_depth, sd.t_near,
                                         sd.t_far, kDepthBandHalfWidth,
                                         &out.report);

  out.l_all = total_loss(out.l_rgb, out.l_sem, out.l_sd, out.l_dg, cfg.loss);

  out.report.l_rgb = out.l_rgb.value()[0];
  out.report.l_sem = out.l_sem.value()[0];
  out.report.l_sd = out.l_sd.defined() ? out.l_sd.value()[0] : 0.0;
  out.report.l_dg = out.l_dg.defined() ? out.l_dg.value()[0] : 0.0;
  out.report.l_all = out.l_all.value()[0];
  return out;
}

StepOutcome train_step(TrainState& state, const Dataset& data, int64_t step_index) {
  GpnerfModel& model = state.model;
  const RunConfig& cfg = model.cfg;

  ForwardBundle fwd = training_forward(model, data, step_index);
  StepOutcome out;
  out.report = fwd.report;
  out.scene = fwd.scene;
  out.target_view = fwd.target_view;

  if (!std::isfinite(out.report.l_all)) {
    std::ostringstream os;
    os << "non-finite loss at step " << step_index << ": l_rgb=" << out.report.l_rgb
       << " l_sem=" << out.report.l_sem << " l_sd=" << out.report.l_sd
       << " l_dg=" << out.report.l_dg
       << " (invalid_points=" << out.report.invalid_points
       << ", zero_norm=" << out.report.zero_norm_features << ")";
    throw Error(os.str());
  }

  model.params.zero_grad();
  fwd.l_all.backward();

  const double decay = std::pow(cfg.lr_decay, (double)step_index);
  out.lr_extractor = cfg.lr_extractor * decay;
  out.lr_transformer = cfg.lr_transformer * decay;
  out.lr_head = cfg.lr_head * decay;
  state.adam.step(model.params, [&model, decay](const std::string& name) {
    return model.base_lr(name) * decay;
  });
  state.step = step_index + 1;
  return out;
}

void train_loop(TrainState& state, const Dataset& data, std::ostream* csv,
                const std::string& checkpoint_path) {
  const RunConfig& cfg = state.model.cfg;
  for (int64_t s = state.step; s < cfg.steps; ++s) {
    const StepOutcome o = train_step(state, data, s);
    if (csv) {
      csv->precision(10);
      *csv << s << "," << o.lr_extractor << "," << o.report.l_rgb << ","
           << o.report.l_sem << "," << o.report.l_sd << "," << o.report.l_dg
           << "," << o.report.l_all << "\n";
    }
    const bool last = s + 1 == cfg.steps;
    if (!checkpoint_path.empty() &&
        (last || (cfg.checkpoint_every > 0 && (s + 1) % cfg.checkpoint_every == 0)))
      save_checkpoint(checkpoint_path, state.model.params, state.adam, s + 1,
                      cfg.dump());
  }
}

}  // namespace gpnerf
