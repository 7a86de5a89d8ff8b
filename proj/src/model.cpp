// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/model.hpp"

#include <algorithm>
#include <cmath>

namespace gpnerf {

GpnerfModel GpnerfModel::create(const RunConfig& cfg) {
  cfg.validate();
  GpnerfModel m;
  m.cfg = cfg;
  Rng rng(Rng::mix(cfg.seed, 0x9a7a));
  BackboneConfig bc;
  bc.channels = cfg.enc_channels;
  bc.d_rgb = cfg.d_rgb;
  bc.rgb_stride = cfg.rgb_stride;
  m.backbone = Backbone::create(m.params, bc, rng);

  FieldsConfig fc;
  fc.d_rgb = cfg.d_rgb;
  fc.n_heads = cfg.n_heads;
  fc.n_blocks = cfg.n_blocks;
  fc.pe_freqs = cfg.pe_freqs;
  const double max_half =
      0.5 * std::max({cfg.room_extent[0], cfg.room_extent[1], cfg.room_extent[2]});
  fc.coord_scale = 3.14159265358979323846 / max_half;
  m.fields = FieldAggregator::create(m.params, fc, rng);

  const int classes = cfg.instance_mode ? cfg.n_objects + 1 : cfg.n_classes;
  m.head = PerceptionHead::create(m.params, 4 * cfg.d_rgb, classes, rng);
  return m;
}

double GpnerfModel::base_lr(const std::string& name) const {
  if (name.rfind("backbone.", 0) == 0) return cfg.lr_extractor;
  if (name.rfind("head.", 0) == 0) return cfg.lr_head;
  return cfg.lr_transformer;  // fat.* / rat.*
}

EpipolarInputs build_epipolar_inputs(const GpnerfModel& model,
                                     const FeatureGridSet& feats,
                                     const std::vector<CameraModel>& ref_cams,
                                     const RayBatch& rays,
                                     const SampledPoints& points) {
  const int R = points.rays, M = points.samples, N = (int)ref_cams.size();
  const int64_t P = (int64_t)R * M;

  EpipolarInputs in;
  in.rays = R;
  in.samples = M;

  Tensor uv_img;
  project_points(points.positions.reshaped({(int)P, 3}), ref_cams, uv_img, in.valid);

  // Scale image-pixel projections into each grid's coordinates.
  const int s_rgb = feats.rgb_stride;
  Tensor uv_rgb({(int)P, N, 2}), uv_sem({(int)P, N, 2});
  for (int64_t i = 0; i < P * N; ++i) {
    uv_rgb[i * 2 + 0] = image_to_grid(uv_img[i * 2 + 0], s_rgb);
    uv_rgb[i * 2 + 1] = image_to_grid(uv_img[i * 2 + 1], s_rgb);
    uv_sem[i * 2 + 0] = image_to_grid(uv_img[i * 2 + 0], 4);
    uv_sem[i * 2 + 1] = image_to_grid(uv_img[i * 2 + 1], 4);
  }
  in.x_rgb = epipolar_gather(feats.rgb, uv_rgb, in.valid);
  in.x_sem = epipolar_gather(feats.sem_fused, uv_sem, in.valid);

  in.point_valid = Tensor({(int)P});
  for (int64_t p = 0; p < P; ++p) {
    bool any = false;
    for (int n = 0; n < N; ++n) any = any || in.valid[p * N + n];
    in.point_valid[p] = any ? 1.0 : 0.0;
  }

  in.rel_dirs = Var::constant(
      relative_directions(points, rays, ref_cams).reshaped({(int)P, N, 3}));

  const auto& fcfg = model.fields.config();
  in.pe_coords = positional_encoding(points.positions.reshaped({(int)P, 3}),
                                     fcfg.pe_freqs, fcfg.coord_scale);
  Tensor dirs_rep({(int)P, 3});
  for (int r = 0; r < R; ++r)
    for (int m = 0; m < M; ++m)
      for (int c = 0; c < 3; ++c)
        dirs_rep[((int64_t)r * M + m) * 3 + c] = rays.dirs[(int64_t)r * 3 + c];
  in.pe_dirs = positional_encoding(dirs_rep, fcfg.pe_freqs, 1.0);
  return in;
}

RayForward forward_rays(const GpnerfModel& model, const FeatureGridSet& feats,
                        const std::vector<CameraModel>& ref_cams,
                        const RayBatch& rays, int samples, bool stratified,
                        uint64_t seed, bool with_blocked_pass) {
  RayForward out;
  out.points = sample_points(rays, samples, stratified, seed);
  EpipolarInputs in =
      build_epipolar_inputs(model, feats, ref_cams, rays, out.points);
  for (int64_t p = 0; p < in.point_valid.numel(); ++p)
    if (in.point_valid[p] == 0.0) ++out.invalid_points;

  out.live = model.fields.run(in);
  if (with_blocked_pass) {
    // Same values, but gradients stop at the extractor boundary.
    EpipolarInputs blocked = in;
    blocked.x_rgb = stop_gradient(in.x_rgb);
    blocked.x_sem = stop_gradient(in.x_sem);
    out.blocked = model.fields.run(blocked);
  }
  return out;
}

std::vector<int> select_reference_views(const std::vector<CameraModel>& cams,
                                        const std::vector<int>& candidates,
                                        int target, int n_ref) {
  std::vector<std::pair<double, int>> order;
  for (int id : candidates) {
    if (id == target) continue;
    const Vec3 d = cams[id].center - cams[target].center;
    order.push_back({d.dot(d), id});
  }
  GPNERF_CHECK((int)order.size() >= n_ref,
               "not enough reference views: need " + std::to_string(n_ref) +
                   ", have " + std::to_string(order.size()));
  std::sort(order.begin(), order.end());
  std::vector<int> refs;
  for (int i = 0; i < n_ref; ++i) refs.push_back(order[i].second);
  return refs;
}

std::vector<double> sample_image_bilinear(const Tensor& img, double u, double v) {
  const int H = img.dim(0), W = img.dim(1), C = img.dim(2);
  const double cu = std::clamp(u, 0.0, W - 1.0), cv = std::clamp(v, 0.0, H - 1.0);
  const int x0 = std::min((int)std::floor(cu), W - 1);
  const int y0 = std::min((int)std::floor(cv), H - 1);
  const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
  const double tx = cu - x0, ty = cv - y0;
  std::vector<double> out(C);
  for (int c = 0; c < C; ++c)
    out[c] = (1 - ty) * ((1 - tx) * img.at({y0, x0, c}) + tx * img.at({y0, x1, c})) +
             ty * ((1 - tx) * img.at({y1, x0, c}) + tx * img.at({y1, x1, c}));
  return out;
}

FullViewRender render_full_view(const GpnerfModel& model, const SceneDataset& sd,
                                const std::vector<int>& ref_ids,
                                const CameraModel& target, int rgb_chunk) {
  autodiff::NoGradGuard no_grad;
  const int H = target.height, W = target.width;
  const int Hf = H / 4, Wf = W / 4;
  const int M = model.cfg.samples_per_ray;

  std::vector<Tensor> ref_images;
  std::vector<CameraModel> ref_cams;
  for (int id : ref_ids) {
    ref_images.push_back(sd.views[id].rgb);
    ref_cams.push_back(sd.views[id].camera);
  }
  const FeatureGridSet feats = model.backbone.extract(ref_images);

  FullViewRender out;
  out.rgb = Tensor({H, W, 3});

  // Full-resolution color, chunked by rows to bound the graph size.
  const int rows_per_chunk = std::max(1, rgb_chunk / W);
  for (int y0 = 0; y0 < H; y0 += rows_per_chunk) {
    const int y1 = std::min(H, y0 + rows_per_chunk);
    std::vector<std::pair<double, double>> pixels;
    pixels.reserve((size_t)(y1 - y0) * W);
    for (int y = y0; y < y1; ++y)
      for (int x = 0; x < W; ++x) pixels.push_back({(double)x, (double)y});
    const RayBatch rays = generate_rays(target, pixels, sd.t_near, sd.t_far);
    RayForward fw = forward_rays(model, feats, ref_cams, rays, M,
                                 /*stratified=*/false, 0, false);
    for (int i = 0; i < (int)pixels.size(); ++i)
      for (int c = 0; c < 3; ++c)
        out.rgb.at({y0 + i / W, i % W, c}) = fw.live.color.value()[(int64_t)i * 3 + c];
  }

  // Stride-4 semantic feature map (every cell rendered).
  std::vector<std::pair<double, double>> cell_pixels;
  std::vector<std::pair<int, int>> cells;
  for (int gy = 0; gy < Hf; ++gy)
    for (int gx = 0; gx < Wf; ++gx) {
      cells.push_back({gy, gx});
      cell_pixels.push_back(cell_to_pixel(gy, gx));
    }
  const RayBatch cell_rays = generate_rays(target, cell_pixels, sd.t_near, sd.t_far);
  RayForward fw = forward_rays(model, feats, ref_cams, cell_rays, M, false, 0, false);
  out.attn = fw.live.attn();

  const int DS = model.head.d_sem();
  Tensor sem_map({1, DS, Hf, Wf});
  for (int i = 0; i < (int)cells.size(); ++i) {
    const auto [gy, gx] = cells[i];
    for (int d = 0; d < DS; ++d)
      sem_map[((int64_t)d * Hf + gy) * Wf + gx] =
          fw.live.sem_ray.value()[(int64_t)i * DS + d];
  }
  out.sem_map = sem_map;

  MaskArray all_rendered({Hf, Wf});
  for (int64_t i = 0; i < all_rendered.numel(); ++i) all_rendered[i] = 1;
  const Var logits = model.head.predict_full(Var::constant(sem_map), all_rendered);
  out.logits = logits.value();

  const int C = model.head.n_classes();
  out.labels = LabelArray({H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      int best = 0;
      double best_v = out.logits[(int64_t)0 * H * W + (int64_t)y * W + x];
      for (int c = 1; c < C; ++c) {
        const double v = out.logits[(int64_t)c * H * W + (int64_t)y * W + x];
        if (v > best_v) {
          best_v = v;
          best = c;
        }
      }
      out.labels[(int64_t)y * W + x] = best;
    }
  return out;
}

}  // namespace gpnerf
