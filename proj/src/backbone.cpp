// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/backbone.hpp"

#include <cmath>

namespace gpnerf {

Tensor images_to_batch(const std::vector<Tensor>& images) {
  GPNERF_CHECK(!images.empty(), "no images");
  const int H = images[0].dim(0), W = images[0].dim(1);
  const int N = (int)images.size();
  Tensor batch({N, 3, H, W});
  for (int n = 0; n < N; ++n) {
    const Tensor& img = images[n];
    GPNERF_CHECK(img.rank() == 3 && img.dim(0) == H && img.dim(1) == W &&
                     img.dim(2) == 3,
                 "image " + std::to_string(n) + " has shape " + img.shape_str());
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        for (int c = 0; c < 3; ++c) {
          const double v = img.at({y, x, c});
          GPNERF_CHECK(std::isfinite(v), "non-finite pixel in image " +
                                             std::to_string(n));
          batch.at({n, c, y, x}) = v;
        }
  }
  return batch;
}

Backbone Backbone::create(ParamStore& ps, const BackboneConfig& cfg, Rng& rng) {
  Backbone b;
  b.cfg_ = cfg;
  const auto [c1, c2, c3, c4] = cfg.channels;
  const int dl = cfg.d_rgb;  // each pyramid level carries d_sem/4 = d_rgb chans
  b.stem_ = Conv::create(ps, "backbone.stem", 3, c1, 3, 2, 1, rng);
  b.stage1_ = Conv::create(ps, "backbone.stage1", c1, c1, 3, 2, 1, rng);
  b.stage2_ = Conv::create(ps, "backbone.stage2", c1, c2, 3, 2, 1, rng);
  b.stage3_ = Conv::create(ps, "backbone.stage3", c2, c3, 3, 2, 1, rng);
  b.stage4_ = Conv::create(ps, "backbone.stage4", c3, c4, 3, 2, 1, rng);
  const std::array<int, 4> cs{c1, c2, c3, c4};
  for (int k = 0; k < 4; ++k) {
    b.lateral_[k] = Conv::create(ps, "backbone.lat" + std::to_string(k + 1),
                                 cs[k], dl, 1, 1, 0, rng);
    b.out_[k] = Conv::create(ps, "backbone.out" + std::to_string(k + 1), dl, dl,
                             3, 1, 1, rng);
  }
  b.rgb1_ = Conv::create(ps, "backbone.rgb1", 3, cfg.d_rgb, 3, 1, 1, rng);
  b.rgb2_ = Conv::create(ps, "backbone.rgb2", cfg.d_rgb, cfg.d_rgb, 3, 1, 1, rng);
  b.rgb_skip_ = Conv::create(ps, "backbone.rgb_skip", 3, cfg.d_rgb, 1, 1, 0, rng);
  // Seed the skip so the first three low-level channels pass raw color
  // through from step zero.
  {
    Tensor& w = b.rgb_skip_.w.node()->value;
    w.fill(0.0);
    for (int c = 0; c < 3; ++c) w.at({c, c, 0, 0}) = 1.0;
  }
  return b;
}

FeatureGridSet Backbone::extract(const std::vector<Tensor>& images) const {
  const int H = images[0].dim(0), W = images[0].dim(1);
  GPNERF_CHECK(H % 32 == 0 && W % 32 == 0,
               "extractor needs H, W divisible by 32, got " +
                   std::to_string(H) + "x" + std::to_string(W));
  const Var x = Var::constant(images_to_batch(images));

  // Encoder: strides 2/4/8/16/32.
  const Var s0 = relu(stem_(x));
  const Var c1 = relu(stage1_(s0));
  const Var c2 = relu(stage2_(c1));
  const Var c3 = relu(stage3_(c2));
  const Var c4 = relu(stage4_(c3));

  // Top-down FPN.
  FeatureGridSet out;
  out.d_rgb = cfg_.d_rgb;
  out.d_sem = d_sem();
  out.rgb_stride = cfg_.rgb_stride;
  Var p4 = lateral_[3](c4);
  Var p3 = add(lateral_[2](c3), upsample_nearest2(p4));
  Var p2 = add(lateral_[1](c2), upsample_nearest2(p3));
  Var p1 = add(lateral_[0](c1), upsample_nearest2(p2));
  out.pyramid[0] = out_[0](p1);
  out.pyramid[1] = out_[1](p2);
  out.pyramid[2] = out_[2](p3);
  out.pyramid[3] = out_[3](p4);

  // Fused stride-4 grid: level k upsampled and concatenated in level order,
  // so a channel-wise 4-way split recovers the pyramid.
  Var l2 = upsample_nearest2(out.pyramid[1]);
  Var l3 = upsample_nearest2(upsample_nearest2(out.pyramid[2]));
  Var l4 = upsample_nearest2(upsample_nearest2(upsample_nearest2(out.pyramid[3])));
  out.sem_fused = concat_channels({out.pyramid[0], l2, l3, l4});

  // Low-level grid for radiance aggregation.
  const Var xr = cfg_.rgb_stride > 1 ? avgpool(x, cfg_.rgb_stride) : x;
  out.rgb = add(rgb2_(relu(rgb1_(xr))), rgb_skip_(xr));
  return out;
}

TeacherMap Backbone::teacher_features(const Tensor& novel_image) const {
  autodiff::NoGradGuard no_grad;
  FeatureGridSet fs = extract({novel_image});
  return TeacherMap{fs.sem_fused.value()};
}

}  // namespace gpnerf
