// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "gpnerf/fields.hpp"
#include "gpnerf/model.hpp"
#include "gpnerf/trainer.hpp"

using namespace gpnerf;

namespace {

FieldsConfig micro_cfg(int heads = 1, int blocks = 1) {
  FieldsConfig cfg;
  cfg.d_rgb = 8;
  cfg.n_heads = heads;
  cfg.n_blocks = blocks;
  cfg.pe_freqs = 2;
  return cfg;
}

Tensor randn(std::vector<int> shape, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal(0, 1);
  return t;
}

MaskArray all_valid(int P, int N) {
  MaskArray m({P, N});
  for (int64_t i = 0; i < m.numel(); ++i) m[i] = 1;
  return m;
}

Tensor ones(int n) { return Tensor::full({n}, 1.0); }

// Applies a stored two-layer MLP (prefix.l1/l2) to rows.
Var apply_mlp2(const ParamStore& ps, const std::string& prefix, const Var& x) {
  Var h = relu(linear(x, ps.get(prefix + ".l1.w"), ps.get(prefix + ".l1.b")));
  return linear(h, ps.get(prefix + ".l2.w"), ps.get(prefix + ".l2.b"));
}

}  // namespace

TEST_CASE("fat: single valid view selects it exactly") {
  ParamStore ps;
  Rng rng(31);
  const FieldAggregator fields = FieldAggregator::create(ps, micro_cfg(), rng);
  const int P = 5, N = 1, D = 8;
  const Var x_rgb = Var::constant(randn({P, N, D}, 1));
  const Var dirs = Var::constant(randn({P, N, 3}, 2, 0.3));
  const MaskArray valid = all_valid(P, N);
  const Var query = masked_mean_mid(x_rgb, valid);

  const auto out = fields.fat_aggregate(0, x_rgb, dirs, valid, query, ones(P));
  for (int p = 0; p < P; ++p) CHECK(out.a_fat.value()[p] == 1.0);

  // tokens == frgb(V + P) computed by hand from the stored parameters.
  const Var v = linear(x_rgb, ps.get("fat.b0.fv.w"), ps.get("fat.b0.fv.b"));
  const Var vp = reshape(add(v, out.p_pos), {P, D});
  const Var expect = apply_mlp2(ps, "fat.b0.frgb", vp);
  for (int64_t i = 0; i < expect.numel(); ++i)
    CHECK(out.tokens.value()[i] == doctest::Approx(expect.value()[i]).epsilon(1e-12));
}

TEST_CASE("fat: identical features and directions give uniform attention") {
  ParamStore ps;
  Rng rng(32);
  const FieldAggregator fields = FieldAggregator::create(ps, micro_cfg(), rng);
  const int P = 4, N = 6, D = 8;
  Tensor x({P, N, D}), dirs({P, N, 3});
  const Tensor row = randn({P, 1, D}, 3);
  const Tensor drow = randn({P, 1, 3}, 4, 0.2);
  for (int p = 0; p < P; ++p)
    for (int n = 0; n < N; ++n) {
      for (int d = 0; d < D; ++d) x.at({p, n, d}) = row[(int64_t)p * D + d];
      for (int d = 0; d < 3; ++d) dirs.at({p, n, d}) = drow[(int64_t)p * 3 + d];
    }
  const MaskArray valid = all_valid(P, N);
  const Var xv = Var::constant(x);
  const auto out = fields.fat_aggregate(0, xv, Var::constant(dirs), valid,
                                        masked_mean_mid(xv, valid), ones(P));
  for (int64_t i = 0; i < out.a_fat.numel(); ++i)
    CHECK(out.a_fat.value()[i] == doctest::Approx(1.0 / N).epsilon(1e-12));
}

TEST_CASE("fat: attention rows sum to one over valid views, masked get zero") {
  for (int heads : {1, 2}) {
    ParamStore ps;
    Rng rng(33);
    const FieldAggregator fields = FieldAggregator::create(ps, micro_cfg(heads), rng);
    const int P = 40, N = 5, D = 8;
    const Var x = Var::constant(randn({P, N, D}, 5));
    const Var dirs = Var::constant(randn({P, N, 3}, 6, 0.3));
    MaskArray valid({P, N});
    Rng mr(7);
    Tensor pv({P});
    for (int p = 0; p < P; ++p) {
      int cnt = 0;
      for (int n = 0; n < N; ++n) {
        valid[(int64_t)p * N + n] = mr.uniform01() < 0.7 ? 1 : 0;
        cnt += valid[(int64_t)p * N + n];
      }
      if (p == 11)  // force one all-invalid point
        for (int n = 0; n < N; ++n) valid[(int64_t)p * N + n] = 0;
      pv[p] = (p != 11 && cnt > 0) ? 1.0 : 0.0;
    }
    const auto out = fields.fat_aggregate(0, x, dirs, valid,
                                          masked_mean_mid(x, valid), pv);
    for (int p = 0; p < P; ++p) {
      double sum = 0;
      bool any = false;
      for (int n = 0; n < N; ++n) {
        const double a = out.a_fat.value()[(int64_t)p * N + n];
        CHECK(a >= 0.0);
        if (!valid[(int64_t)p * N + n]) CHECK(a == 0.0);
        sum += a;
        any = any || valid[(int64_t)p * N + n];
      }
      if (any) CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
      else CHECK(sum == 0.0);
    }
    // Invalid points carry exactly zero radiance and semantic features.
    const Var sem = fields.semantic_field(out.a_fat, Var::constant(randn({P, N, 32}, 8)),
                                          out.p_pos, pv);
    for (int d = 0; d < 8; ++d) CHECK(out.tokens.value()[11 * 8 + d] == 0.0);
    for (int d = 0; d < 32; ++d) CHECK(sem.value()[11 * 32 + d] == 0.0);
  }
}

TEST_CASE("semantic field: convex combination fixed point and selection") {
  ParamStore ps;
  Rng rng(34);
  const FieldAggregator fields = FieldAggregator::create(ps, micro_cfg(), rng);
  const int P = 6, N = 4, D = 8, DS = 32;

  // All views carry the same semantic feature g: output is g plus the
  // attention-weighted positional term.
  Tensor x_sem({P, N, DS});
  const Tensor g = randn({P, DS}, 9);
  for (int p = 0; p < P; ++p)
    for (int n = 0; n < N; ++n)
      for (int d = 0; d < DS; ++d) x_sem.at({p, n, d}) = g[(int64_t)p * DS + d];
  Tensor a({P, N});
  Rng ar(10);
  for (int p = 0; p < P; ++p) {
    double z = 0;
    for (int n = 0; n < N; ++n) {
      a.at({p, n}) = ar.uniform(0.1, 1.0);
      z += a.at({p, n});
    }
    for (int n = 0; n < N; ++n) a.at({p, n}) /= z;
  }
  const Var p_pos = Var::constant(randn({P, N, D}, 11, 0.5));
  const Var out = fields.semantic_field(Var::constant(a), Var::constant(x_sem),
                                        p_pos, ones(P));
  for (int p = 0; p < P; ++p)
    for (int j = 0; j < DS; ++j) {
      double pos_term = 0;
      for (int n = 0; n < N; ++n)
        pos_term += a.at({p, n}) * p_pos.value().at({p, n, j % D});
      CHECK(out.value()[(int64_t)p * DS + j] ==
            doctest::Approx(g[(int64_t)p * DS + j] + pos_term).epsilon(1e-9));
    }

  // One-hot attention selects view k's projected feature plus its term.
  const int k = 2;
  Tensor onehot({P, N});
  for (int p = 0; p < P; ++p) onehot.at({p, k}) = 1.0;
  const Var x2 = Var::constant(randn({P, N, DS}, 12));
  const Var sel = fields.semantic_field(Var::constant(onehot), x2, p_pos, ones(P));
  for (int p = 0; p < P; ++p)
    for (int j = 0; j < DS; ++j)
      CHECK(sel.value()[(int64_t)p * DS + j] ==
            doctest::Approx(x2.value().at({p, k, j}) +
                            p_pos.value().at({p, k, j % D}))
                .epsilon(1e-12));
}

TEST_CASE("semantic field equals the naive double-loop oracle") {
  ParamStore ps;
  Rng rng(35);
  const FieldAggregator fields = FieldAggregator::create(ps, micro_cfg(), rng);
  const int P = 17, N = 5, D = 8, DS = 32;
  const Tensor a = randn({P, N}, 13);
  const Tensor x_sem = randn({P, N, DS}, 14);
  const Tensor p_pos = randn({P, N, D}, 15);
  const Var out = fields.semantic_field(Var::constant(a), Var::constant(x_sem),
                                        Var::constant(p_pos), ones(P));
  for (int p = 0; p < P; ++p)
    for (int j = 0; j < DS; ++j) {
      double s = 0;  // explicit loop over views
      for (int n = 0; n < N; ++n)
        s += a.at({p, n}) * (x_sem.at({p, n, j}) + p_pos.at({p, n, j % D}));
      CHECK(std::abs(out.value()[(int64_t)p * DS + j] - s) < 1e-6);
    }
}

TEST_CASE("semantic field stays inside the envelope with zeroed positions") {
  ParamStore ps;
  Rng rng(36);
  const FieldAggregator fields = FieldAggregator::create(ps, micro_cfg(), rng);
  const int P = 9, N = 5, DS = 32;
  Tensor a({P, N});
  Rng ar(16);
  for (int p = 0; p < P; ++p) {
    double z = 0;
    for (int n = 0; n < N; ++n) {
      a.at({p, n}) = ar.uniform01();
      z += a.at({p, n});
    }
    for (int n = 0; n < N; ++n) a.at({p, n}) /= z;
  }
  const Tensor x_sem = randn({P, N, DS}, 17);
  const Var out = fields.semantic_field(Var::constant(a), Var::constant(x_sem),
                                        Var::constant(Tensor({P, N, 8})), ones(P));
  for (int p = 0; p < P; ++p)
    for (int j = 0; j < DS; ++j) {
      double lo = 1e300, hi = -1e300;
      for (int n = 0; n < N; ++n) {
        lo = std::min(lo, x_sem.at({p, n, j}));
        hi = std::max(hi, x_sem.at({p, n, j}));
      }
      const double v = out.value()[(int64_t)p * DS + j];
      CHECK(v >= lo - 1e-12);
      CHECK(v <= hi + 1e-12);
    }
}

TEST_CASE("rat: singleton softmax, row sums, head configurations") {
  for (int heads : {1, 2}) {
    ParamStore ps;
    Rng rng(37);
    const FieldAggregator fields = FieldAggregator::create(ps, micro_cfg(heads), rng);
    const int R = 3, D = 8;
    const int pe = micro_cfg().pe_dim();

    // M = 1: the only point takes all the weight.
    const auto single = fields.rat_aggregate(
        0, Var::constant(randn({R, 1, D}, 18)), Var::constant(Tensor({R, 1, pe})),
        Var::constant(Tensor({R, 1, pe})));
    for (int r = 0; r < R; ++r) CHECK(single.a_rat.value()[r] == 1.0);

    const int M = 7;
    const auto out = fields.rat_aggregate(
        0, Var::constant(randn({R, M, D}, 19)), Var::constant(Tensor({R, M, pe})),
        Var::constant(Tensor({R, M, pe})));
    CHECK(out.tokens.shape() == std::vector<int>{R, M, D});
    for (int r = 0; r < R; ++r) {
      double sum = 0;
      for (int m = 0; m < M; ++m) sum += out.a_rat.value()[(int64_t)r * M + m];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("rat is permutation-equivariant with positional encodings zeroed") {
  ParamStore ps;
  Rng rng(38);
  const FieldAggregator fields = FieldAggregator::create(ps, micro_cfg(), rng);
  const int R = 2, M = 6, D = 8;
  const int pe = micro_cfg().pe_dim();
  const Tensor tokens = randn({R, M, D}, 20);
  const Tensor zero_pe({R, M, pe});

  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  Tensor permuted({R, M, D});
  for (int r = 0; r < R; ++r)
    for (int m = 0; m < M; ++m)
      for (int d = 0; d < D; ++d)
        permuted.at({r, m, d}) = tokens.at({r, perm[m], d});

  const auto base = fields.rat_aggregate(0, Var::constant(tokens),
                                         Var::constant(zero_pe),
                                         Var::constant(zero_pe));
  const auto shuffled = fields.rat_aggregate(0, Var::constant(permuted),
                                             Var::constant(zero_pe),
                                             Var::constant(zero_pe));
  for (int r = 0; r < R; ++r)
    for (int m = 0; m < M; ++m) {
      CHECK(shuffled.a_rat.value()[(int64_t)r * M + m] ==
            doctest::Approx(base.a_rat.value()[(int64_t)r * M + perm[m]])
                .epsilon(1e-12));
      for (int d = 0; d < D; ++d)
        CHECK(shuffled.tokens.value().at({r, m, d}) ==
              doctest::Approx(base.tokens.value().at({r, perm[m], d}))
                  .epsilon(1e-12));
    }
}

TEST_CASE("render_color squashes into the unit cube deterministically") {
  ParamStore ps;
  Rng rng(39);
  const FieldAggregator fields = FieldAggregator::create(ps, micro_cfg(), rng);
  const Var tokens = Var::constant(randn({4, 5, 8}, 21, 3.0));
  const Var c1 = fields.render_color(tokens);
  const Var c2 = fields.render_color(tokens);
  CHECK(c1.shape() == std::vector<int>{4, 3});
  for (int64_t i = 0; i < c1.numel(); ++i) {
    CHECK(c1.value()[i] > 0.0);
    CHECK(c1.value()[i] < 1.0);
    CHECK(c1.value()[i] == c2.value()[i]);
  }
}

TEST_CASE("render_semantic: selection, convex combination, loop oracle") {
  ParamStore ps;
  Rng rng(40);
  const FieldAggregator fields = FieldAggregator::create(ps, micro_cfg(), rng);
  const int R = 5, M = 6, DS = 32;
  const Tensor f_sem = randn({R, M, DS}, 22);

  // One-hot weights on point j: the pre-MLP value is f_sem_j, so the output
  // must equal the MLP applied to f_sem_j directly.
  const int j = 4;
  Tensor onehot({R, M});
  for (int r = 0; r < R; ++r) onehot.at({r, j}) = 1.0;
  const Var sel = fields.render_semantic(Var::constant(onehot), Var::constant(f_sem));
  Tensor fj({R, DS});
  for (int r = 0; r < R; ++r)
    for (int d = 0; d < DS; ++d) fj[(int64_t)r * DS + d] = f_sem.at({r, j, d});
  const Var direct = apply_mlp2(ps, "rat.sem", Var::constant(fj));
  for (int64_t i = 0; i < sel.numel(); ++i)
    CHECK(sel.value()[i] == doctest::Approx(direct.value()[i]).epsilon(1e-12));

  // Identical per-point features: the weighted sum is a fixed point.
  Tensor g = randn({R, DS}, 23);
  Tensor same({R, M, DS});
  for (int r = 0; r < R; ++r)
    for (int m = 0; m < M; ++m)
      for (int d = 0; d < DS; ++d) same.at({r, m, d}) = g[(int64_t)r * DS + d];
  Tensor w({R, M});
  Rng wr(24);
  for (int r = 0; r < R; ++r) {
    double z = 0;
    for (int m = 0; m < M; ++m) {
      w.at({r, m}) = wr.uniform01() + 0.05;
      z += w.at({r, m});
    }
    for (int m = 0; m < M; ++m) w.at({r, m}) /= z;
  }
  const Var conv = fields.render_semantic(Var::constant(w), Var::constant(same));
  const Var gmlp = apply_mlp2(ps, "rat.sem", Var::constant(g));
  for (int64_t i = 0; i < conv.numel(); ++i)
    CHECK(conv.value()[i] == doctest::Approx(gmlp.value()[i]).epsilon(1e-9));

  // Naive loop oracle for the weighted reduction feeding the MLP.
  const Var out = fields.render_semantic(Var::constant(w), Var::constant(f_sem));
  Tensor reduced({R, DS});
  for (int r = 0; r < R; ++r)
    for (int d = 0; d < DS; ++d) {
      double s = 0;
      for (int m = 0; m < M; ++m) s += w.at({r, m}) * f_sem.at({r, m, d});
      reduced[(int64_t)r * DS + d] = s;
    }
  const Var oracle = apply_mlp2(ps, "rat.sem", Var::constant(reduced));
  for (int64_t i = 0; i < out.numel(); ++i)
    CHECK(std::abs(out.value()[i] - oracle.value()[i]) < 1e-6);
}

namespace {

RunConfig micro_run_config() {
  RunConfig cfg;
  cfg.room_extent = {4.0, 4.0, 3.0};
  cfg.n_objects = 2;
  cfg.n_classes = 3;
  cfg.image_h = cfg.image_w = 32;
  cfg.scenes = 1;
  cfg.views = 6;
  cfg.enc_channels = {4, 4, 8, 8};
  cfg.d_rgb = 8;
  cfg.rgb_stride = 2;
  cfg.steps = 1;
  cfg.rays_per_step = 4;
  cfg.samples_per_ray = 4;
  cfg.n_ref = 3;
  cfg.holdout_views = 1;
  cfg.stratified = false;
  cfg.seed = 19;
  return cfg;
}

struct MicroWorld {
  Dataset data;
  GpnerfModel model;
  FeatureGridSet feats;
  std::vector<CameraModel> ref_cams;
  RayBatch rays;
};

MicroWorld make_micro_world(const std::vector<std::pair<double, double>>& pixels) {
  const RunConfig cfg = micro_run_config();
  SceneConfig sc;
  sc.room_extent = cfg.room_extent;
  sc.n_objects = cfg.n_objects;
  sc.class_palette = SceneConfig::default_palette(cfg.n_classes);
  sc.image_h = cfg.image_h;
  sc.image_w = cfg.image_w;
  MicroWorld w{make_dataset(sc, 1, cfg.views, cfg.seed), GpnerfModel::create(cfg), {}, {}, {}};
  const SceneDataset& sd = w.data.scenes[0];
  std::vector<Tensor> imgs;
  for (int i = 0; i < 3; ++i) {
    imgs.push_back(sd.views[i].rgb);
    w.ref_cams.push_back(sd.views[i].camera);
  }
  w.feats = w.model.backbone.extract(imgs);
  w.rays = generate_rays(sd.views[4].camera, pixels, sd.t_near, sd.t_far);
  return w;
}

}  // namespace

TEST_CASE("render_rays composition: shapes, determinism, batch independence") {
  MicroWorld w = make_micro_world({{9.5, 13.5}, {21.5, 5.5}, {13.5, 25.5}, {5.5, 9.5}});
  const int R = 4, M = 4, N = 3, D = 8, DS = 32;
  RayForward fw = forward_rays(w.model, w.feats, w.ref_cams, w.rays, M, false, 0, true);

  CHECK(fw.live.color.shape() == std::vector<int>{R, 3});
  CHECK(fw.live.sem_ray.shape() == std::vector<int>{R, DS});
  CHECK(fw.live.a_fat.shape() == std::vector<int>{R * M, N});
  CHECK(fw.live.a_rat.shape() == std::vector<int>{R, M});
  CHECK(fw.live.f_sem_points.shape() == std::vector<int>{R * M, DS});
  CHECK(fw.live.f_rgb_points.shape() == std::vector<int>{R * M, D});

  // Determinism (same seed).
  RayForward fw2 = forward_rays(w.model, w.feats, w.ref_cams, w.rays, M, false, 0, false);
  for (int64_t i = 0; i < fw.live.color.numel(); ++i)
    CHECK(fw.live.color.value()[i] == fw2.live.color.value()[i]);

  // Shared attention: the distillation pass reproduces the exported weights
  // and features bit-exactly.
  for (int64_t i = 0; i < fw.live.a_fat.numel(); ++i)
    CHECK(fw.blocked.a_fat.value()[i] == fw.live.a_fat.value()[i]);
  for (int64_t i = 0; i < fw.live.sem_ray.numel(); ++i)
    CHECK(fw.blocked.sem_ray.value()[i] == fw.live.sem_ray.value()[i]);

  // Subsetting rays reproduces per-ray outputs exactly.
  MicroWorld w1 = make_micro_world({{21.5, 5.5}});
  RayForward sub = forward_rays(w1.model, w1.feats, w1.ref_cams, w1.rays, M, false, 0, false);
  for (int c = 0; c < 3; ++c)
    CHECK(sub.live.color.value()[c] == fw.live.color.value()[3 + c]);
  for (int d = 0; d < DS; ++d)
    CHECK(sub.live.sem_ray.value()[d] == fw.live.sem_ray.value()[(int64_t)DS + d]);
}

TEST_CASE("deeper stacks and multi-head configs keep the contracts") {
  ParamStore ps;
  Rng rng(41);
  const FieldAggregator fields = FieldAggregator::create(ps, micro_cfg(2, 2), rng);
  const int R = 2, M = 4, N = 3, D = 8, P = R * M;
  EpipolarInputs in;
  in.rays = R;
  in.samples = M;
  in.x_rgb = Var::constant(randn({P, N, D}, 50));
  in.x_sem = Var::constant(randn({P, N, 4 * D}, 51));
  in.rel_dirs = Var::constant(randn({P, N, 3}, 52, 0.3));
  in.valid = all_valid(P, N);
  in.point_valid = ones(P);
  in.pe_coords = Tensor({P, micro_cfg().pe_dim()});
  in.pe_dirs = Tensor({P, micro_cfg().pe_dim()});
  const FieldOutputs out = fields.run(in);
  CHECK(out.color.shape() == std::vector<int>{R, 3});
  for (int p = 0; p < P; ++p) {
    double sum = 0;
    for (int n = 0; n < N; ++n) sum += out.a_fat.value()[(int64_t)p * N + n];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
  for (int r = 0; r < R; ++r) {
    double sum = 0;
    for (int m = 0; m < M; ++m) sum += out.a_rat.value()[(int64_t)r * M + m];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}
