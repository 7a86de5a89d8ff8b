// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>

#include "gpnerf/trainer.hpp"

namespace gpnerf {

namespace {

constexpr double kAbsFloor = 1e-5;  // FD noise floor for a loss of magnitude ~1e3

double rel_err(double fd, double ad) {
  const double scale = std::max({std::abs(fd), std::abs(ad), kAbsFloor});
  return std::abs(fd - ad) / scale;
}

RunConfig micro_config() {
  RunConfig cfg;
  cfg.room_extent = {4.0, 4.0, 3.0};
  cfg.n_objects = 2;
  cfg.n_classes = 3;
  cfg.image_h = cfg.image_w = 32;  // smallest size the 4-level pyramid admits
  cfg.scenes = 1;
  cfg.views = 6;
  cfg.enc_channels = {4, 4, 8, 8};
  cfg.d_rgb = 8;
  cfg.rgb_stride = 2;
  cfg.steps = 1;
  cfg.rays_per_step = 2;   // R = 2
  cfg.samples_per_ray = 4; // M = 4
  cfg.n_ref = 3;           // N = 3
  cfg.holdout_views = 1;
  cfg.stratified = false;
  cfg.gradient_block = false;  // FD must see every path
  cfg.loss = {1.0, 1.0, 0.5, 0.5};
  cfg.seed = 11;
  return cfg;
}

// ---- per-op jacobian probes -------------------------------------------------

struct OpProbe {
  std::string name;
  std::function<Var(const Var&)> fn;
  std::vector<int> shape;
};

double op_probe_max_err(const OpProbe& probe, uint64_t seed) {
  Rng rng(seed);
  Tensor x0(probe.shape);
  for (int64_t i = 0; i < x0.numel(); ++i) x0[i] = rng.normal(0, 1.0);
  Tensor w;  // random weighting makes the scalar sensitive to every output
  auto scalar = [&](const Var& x) {
    Var y = probe.fn(x);
    if (!w.defined()) {
      w = Tensor(y.value().shape());
      Rng wr(seed ^ 0x77);
      for (int64_t i = 0; i < w.numel(); ++i) w[i] = wr.normal(0, 1.0);
    }
    return sum_all(mul_const(y, w));
  };

  Var x = Var::param(x0.clone());
  Var loss = scalar(x);
  loss.backward();
  const Tensor ad = x.grad().clone();

  double worst = 0.0;
  const int64_t n = x0.numel();
  const int64_t step = std::max<int64_t>(1, n / 6);
  for (int64_t i = 0; i < n; i += step) {
    const double eps = 1e-6;
    Tensor xp = x0.clone(), xm = x0.clone();
    xp[i] += eps;
    xm[i] -= eps;
    const double fp = scalar(Var::constant(xp)).value()[0];
    const double fm = scalar(Var::constant(xm)).value()[0];
    worst = std::max(worst, rel_err((fp - fm) / (2 * eps), ad[i]));
  }
  return worst;
}

std::vector<OpProbe> op_probes(Rng& rng) {
  std::vector<OpProbe> probes;
  auto param = [&rng](std::vector<int> shape) {
    Tensor t(shape);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0, 0.7);
    return Var::param(t);
  };

  probes.push_back({"add", [p = param({3, 5})](const Var& x) { return add(x, p); }, {3, 5}});
  probes.push_back({"sub", [p = param({3, 5})](const Var& x) { return sub(p, x); }, {3, 5}});
  probes.push_back({"mul", [p = param({3, 5})](const Var& x) { return mul(x, p); }, {3, 5}});
  probes.push_back({"relu", [](const Var& x) { return relu(x); }, {4, 7}});
  probes.push_back({"sigmoid", [](const Var& x) { return sigmoid(x); }, {4, 7}});
  probes.push_back({"affine", [](const Var& x) { return affine(x, -1.7, 0.4); }, {9}});
  probes.push_back({"linear",
                    [w = param({6, 4}), b = param({4})](const Var& x) {
                      return linear(x, w, b);
                    },
                    {5, 6}});
  probes.push_back({"bmm_nt",
                    [k = param({2, 5, 4})](const Var& x) { return bmm_nt(x, k, 0.5); },
                    {2, 3, 4}});
  probes.push_back({"bmm_nn",
                    [v = param({2, 5, 4})](const Var& x) { return bmm_nn(x, v); },
                    {2, 3, 5}});
  probes.push_back({"softmax",
                    [](const Var& x) { return softmax_masked(x, MaskArray()); },
                    {6, 5}});
  {
    MaskArray mask({6, 5});
    Rng mr(3);
    for (int64_t i = 0; i < mask.numel(); ++i) mask[i] = mr.uniform01() < 0.7 ? 1 : 0;
    for (int r = 0; r < 6; ++r) mask[r * 5 + (r % 5)] = 1;  // keep rows nonempty
    probes.push_back({"softmax_masked",
                      [mask](const Var& x) { return softmax_masked(x, mask); },
                      {6, 5}});
  }
  probes.push_back({"mean_mid", [](const Var& x) { return mean_mid(x); }, {3, 4, 5}});
  probes.push_back({"weighted_sum_mid",
                    [w = param({4, 3})](const Var& x) { return weighted_sum_mid(w, x); },
                    {4, 3, 6}});
  {
    MaskArray valid({4, 3});
    for (int64_t i = 0; i < valid.numel(); ++i) valid[i] = i % 4 != 1;
    probes.push_back({"masked_mean_mid",
                      [valid](const Var& x) { return masked_mean_mid(x, valid); },
                      {4, 3, 6}});
  }
  probes.push_back({"add_bcast_mid",
                    [q = param({4, 6})](const Var& x) { return add_bcast_mid(x, q, -1.0); },
                    {4, 3, 6}});
  probes.push_back({"concat_slice_tile",
                    [](const Var& x) {
                      Var c = concat_lastdim({x, affine(x, 0.5, 0.0)});
                      return tile_lastdim(slice_lastdim(c, 2, 7), 2);
                    },
                    {3, 6}});
  probes.push_back({"conv2d",
                    [w = param({3, 2, 3, 3}), b = param({3})](const Var& x) {
                      return conv2d(x, w, b, 2, 1);
                    },
                    {2, 2, 8, 8}});
  probes.push_back({"conv_transpose2x2",
                    [w = param({2, 3, 2, 2}), b = param({3})](const Var& x) {
                      return conv_transpose2x2(x, w, b);
                    },
                    {2, 2, 5, 5}});
  probes.push_back({"avgpool", [](const Var& x) { return avgpool(x, 2); }, {1, 2, 6, 6}});
  probes.push_back({"upsample_nearest2",
                    [](const Var& x) { return upsample_nearest2(x); },
                    {1, 2, 4, 4}});
  probes.push_back({"upsample_bilinear",
                    [](const Var& x) { return upsample_bilinear(x, 4); },
                    {1, 2, 4, 4}});
  {
    const int P = 7, N = 3, C = 2, Hf = 5, Wf = 5;
    Tensor uv({P, N, 2});
    MaskArray valid({P, N});
    Rng gr(17);
    for (int64_t i = 0; i < (int64_t)P * N; ++i) {
      uv[i * 2 + 0] = gr.uniform(-0.4, Wf - 0.6);
      uv[i * 2 + 1] = gr.uniform(-0.4, Hf - 0.6);
      valid[i] = gr.uniform01() < 0.85 ? 1 : 0;
    }
    probes.push_back({"epipolar_gather",
                      [uv, valid](const Var& x) { return epipolar_gather(x, uv, valid); },
                      {N, C, Hf, Wf}});
  }
  {
    LabelArray labels({6});
    Tensor w({6});
    Rng lr(5);
    for (int i = 0; i < 6; ++i) {
      labels[i] = lr.uniform_int(0, 3);
      w[i] = lr.uniform(0.5, 2.0);
    }
    probes.push_back({"cross_entropy",
                      [labels, w](const Var& x) { return cross_entropy(x, labels, w); },
                      {6, 4}});
  }
  probes.push_back({"cosine_rows",
                    [b = param({5, 6})](const Var& x) {
                      return cosine_rows(x, b, 1e-8);
                    },
                    {5, 6}});
  probes.push_back({"fuse_maps",
                    [](const Var& x) {
                      Tensor teacher({1, 4, 2, 2});
                      for (int64_t i = 0; i < teacher.numel(); ++i) teacher[i] = 0.3 * (double)i;
                      FusedMap f = fuse_maps(teacher, x, {{0, 1}, {1, 0}, {0, 1}});
                      return f.map;
                    },
                    {3, 4}});
  probes.push_back({"chw_to_rows", [](const Var& x) { return chw_to_rows(x); }, {1, 3, 4, 5}});
  return probes;
}

}  // namespace

GradCheckResult run_gradcheck(std::ostream& log, double rel_tol) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckResult result;
  auto record = [&](const std::string& name, double err) {
    const bool ok = err <= rel_tol;
    result.items.push_back({name, err, ok});
    log << (ok ? "  ok   " : "  FAIL ") << name << "  max_rel_err=" << err << "\n";
  };

  log << "[gradcheck] per-op jacobian probes\n";
  Rng rng(29);
  for (const auto& probe : op_probes(rng))
    record("op." + probe.name, op_probe_max_err(probe, 1234));

  // Full training loss on a micro world, FD against every parameter tensor.
  log << "[gradcheck] end-to-end parameter checks (micro config)\n";
  const RunConfig cfg = micro_config();
  SceneConfig sc;
  sc.room_extent = cfg.room_extent;
  sc.n_objects = cfg.n_objects;
  sc.class_palette = SceneConfig::default_palette(cfg.n_classes);
  sc.image_h = cfg.image_h;
  sc.image_w = cfg.image_w;
  const Dataset data = make_dataset(sc, cfg.scenes, cfg.views, cfg.seed);

  GpnerfModel model = GpnerfModel::create(cfg);
  // Freeze the teacher at the unperturbed parameters: the teacher is
  // constant by contract, so FD has to differentiate the same function the
  // tape does.
  TeacherMap teacher;
  {
    const ForwardBundle probe = training_forward(model, data, 0);
    teacher = model.backbone.teacher_features(
        data.scenes[probe.scene].views[probe.target_view].rgb);
  }
  auto loss_value = [&]() {
    return training_forward(model, data, 0, &teacher).l_all.value()[0];
  };

  model.params.zero_grad();
  {
    ForwardBundle fwd = training_forward(model, data, 0, &teacher);
    fwd.l_all.backward();
  }
  Rng pick(71);
  for (const auto& [name, p] : model.params.items()) {
    Tensor& value = p.node()->value;
    const Tensor grad =
        p.node()->grad.defined() ? p.node()->grad : Tensor::zeros(value.shape());
    double worst = 0.0;
    const int probes = (int)std::min<int64_t>(3, value.numel());
    for (int k = 0; k < probes; ++k) {
      const int64_t i = (int64_t)(pick.next_u64() % (uint64_t)value.numel());
      // The loss is a large sum, so FD needs a wider eps against roundoff;
      // double precision keeps the truncation error far below the tolerance.
      const double eps = std::max(1e-4, 1e-4 * std::abs(value[i]));
      const double orig = value[i];
      value[i] = orig + eps;
      const double fp = loss_value();
      value[i] = orig - eps;
      const double fm = loss_value();
      value[i] = orig;
      worst = std::max(worst, rel_err((fp - fm) / (2 * eps), grad[i]));
    }
    record("param." + name, worst);
  }

  // Gradient block: with the block on, the distillation losses reach the
  // transformers but not the extractor.
  log << "[gradcheck] gradient-block contract\n";
  {
    RunConfig bcfg = cfg;
    bcfg.gradient_block = true;
    GpnerfModel bmodel = GpnerfModel::create(bcfg);
    bmodel.params.zero_grad();
    ForwardBundle fwd = training_forward(bmodel, data, 0);
    const Var distill = add(fwd.l_sd, fwd.l_dg);
    distill.backward();
    double extractor_grad = 0.0, transformer_grad = 0.0;
    for (const auto& [name, p] : bmodel.params.items()) {
      if (!p.node()->grad.defined()) continue;
      double g = 0;
      for (int64_t i = 0; i < p.node()->grad.numel(); ++i)
        g = std::max(g, std::abs(p.node()->grad[i]));
      if (name.rfind("backbone.", 0) == 0) extractor_grad = std::max(extractor_grad, g);
      if (name.rfind("fat.", 0) == 0 || name.rfind("rat.", 0) == 0)
        transformer_grad = std::max(transformer_grad, g);
    }
    record("block.extractor_grad_exactly_zero", extractor_grad == 0.0 ? 0.0 : 1.0);
    record("block.transformer_grad_nonzero", transformer_grad > 0.0 ? 0.0 : 1.0);
  }

  result.all_pass = true;
  for (const auto& item : result.items) result.all_pass = result.all_pass && item.pass;
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log << "[gradcheck] " << (result.all_pass ? "PASS" : "FAIL") << " ("
      << result.items.size() << " checks, " << result.seconds << "s)\n";
  return result;
}

}  // namespace gpnerf
