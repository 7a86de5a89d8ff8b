// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/nn.hpp"

#include <cmath>

namespace gpnerf {

Tensor init_normal(std::vector<int> shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

Tensor init_he(std::vector<int> shape, int fan_in, Rng& rng) {
  return init_normal(std::move(shape), std::sqrt(2.0 / fan_in), rng);
}

Tensor init_xavier(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  return init_normal(std::move(shape), std::sqrt(2.0 / (fan_in + fan_out)), rng);
}

namespace {
// Small uniform bias init (the usual 1/sqrt(fan_in) bound). Zero biases plus
// flat synthetic images would park whole regions exactly on the relu kink.
Tensor init_bias(int out, int fan_in, Rng& rng) {
  Tensor b({out});
  const double bound = 1.0 / std::sqrt((double)fan_in);
  for (int i = 0; i < out; ++i) b[i] = rng.uniform(-bound, bound);
  return b;
}
}  // namespace

Linear Linear::create(ParamStore& ps, const std::string& prefix, int in,
                      int out, Rng& rng, bool bias) {
  Linear l;
  l.w = ps.add(prefix + ".w", init_xavier({in, out}, in, out, rng));
  if (bias) l.b = ps.add(prefix + ".b", init_bias(out, in, rng));
  return l;
}

Mlp2 Mlp2::create(ParamStore& ps, const std::string& prefix, int in, int hidden,
                  int out, Rng& rng) {
  Mlp2 m;
  m.l1 = Linear::create(ps, prefix + ".l1", in, hidden, rng);
  m.l2 = Linear::create(ps, prefix + ".l2", hidden, out, rng);
  return m;
}

Conv Conv::create(ParamStore& ps, const std::string& prefix, int in, int out,
                  int k, int stride, int pad, Rng& rng) {
  Conv c;
  c.stride = stride;
  c.pad = pad;
  c.w = ps.add(prefix + ".w", init_he({out, in, k, k}, in * k * k, rng));
  c.b = ps.add(prefix + ".b", init_bias(out, in * k * k, rng));
  return c;
}

UpConv2 UpConv2::create(ParamStore& ps, const std::string& prefix, int in,
                        int out, Rng& rng) {
  UpConv2 u;
  u.w = ps.add(prefix + ".w", init_he({in, out, 2, 2}, in * 4, rng));
  u.b = ps.add(prefix + ".b", init_bias(out, in * 4, rng));
  return u;
}

void Adam::step(ParamStore& ps,
                const std::function<double(const std::string&)>& lr_of) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, (double)t_);
  const double bc2 = 1.0 - std::pow(beta2_, (double)t_);
  for (auto& [name, p] : ps.items()) {
    auto& value = p.node()->value;
    auto& grad = p.node()->grad;
    if (!grad.defined()) continue;
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      m_[name] = Tensor::zeros(value.shape());
      v_[name] = Tensor::zeros(value.shape());
      mit = m_.find(name);
    }
    Tensor& m = mit->second;
    Tensor& v = v_[name];
    const double lr = lr_of(name);
    for (int64_t i = 0; i < value.numel(); ++i) {
      const double g = grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace gpnerf
