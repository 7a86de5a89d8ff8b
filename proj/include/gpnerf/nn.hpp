// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gpnerf/autodiff.hpp"
#include "gpnerf/rng.hpp"

namespace gpnerf {

/// Named parameter registry. Insertion order is the canonical order used by
/// the optimizer and the checkpoint format.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init) {
    GPNERF_CHECK(index_.find(name) == index_.end(), "duplicate param " + name);
    Var v = Var::param(std::move(init));
    index_[name] = items_.size();
    items_.push_back({name, v});
    return v;
  }

  Var get(const std::string& name) const {
    auto it = index_.find(name);
    GPNERF_CHECK(it != index_.end(), "unknown param " + name);
    return items_[it->second].second;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<std::pair<std::string, Var>>& items() const { return items_; }

  void zero_grad() {
    for (auto& [name, v] : items_) v.zero_grad();
  }

  int64_t scalar_count() const {
    int64_t n = 0;
    for (const auto& [name, v] : items_) n += v.numel();
    return n;
  }

 private:
  std::vector<std::pair<std::string, Var>> items_;
  std::unordered_map<std::string, size_t> index_;
};

// ---- initializers ----
Tensor init_normal(std::vector<int> shape, double stddev, Rng& rng);
Tensor init_he(std::vector<int> shape, int fan_in, Rng& rng);
Tensor init_xavier(std::vector<int> shape, int fan_in, int fan_out, Rng& rng);

// ---- layer helpers ----

struct Linear {
  Var w, b;
  Var operator()(const Var& x) const { return linear(x, w, b); }
  static Linear create(ParamStore& ps, const std::string& prefix, int in,
                       int out, Rng& rng, bool bias = true);
};

/// linear -> relu -> linear
struct Mlp2 {
  Linear l1, l2;
  Var operator()(const Var& x) const { return l2(relu(l1(x))); }
  static Mlp2 create(ParamStore& ps, const std::string& prefix, int in,
                     int hidden, int out, Rng& rng);
};

struct Conv {
  Var w, b;
  int stride = 1, pad = 1;
  Var operator()(const Var& x) const { return conv2d(x, w, b, stride, pad); }
  static Conv create(ParamStore& ps, const std::string& prefix, int in,
                     int out, int k, int stride, int pad, Rng& rng);
};

struct UpConv2 {
  Var w, b;
  Var operator()(const Var& x) const { return conv_transpose2x2(x, w, b); }
  static UpConv2 create(ParamStore& ps, const std::string& prefix, int in,
                        int out, Rng& rng);
};

// ---- optimizer ----

/// Adam with per-parameter-tensor learning rates (resolved by the caller
/// through a name -> lr function so parameter groups stay a trainer concept).
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& ps,
            const std::function<double(const std::string&)>& lr_of);

  int64_t t() const { return t_; }
  // Exposed for checkpointing.
  std::unordered_map<std::string, Tensor>& moment1() { return m_; }
  std::unordered_map<std::string, Tensor>& moment2() { return v_; }
  void set_t(int64_t t) { t_ = t; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double eps() const { return eps_; }

 private:
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::unordered_map<std::string, Tensor> m_, v_;
};

}  // namespace gpnerf
