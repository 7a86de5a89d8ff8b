// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode autodiff over Tensor. Graphs are built eagerly; backward()
// walks nodes in reverse creation order, which is a valid topological order
// because inputs always exist before the ops that consume them.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gpnerf/tensor.hpp"

namespace gpnerf {

namespace autodiff {

struct Node {
  Tensor value;
  Tensor grad;  // lazily allocated, same shape as value
  bool requires_grad = false;
  uint64_t seq = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (!grad.defined()) grad = Tensor::zeros(value.shape());
  }
};

/// Test fixture hook: perturb gradients flowing out of ops with this name.
void set_corrupt_op(const std::string& op_name);
void clear_corrupt_op();

/// While disabled, ops record no parents and no backward closures.
void set_grad_enabled(bool enabled);
bool grad_enabled();

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }
  bool prev_;
};

}  // namespace autodiff

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  static Var constant(Tensor value) { return Var(std::move(value), false); }
  static Var param(Tensor value) { return Var(std::move(value), true); }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::vector<int>& shape() const { return node_->value.shape(); }
  int64_t numel() const { return node_->value.numel(); }
  std::shared_ptr<autodiff::Node> node() const { return node_; }

  void zero_grad() {
    if (node_ && node_->grad.defined()) node_->grad.fill(0.0);
  }

  /// Backward from a scalar node (seeds with 1).
  void backward() const;
  void backward(const Tensor& seed) const;

  static Var make(const char* op, Tensor value, std::vector<Var> parents,
                  std::function<void(autodiff::Node&)> bwd);

 private:
  std::shared_ptr<autodiff::Node> node_;
};

// ---- elementwise / shape ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var affine(const Var& x, double mul, double add);  // mul*x + add
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var stop_gradient(const Var& x);  // identity value, severed gradient
Var reshape(const Var& x, std::vector<int> shape);
Var mul_const(const Var& x, const Tensor& c);       // elementwise, c fixed
Var mul_rows(const Var& x, const Tensor& rowmask);  // x[r,:] *= rowmask[r]
Var concat_lastdim(const std::vector<Var>& xs);
Var slice_lastdim(const Var& x, int from, int to);
Var tile_lastdim(const Var& x, int times);
Var concat_channels(const std::vector<Var>& xs);  // [B,C,H,W] along C
Var slice_channels(const Var& x, int from, int to);

// ---- dense / attention ----
Var linear(const Var& x, const Var& w, const Var& b);  // b may be undefined
Var bmm_nt(const Var& a, const Var& b, double scale);
Var bmm_nn(const Var& a, const Var& x);
Var softmax_masked(const Var& x, const MaskArray& mask);  // mask may be undefined

// ---- reductions / broadcasts ----
Var sum_all(const Var& x);                              // -> [1]
Var mean_mid(const Var& x);                             // [A,B,C] -> [A,C]
Var weighted_sum_mid(const Var& w, const Var& x);       // -> [A,C]
Var masked_mean_mid(const Var& x, const MaskArray& v);  // -> [A,C]
Var add_bcast_mid(const Var& x, const Var& q, double sign);

// ---- conv / resampling ----
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var conv_transpose2x2(const Var& x, const Var& w, const Var& b);
Var avgpool(const Var& x, int k);
Var upsample_nearest2(const Var& x);
Var upsample_bilinear(const Var& x, int factor);

// ---- sampling / losses ----
Var epipolar_gather(const Var& feats, const Tensor& uv, const MaskArray& valid);
Var cross_entropy(const Var& logits, const LabelArray& labels,
                  const Tensor& weights);  // weights may be undefined
Var cosine_rows(const Var& a, const Var& b, double eps);

}  // namespace gpnerf
