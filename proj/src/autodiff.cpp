// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <unordered_set>

#include "gpnerf/kernels.hpp"

namespace gpnerf {

namespace autodiff {
namespace {
std::atomic<uint64_t> g_seq{0};
std::string g_corrupt_op;
bool g_grad_enabled = true;
}  // namespace

void set_corrupt_op(const std::string& op_name) { g_corrupt_op = op_name; }
void clear_corrupt_op() { g_corrupt_op.clear(); }
void set_grad_enabled(bool enabled) { g_grad_enabled = enabled; }
bool grad_enabled() { return g_grad_enabled; }
}  // namespace autodiff

using autodiff::Node;
namespace K = gpnerf::kernels;

Var::Var(Tensor value, bool requires_grad) {
  node_ = std::make_shared<Node>();
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  node_->seq = ++autodiff::g_seq;
}

Var Var::make(const char* op, Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> bwd) {
  Var out(std::move(value), false);
  bool needs = autodiff::grad_enabled();
  if (needs) {
    needs = false;
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    out.node_->requires_grad = true;
    out.node_->op = op;
    out.node_->parents.reserve(parents.size());
    for (auto& p : parents) out.node_->parents.push_back(p.node());
    out.node_->backward = std::move(bwd);
  }
  return out;
}

void Var::backward() const {
  GPNERF_CHECK(node_->value.numel() == 1, "backward() needs a scalar root");
  backward(Tensor::full(node_->value.shape(), 1.0));
}

void Var::backward(const Tensor& seed) const {
  GPNERF_CHECK(node_->requires_grad, "backward on a graph with no gradients");
  node_->ensure_grad();
  K::ew_acc(seed.data(), node_->grad.data(), seed.numel());

  // Collect the reachable grad-requiring subgraph and replay in reverse
  // creation order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{node_.get()};
  seen.insert(node_.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents)
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](Node* a, Node* b) { return a->seq > b->seq; });
  for (Node* n : order) {
    if (!n->backward) continue;
    if (!n->grad.defined()) continue;  // no gradient reached this node
    n->backward(*n);
    if (!autodiff::g_corrupt_op.empty() && autodiff::g_corrupt_op == n->op) {
      for (auto& p : n->parents)
        if (p->requires_grad && p->grad.defined()) {
          p->grad[0] += 1e-2;
          break;
        }
    }
  }
}

namespace {

inline Node& P(Node& n, size_t i) { return *n.parents[i]; }

inline bool wants(Node& n, size_t i) { return n.parents[i]->requires_grad; }

inline double* grad_of(Node& n, size_t i) {
  P(n, i).ensure_grad();
  return P(n, i).grad.data();
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  GPNERF_CHECK(a.value().same_shape(b.value()),
               std::string(op) + " shape mismatch " + a.value().shape_str() +
                   " vs " + b.value().shape_str());
}

}  // namespace

// ---- elementwise ----

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor y(a.shape());
  const int64_t n = y.numel();
  K::ew_add(a.value().data(), b.value().data(), y.data(), n);
  return Var::make("add", std::move(y), {a, b}, [n](Node& nd) {
    if (wants(nd, 0)) K::ew_acc(nd.grad.data(), grad_of(nd, 0), n);
    if (wants(nd, 1)) K::ew_acc(nd.grad.data(), grad_of(nd, 1), n);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor y(a.shape());
  const int64_t n = y.numel();
  K::ew_sub(a.value().data(), b.value().data(), y.data(), n);
  return Var::make("sub", std::move(y), {a, b}, [n](Node& nd) {
    if (wants(nd, 0)) K::ew_acc(nd.grad.data(), grad_of(nd, 0), n);
    if (wants(nd, 1)) K::ew_scale_acc(nd.grad.data(), -1.0, grad_of(nd, 1), n);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor y(a.shape());
  const int64_t n = y.numel();
  K::ew_mul(a.value().data(), b.value().data(), y.data(), n);
  return Var::make("mul", std::move(y), {a, b}, [n](Node& nd) {
    if (wants(nd, 0))
      K::ew_mul_acc(nd.grad.data(), P(nd, 1).value.data(), grad_of(nd, 0), n);
    if (wants(nd, 1))
      K::ew_mul_acc(nd.grad.data(), P(nd, 0).value.data(), grad_of(nd, 1), n);
  });
}

Var affine(const Var& x, double m, double c) {
  Tensor y(x.shape());
  const int64_t n = y.numel();
  K::ew_affine(x.value().data(), y.data(), n, m, c);
  return Var::make("affine", std::move(y), {x}, [n, m](Node& nd) {
    if (wants(nd, 0)) K::ew_scale_acc(nd.grad.data(), m, grad_of(nd, 0), n);
  });
}

Var relu(const Var& x) {
  Tensor y(x.shape());
  const int64_t n = y.numel();
  K::ew_relu(x.value().data(), y.data(), n);
  return Var::make("relu", std::move(y), {x}, [n](Node& nd) {
    if (wants(nd, 0))
      K::ew_relu_bwd(P(nd, 0).value.data(), nd.grad.data(), grad_of(nd, 0), n);
  });
}

Var sigmoid(const Var& x) {
  Tensor y(x.shape());
  const int64_t n = y.numel();
  K::ew_sigmoid(x.value().data(), y.data(), n);
  return Var::make("sigmoid", std::move(y), {x}, [n](Node& nd) {
    if (wants(nd, 0))
      K::ew_sigmoid_bwd(nd.value.data(), nd.grad.data(), grad_of(nd, 0), n);
  });
}

Var stop_gradient(const Var& x) {
  // Shares the value storage; value passthrough is bit-exact.
  return Var::constant(x.value());
}

Var reshape(const Var& x, std::vector<int> shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  const int64_t n = y.numel();
  return Var::make("reshape", std::move(y), {x}, [n](Node& nd) {
    if (wants(nd, 0)) K::ew_acc(nd.grad.data(), grad_of(nd, 0), n);
  });
}

Var mul_const(const Var& x, const Tensor& c) {
  check_same_shape(x, Var::constant(c), "mul_const");
  Tensor y(x.shape());
  const int64_t n = y.numel();
  K::ew_mul(x.value().data(), c.data(), y.data(), n);
  return Var::make("mul_const", std::move(y), {x}, [n, c](Node& nd) {
    if (wants(nd, 0)) K::ew_mul_acc(nd.grad.data(), c.data(), grad_of(nd, 0), n);
  });
}

Var mul_rows(const Var& x, const Tensor& rowmask) {
  GPNERF_CHECK(x.value().rank() == 2 && rowmask.numel() == x.shape()[0],
               "mul_rows expects [rows,d] and [rows]");
  const int64_t rows = x.shape()[0];
  const int d = x.shape()[1];
  Tensor y(x.shape());
  K::mul_rows_fwd(x.value().data(), rowmask.data(), y.data(), rows, d);
  return Var::make("mul_rows", std::move(y), {x}, [rows, d, rowmask](Node& nd) {
    if (!wants(nd, 0)) return;
    Tensor tmp(nd.grad.shape());
    K::mul_rows_fwd(nd.grad.data(), rowmask.data(), tmp.data(), rows, d);
    K::ew_acc(tmp.data(), grad_of(nd, 0), tmp.numel());
  });
}

// ---- concat / slice over last dim ----

Var concat_lastdim(const std::vector<Var>& xs) {
  GPNERF_CHECK(!xs.empty(), "concat of nothing");
  auto shape = xs[0].shape();
  int total = 0;
  for (const auto& x : xs) total += x.shape().back();
  shape.back() = total;
  Tensor y(shape);
  const int64_t rows = y.numel() / total;
  int off = 0;
  for (const auto& x : xs) {
    const int d = x.shape().back();
    for (int64_t r = 0; r < rows; ++r)
      std::memcpy(y.data() + r * total + off, x.value().data() + r * d,
                  sizeof(double) * d);
    off += d;
  }
  std::vector<int> dims;
  for (const auto& x : xs) dims.push_back(x.shape().back());
  return Var::make("concat_lastdim", std::move(y), xs,
                   [rows, total, dims](Node& nd) {
                     int off = 0;
                     for (size_t i = 0; i < dims.size(); ++i) {
                       const int d = dims[i];
                       if (wants(nd, i)) {
                         double* g = grad_of(nd, i);
                         for (int64_t r = 0; r < rows; ++r)
                           for (int c = 0; c < d; ++c)
                             g[r * d + c] += nd.grad[r * total + off + c];
                       }
                       off += d;
                     }
                   });
}

Var slice_lastdim(const Var& x, int from, int to) {
  const int d = x.shape().back();
  GPNERF_CHECK(0 <= from && from < to && to <= d, "slice bounds");
  auto shape = x.shape();
  shape.back() = to - from;
  Tensor y(shape);
  const int w = to - from;
  const int64_t rows = y.numel() / w;
  for (int64_t r = 0; r < rows; ++r)
    std::memcpy(y.data() + r * w, x.value().data() + r * d + from,
                sizeof(double) * w);
  return Var::make("slice_lastdim", std::move(y), {x},
                   [rows, d, from, w](Node& nd) {
                     if (!wants(nd, 0)) return;
                     double* g = grad_of(nd, 0);
                     for (int64_t r = 0; r < rows; ++r)
                       for (int c = 0; c < w; ++c)
                         g[r * d + from + c] += nd.grad[r * w + c];
                   });
}

Var tile_lastdim(const Var& x, int times) {
  const int d = x.shape().back();
  auto shape = x.shape();
  shape.back() = d * times;
  Tensor y(shape);
  const int64_t rows = x.numel() / d;
  for (int64_t r = 0; r < rows; ++r)
    for (int t = 0; t < times; ++t)
      std::memcpy(y.data() + (r * times + t) * d, x.value().data() + r * d,
                  sizeof(double) * d);
  return Var::make("tile_lastdim", std::move(y), {x},
                   [rows, d, times](Node& nd) {
                     if (!wants(nd, 0)) return;
                     double* g = grad_of(nd, 0);
                     for (int64_t r = 0; r < rows; ++r)
                       for (int t = 0; t < times; ++t)
                         for (int c = 0; c < d; ++c)
                           g[r * d + c] += nd.grad[(r * times + t) * d + c];
                   });
}

// ---- channel concat / slice for [B,C,H,W] ----

Var concat_channels(const std::vector<Var>& xs) {
  GPNERF_CHECK(!xs.empty() && xs[0].value().rank() == 4, "concat_channels rank");
  const int B = xs[0].shape()[0], H = xs[0].shape()[2], W = xs[0].shape()[3];
  int Ct = 0;
  for (const auto& x : xs) Ct += x.shape()[1];
  Tensor y({B, Ct, H, W});
  const int64_t hw = (int64_t)H * W;
  int off = 0;
  std::vector<int> chans;
  for (const auto& x : xs) {
    const int C = x.shape()[1];
    for (int b = 0; b < B; ++b)
      std::memcpy(y.data() + ((int64_t)b * Ct + off) * hw,
                  x.value().data() + (int64_t)b * C * hw,
                  sizeof(double) * C * hw);
    off += C;
    chans.push_back(C);
  }
  return Var::make("concat_channels", std::move(y), xs,
                   [B, Ct, hw, chans](Node& nd) {
                     int off = 0;
                     for (size_t i = 0; i < chans.size(); ++i) {
                       const int C = chans[i];
                       if (wants(nd, i)) {
                         double* g = grad_of(nd, i);
                         for (int b = 0; b < B; ++b)
                           K::ew_acc(nd.grad.data() + ((int64_t)b * Ct + off) * hw,
                                     g + (int64_t)b * C * hw, C * hw);
                       }
                       off += C;
                     }
                   });
}

Var slice_channels(const Var& x, int from, int to) {
  GPNERF_CHECK(x.value().rank() == 4, "slice_channels rank");
  const int B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  GPNERF_CHECK(0 <= from && from < to && to <= C, "slice_channels bounds");
  const int Cs = to - from;
  const int64_t hw = (int64_t)H * W;
  Tensor y({B, Cs, H, W});
  for (int b = 0; b < B; ++b)
    std::memcpy(y.data() + (int64_t)b * Cs * hw,
                x.value().data() + ((int64_t)b * C + from) * hw,
                sizeof(double) * Cs * hw);
  return Var::make("slice_channels", std::move(y), {x},
                   [B, C, Cs, from, hw](Node& nd) {
                     if (!wants(nd, 0)) return;
                     double* g = grad_of(nd, 0);
                     for (int b = 0; b < B; ++b)
                       K::ew_acc(nd.grad.data() + (int64_t)b * Cs * hw,
                                 g + ((int64_t)b * C + from) * hw, Cs * hw);
                   });
}

// ---- dense / attention ----

Var linear(const Var& x, const Var& w, const Var& b) {
  const int in_dim = w.shape()[0], out_dim = w.shape()[1];
  GPNERF_CHECK(x.shape().back() == in_dim, "linear in_dim mismatch");
  auto shape = x.shape();
  shape.back() = out_dim;
  const int64_t rows = x.numel() / in_dim;
  Tensor y(shape);
  K::linear_fwd(x.value().data(), w.value().data(),
                b.defined() ? b.value().data() : nullptr, y.data(), rows,
                in_dim, out_dim);
  std::vector<Var> parents{x, w};
  if (b.defined()) parents.push_back(b);
  return Var::make("linear", std::move(y), std::move(parents),
                   [rows, in_dim, out_dim](Node& nd) {
                     const double* dy = nd.grad.data();
                     if (wants(nd, 0))
                       K::linear_bwd_x(dy, P(nd, 1).value.data(), grad_of(nd, 0),
                                       rows, in_dim, out_dim);
                     if (wants(nd, 1))
                       K::linear_bwd_w(P(nd, 0).value.data(), dy, grad_of(nd, 1),
                                       rows, in_dim, out_dim);
                     if (nd.parents.size() > 2 && wants(nd, 2))
                       K::linear_bwd_b(dy, grad_of(nd, 2), rows, out_dim);
                   });
}

Var bmm_nt(const Var& a, const Var& b, double scale) {
  const int B = a.shape()[0], M = a.shape()[1], D = a.shape()[2];
  const int N = b.shape()[1];
  GPNERF_CHECK(b.shape()[0] == B && b.shape()[2] == D, "bmm_nt shapes");
  Tensor y({B, M, N});
  K::bmm_nt(a.value().data(), b.value().data(), y.data(), B, M, N, D, scale);
  return Var::make("bmm_nt", std::move(y), {a, b},
                   [B, M, N, D, scale](Node& nd) {
                     if (wants(nd, 0))
                       K::bmm_nt_bwd_a(nd.grad.data(), P(nd, 1).value.data(),
                                       grad_of(nd, 0), B, M, N, D, scale);
                     if (wants(nd, 1))
                       K::bmm_nt_bwd_b(nd.grad.data(), P(nd, 0).value.data(),
                                       grad_of(nd, 1), B, M, N, D, scale);
                   });
}

Var bmm_nn(const Var& a, const Var& x) {
  const int B = a.shape()[0], M = a.shape()[1], N = a.shape()[2];
  const int D = x.shape()[2];
  GPNERF_CHECK(x.shape()[0] == B && x.shape()[1] == N, "bmm_nn shapes");
  Tensor y({B, M, D});
  K::bmm_nn(a.value().data(), x.value().data(), y.data(), B, M, N, D);
  return Var::make("bmm_nn", std::move(y), {a, x}, [B, M, N, D](Node& nd) {
    if (wants(nd, 0))
      K::bmm_nn_bwd_a(nd.grad.data(), P(nd, 1).value.data(), grad_of(nd, 0), B,
                      M, N, D);
    if (wants(nd, 1))
      K::bmm_nn_bwd_x(nd.grad.data(), P(nd, 0).value.data(), grad_of(nd, 1), B,
                      M, N, D);
  });
}

Var softmax_masked(const Var& x, const MaskArray& mask) {
  const int n = x.shape().back();
  const int64_t rows = x.numel() / n;
  if (mask.defined())
    GPNERF_CHECK(mask.numel() == x.numel(), "softmax mask size");
  Tensor y(x.shape());
  K::softmax_rows(x.value().data(), mask.defined() ? mask.data() : nullptr,
                  y.data(), rows, n);
  return Var::make("softmax", std::move(y), {x}, [rows, n, mask](Node& nd) {
    if (!wants(nd, 0)) return;
    K::softmax_rows_bwd(nd.value.data(), nd.grad.data(),
                        mask.defined() ? mask.data() : nullptr, grad_of(nd, 0),
                        rows, n);
  });
}

// ---- reductions / broadcasts ----

Var sum_all(const Var& x) {
  Tensor y = Tensor::scalar(K::sum_all(x.value().data(), x.numel()));
  const int64_t n = x.numel();
  return Var::make("sum_all", std::move(y), {x}, [n](Node& nd) {
    if (!wants(nd, 0)) return;
    double* g = grad_of(nd, 0);
    const double s = nd.grad[0];
    for (int64_t i = 0; i < n; ++i) g[i] += s;
  });
}

Var mean_mid(const Var& x) {
  GPNERF_CHECK(x.value().rank() == 3, "mean_mid rank");
  const int64_t A = x.shape()[0];
  const int B = x.shape()[1], C = x.shape()[2];
  Tensor y({(int)A, C});
  K::mean_mid_fwd(x.value().data(), y.data(), A, B, C);
  return Var::make("mean_mid", std::move(y), {x}, [A, B, C](Node& nd) {
    if (wants(nd, 0)) K::mean_mid_bwd(nd.grad.data(), grad_of(nd, 0), A, B, C);
  });
}

Var weighted_sum_mid(const Var& w, const Var& x) {
  GPNERF_CHECK(x.value().rank() == 3 && w.value().rank() == 2, "wsum rank");
  const int64_t A = x.shape()[0];
  const int B = x.shape()[1], C = x.shape()[2];
  GPNERF_CHECK(w.shape()[0] == (int)A && w.shape()[1] == B, "wsum shapes");
  Tensor y({(int)A, C});
  K::weighted_sum_mid_fwd(w.value().data(), x.value().data(), y.data(), A, B, C);
  return Var::make("weighted_sum_mid", std::move(y), {w, x},
                   [A, B, C](Node& nd) {
                     if (wants(nd, 0))
                       K::weighted_sum_mid_bwd_w(nd.grad.data(),
                                                 P(nd, 1).value.data(),
                                                 grad_of(nd, 0), A, B, C);
                     if (wants(nd, 1))
                       K::weighted_sum_mid_bwd_x(nd.grad.data(),
                                                 P(nd, 0).value.data(),
                                                 grad_of(nd, 1), A, B, C);
                   });
}

Var masked_mean_mid(const Var& x, const MaskArray& v) {
  GPNERF_CHECK(x.value().rank() == 3, "masked_mean rank");
  const int64_t A = x.shape()[0];
  const int B = x.shape()[1], C = x.shape()[2];
  GPNERF_CHECK(v.numel() == A * B, "masked_mean mask size");
  Tensor y({(int)A, C});
  K::masked_mean_mid_fwd(x.value().data(), v.data(), y.data(), A, B, C);
  return Var::make("masked_mean_mid", std::move(y), {x}, [A, B, C, v](Node& nd) {
    if (wants(nd, 0))
      K::masked_mean_mid_bwd(nd.grad.data(), v.data(), grad_of(nd, 0), A, B, C);
  });
}

Var add_bcast_mid(const Var& x, const Var& q, double sign) {
  GPNERF_CHECK(x.value().rank() == 3 && q.value().rank() == 2, "bcast rank");
  const int64_t A = x.shape()[0];
  const int B = x.shape()[1], C = x.shape()[2];
  GPNERF_CHECK(q.shape()[0] == (int)A && q.shape()[1] == C, "bcast shapes");
  Tensor y(x.shape());
  K::add_bcast_mid_fwd(x.value().data(), q.value().data(), sign, y.data(), A, B, C);
  return Var::make("add_bcast_mid", std::move(y), {x, q},
                   [A, B, C, sign](Node& nd) {
                     if (wants(nd, 0))
                       K::ew_acc(nd.grad.data(), grad_of(nd, 0), A * B * C);
                     if (wants(nd, 1))
                       K::add_bcast_mid_bwd_q(nd.grad.data(), sign,
                                              grad_of(nd, 1), A, B, C);
                   });
}

// ---- conv / resampling ----

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  GPNERF_CHECK(x.value().rank() == 4 && w.value().rank() == 4, "conv2d rank");
  const int Bn = x.shape()[0], Ci = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  const int Co = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
  GPNERF_CHECK(w.shape()[1] == Ci, "conv2d channel mismatch");
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  Tensor y({Bn, Co, Ho, Wo});
  K::conv2d_fwd(x.value().data(), w.value().data(),
                b.defined() ? b.value().data() : nullptr, y.data(), Bn, Ci, H,
                W, Co, kh, kw, stride, pad);
  std::vector<Var> parents{x, w};
  if (b.defined()) parents.push_back(b);
  return Var::make(
      "conv2d", std::move(y), std::move(parents),
      [Bn, Ci, H, W, Co, kh, kw, stride, pad, Ho, Wo](Node& nd) {
        const double* dy = nd.grad.data();
        if (wants(nd, 0))
          K::conv2d_bwd_x(dy, P(nd, 1).value.data(), grad_of(nd, 0), Bn, Ci, H,
                          W, Co, kh, kw, stride, pad);
        if (wants(nd, 1))
          K::conv2d_bwd_w(P(nd, 0).value.data(), dy, grad_of(nd, 1), Bn, Ci, H,
                          W, Co, kh, kw, stride, pad);
        if (nd.parents.size() > 2 && wants(nd, 2))
          K::conv2d_bwd_b(dy, grad_of(nd, 2), Bn, Co, Ho, Wo);
      });
}

Var conv_transpose2x2(const Var& x, const Var& w, const Var& b) {
  GPNERF_CHECK(x.value().rank() == 4 && w.value().rank() == 4, "convtr rank");
  const int Bn = x.shape()[0], Ci = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  GPNERF_CHECK(w.shape()[0] == Ci && w.shape()[2] == 2 && w.shape()[3] == 2,
               "convtr expects w[Ci,Co,2,2]");
  const int Co = w.shape()[1];
  Tensor y({Bn, Co, 2 * H, 2 * W});
  K::convtr2_fwd(x.value().data(), w.value().data(),
                 b.defined() ? b.value().data() : nullptr, y.data(), Bn, Ci, H,
                 W, Co);
  std::vector<Var> parents{x, w};
  if (b.defined()) parents.push_back(b);
  return Var::make("conv_transpose2x2", std::move(y), std::move(parents),
                   [Bn, Ci, H, W, Co](Node& nd) {
                     const double* dy = nd.grad.data();
                     if (wants(nd, 0))
                       K::convtr2_bwd_x(dy, P(nd, 1).value.data(),
                                        grad_of(nd, 0), Bn, Ci, H, W, Co);
                     if (wants(nd, 1))
                       K::convtr2_bwd_w(P(nd, 0).value.data(), dy,
                                        grad_of(nd, 1), Bn, Ci, H, W, Co);
                     if (nd.parents.size() > 2 && wants(nd, 2))
                       K::convtr2_bwd_b(dy, grad_of(nd, 2), Bn, Co, 2 * H, 2 * W);
                   });
}

Var avgpool(const Var& x, int k) {
  const int Bn = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  GPNERF_CHECK(H % k == 0 && W % k == 0, "avgpool divisibility");
  Tensor y({Bn, C, H / k, W / k});
  K::avgpool_fwd(x.value().data(), y.data(), Bn, C, H, W, k);
  return Var::make("avgpool", std::move(y), {x}, [Bn, C, H, W, k](Node& nd) {
    if (wants(nd, 0))
      K::avgpool_bwd(nd.grad.data(), grad_of(nd, 0), Bn, C, H, W, k);
  });
}

Var upsample_nearest2(const Var& x) {
  const int Bn = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  Tensor y({Bn, C, 2 * H, 2 * W});
  K::upsample_nearest2_fwd(x.value().data(), y.data(), Bn, C, H, W);
  return Var::make("upsample_nearest2", std::move(y), {x},
                   [Bn, C, H, W](Node& nd) {
                     if (wants(nd, 0))
                       K::upsample_nearest2_bwd(nd.grad.data(), grad_of(nd, 0),
                                                Bn, C, H, W);
                   });
}

Var upsample_bilinear(const Var& x, int factor) {
  const int Bn = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  Tensor y({Bn, C, factor * H, factor * W});
  K::upsample_bilinear_fwd(x.value().data(), y.data(), Bn, C, H, W, factor);
  return Var::make("upsample_bilinear", std::move(y), {x},
                   [Bn, C, H, W, factor](Node& nd) {
                     if (wants(nd, 0))
                       K::upsample_bilinear_bwd(nd.grad.data(), grad_of(nd, 0),
                                                Bn, C, H, W, factor);
                   });
}

// ---- sampling / losses ----

Var epipolar_gather(const Var& feats, const Tensor& uv, const MaskArray& valid) {
  GPNERF_CHECK(feats.value().rank() == 4, "epipolar_gather feats rank");
  const int N = feats.shape()[0], C = feats.shape()[1];
  const int Hf = feats.shape()[2], Wf = feats.shape()[3];
  GPNERF_CHECK(uv.rank() == 3 && uv.shape()[1] == N && uv.shape()[2] == 2,
               "epipolar_gather uv shape");
  const int64_t Pn = uv.shape()[0];
  GPNERF_CHECK(valid.numel() == Pn * N, "epipolar_gather mask size");
  Tensor y({(int)Pn, N, C});
  K::epipolar_gather_fwd(feats.value().data(), uv.data(), valid.data(),
                         y.data(), Pn, N, C, Hf, Wf);
  return Var::make("epipolar_gather", std::move(y), {feats},
                   [Pn, N, C, Hf, Wf, uv, valid](Node& nd) {
                     if (wants(nd, 0))
                       K::epipolar_gather_bwd(nd.grad.data(), uv.data(),
                                              valid.data(), grad_of(nd, 0), Pn,
                                              N, C, Hf, Wf);
                   });
}

Var cross_entropy(const Var& logits, const LabelArray& labels,
                  const Tensor& weights) {
  GPNERF_CHECK(logits.value().rank() == 2, "cross_entropy expects [P,C]");
  const int64_t Pn = logits.shape()[0];
  const int C = logits.shape()[1];
  GPNERF_CHECK(labels.numel() == Pn, "cross_entropy label count");
  for (int64_t i = 0; i < Pn; ++i)
    GPNERF_CHECK(labels[i] >= 0 && labels[i] < C,
                 "label " + std::to_string(labels[i]) + " outside class set");
  const double* w = weights.defined() ? weights.data() : nullptr;
  Tensor y = Tensor::scalar(
      K::ce_fwd(logits.value().data(), labels.data(), w, Pn, C));
  return Var::make("cross_entropy", std::move(y), {logits},
                   [Pn, C, labels, weights](Node& nd) {
                     if (!wants(nd, 0)) return;
                     K::ce_bwd(P(nd, 0).value.data(), labels.data(),
                               weights.defined() ? weights.data() : nullptr,
                               nd.grad[0], grad_of(nd, 0), Pn, C);
                   });
}

Var cosine_rows(const Var& a, const Var& b, double eps) {
  check_same_shape(a, b, "cosine_rows");
  GPNERF_CHECK(a.value().rank() == 2, "cosine_rows expects [R,D]");
  const int64_t R = a.shape()[0];
  const int D = a.shape()[1];
  Tensor y({(int)R});
  K::cos_rows_fwd(a.value().data(), b.value().data(), eps, y.data(), R, D);
  return Var::make("cosine_rows", std::move(y), {a, b}, [R, D, eps](Node& nd) {
    double* da = wants(nd, 0) ? grad_of(nd, 0) : nullptr;
    double* db = wants(nd, 1) ? grad_of(nd, 1) : nullptr;
    if (da || db)
      K::cos_rows_bwd(P(nd, 0).value.data(), P(nd, 1).value.data(), eps,
                      nd.grad.data(), da, db, R, D);
  });
}

}  // namespace gpnerf
