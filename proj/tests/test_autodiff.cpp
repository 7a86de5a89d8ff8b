// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <functional>

#include "gpnerf/autodiff.hpp"
#include "gpnerf/rng.hpp"

using namespace gpnerf;

namespace {

Tensor random_tensor(std::vector<int> shape, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal(0, 1);
  return t;
}

// Central-difference check of d(scalar_fn)/d(input) against the tape.
double max_fd_error(const std::function<Var(const Var&)>& scalar_fn,
                    const Tensor& x0, double eps = 1e-6) {
  Var x = Var::param(x0.clone());
  Var y = scalar_fn(x);
  REQUIRE(y.numel() == 1);
  y.backward();
  const Tensor ad = x.grad().clone();

  double worst = 0.0;
  for (int64_t i = 0; i < x0.numel(); ++i) {
    Tensor xp = x0.clone(), xm = x0.clone();
    xp[i] += eps;
    xm[i] -= eps;
    const double fp = scalar_fn(Var::constant(xp)).value()[0];
    const double fm = scalar_fn(Var::constant(xm)).value()[0];
    const double fd = (fp - fm) / (2 * eps);
    const double scale = std::max({std::abs(fd), std::abs(ad[i]), 1e-7});
    worst = std::max(worst, std::abs(fd - ad[i]) / scale);
  }
  return worst;
}

Var weighted_scalar(const Var& y, uint64_t seed) {
  Tensor w = random_tensor(y.value().shape(), seed);
  return sum_all(mul_const(y, w));
}

}  // namespace

TEST_CASE("elementwise and reduction gradients match finite differences") {
  const Tensor x = random_tensor({4, 5}, 100);
  CHECK(max_fd_error([](const Var& v) { return sum_all(mul(v, v)); }, x) < 1e-6);
  CHECK(max_fd_error([](const Var& v) { return weighted_scalar(relu(v), 7); }, x) < 1e-5);
  CHECK(max_fd_error([](const Var& v) { return weighted_scalar(sigmoid(v), 8); }, x) < 1e-6);
  CHECK(max_fd_error(
            [](const Var& v) { return weighted_scalar(affine(v, -2.5, 0.3), 9); }, x) < 1e-6);
}

TEST_CASE("linear gradient w.r.t. input, weight, and bias") {
  const Tensor x0 = random_tensor({6, 4}, 101);
  const Tensor w0 = random_tensor({4, 3}, 102);
  const Tensor b0 = random_tensor({3}, 103);

  CHECK(max_fd_error(
            [&](const Var& v) {
              return weighted_scalar(
                  linear(v, Var::constant(w0), Var::constant(b0)), 10);
            },
            x0) < 1e-6);
  CHECK(max_fd_error(
            [&](const Var& v) {
              return weighted_scalar(
                  linear(Var::constant(x0), v, Var::constant(b0)), 11);
            },
            w0) < 1e-6);
  CHECK(max_fd_error(
            [&](const Var& v) {
              return weighted_scalar(
                  linear(Var::constant(x0), Var::constant(w0), v), 12);
            },
            b0) < 1e-6);
}

TEST_CASE("softmax gradient with and without mask") {
  const Tensor x = random_tensor({5, 6}, 104);
  CHECK(max_fd_error(
            [](const Var& v) {
              return weighted_scalar(softmax_masked(v, MaskArray()), 13);
            },
            x) < 1e-5);
  MaskArray mask({5, 6});
  Rng rng(3);
  for (int64_t i = 0; i < mask.numel(); ++i) mask[i] = rng.uniform01() < 0.7;
  for (int r = 0; r < 5; ++r) mask[r * 6 + r] = 1;
  CHECK(max_fd_error(
            [mask](const Var& v) {
              return weighted_scalar(softmax_masked(v, mask), 14);
            },
            x) < 1e-5);
}

TEST_CASE("attention matmul gradients") {
  const Tensor q = random_tensor({2, 3, 4}, 105);
  const Tensor k = random_tensor({2, 5, 4}, 106);
  const Tensor v = random_tensor({2, 5, 4}, 107);
  CHECK(max_fd_error(
            [&](const Var& a) {
              return weighted_scalar(bmm_nt(a, Var::constant(k), 0.5), 15);
            },
            q) < 1e-6);
  CHECK(max_fd_error(
            [&](const Var& b) {
              return weighted_scalar(bmm_nt(Var::constant(q), b, 0.5), 16);
            },
            k) < 1e-6);
  const Tensor attn = random_tensor({2, 3, 5}, 108);
  CHECK(max_fd_error(
            [&](const Var& a) {
              return weighted_scalar(bmm_nn(a, Var::constant(v)), 17);
            },
            attn) < 1e-6);
  CHECK(max_fd_error(
            [&](const Var& b) {
              return weighted_scalar(bmm_nn(Var::constant(attn), b), 18);
            },
            v) < 1e-6);
}

TEST_CASE("conv, transposed conv, pooling and resize gradients") {
  const Tensor x = random_tensor({1, 2, 8, 8}, 109);
  const Tensor w = random_tensor({3, 2, 3, 3}, 110, 0.5);
  const Tensor b = random_tensor({3}, 111);
  for (int stride : {1, 2}) {
    CHECK(max_fd_error(
              [&, stride](const Var& v) {
                return weighted_scalar(
                    conv2d(v, Var::constant(w), Var::constant(b), stride, 1), 19);
              },
              x) < 1e-5);
    CHECK(max_fd_error(
              [&, stride](const Var& v) {
                return weighted_scalar(
                    conv2d(Var::constant(x), v, Var::constant(b), stride, 1), 20);
              },
              w) < 1e-5);
  }
  const Tensor wt = random_tensor({2, 3, 2, 2}, 112, 0.5);
  CHECK(max_fd_error(
            [&](const Var& v) {
              return weighted_scalar(conv_transpose2x2(v, Var::constant(wt), Var()), 21);
            },
            x) < 1e-5);
  CHECK(max_fd_error(
            [&](const Var& v) {
              return weighted_scalar(conv_transpose2x2(Var::constant(x), v, Var()), 22);
            },
            wt) < 1e-5);
  CHECK(max_fd_error(
            [&](const Var& v) { return weighted_scalar(avgpool(v, 2), 23); }, x) < 1e-6);
  CHECK(max_fd_error(
            [&](const Var& v) { return weighted_scalar(upsample_nearest2(v), 24); },
            x) < 1e-6);
  CHECK(max_fd_error(
            [&](const Var& v) { return weighted_scalar(upsample_bilinear(v, 4), 25); },
            x) < 1e-6);
}

TEST_CASE("epipolar gather gradient reaches the feature grids") {
  const int P = 9, N = 2, C = 3, Hf = 5, Wf = 4;
  Tensor uv({P, N, 2});
  MaskArray valid({P, N});
  Rng rng(30);
  for (int64_t i = 0; i < (int64_t)P * N; ++i) {
    uv[i * 2 + 0] = rng.uniform(-0.5, Wf - 0.5);
    uv[i * 2 + 1] = rng.uniform(-0.5, Hf - 0.5);
    valid[i] = rng.uniform01() < 0.85;
  }
  const Tensor feats = random_tensor({N, C, Hf, Wf}, 113);
  CHECK(max_fd_error(
            [&](const Var& v) {
              return weighted_scalar(epipolar_gather(v, uv, valid), 26);
            },
            feats) < 1e-6);
}

TEST_CASE("cross entropy and cosine gradients") {
  LabelArray labels({7});
  Tensor w({7});
  Rng rng(31);
  for (int i = 0; i < 7; ++i) {
    labels[i] = rng.uniform_int(0, 4);
    w[i] = rng.uniform(0.25, 2.0);
  }
  const Tensor logits = random_tensor({7, 5}, 114);
  CHECK(max_fd_error(
            [&](const Var& v) { return cross_entropy(v, labels, w); }, logits) < 1e-6);

  const Tensor a = random_tensor({6, 8}, 115);
  const Tensor b = random_tensor({6, 8}, 116);
  CHECK(max_fd_error(
            [&](const Var& v) {
              return weighted_scalar(cosine_rows(v, Var::constant(b), 1e-8), 27);
            },
            a) < 1e-5);
  CHECK(max_fd_error(
            [&](const Var& v) {
              return weighted_scalar(cosine_rows(Var::constant(a), v, 1e-8), 28);
            },
            b) < 1e-5);
}

TEST_CASE("stop_gradient: identity values, severed derivative") {
  const Tensor x0 = random_tensor({3, 3}, 117);
  Var x = Var::param(x0.clone());

  Var blocked = stop_gradient(mul(x, x));
  // Bit-exact passthrough.
  for (int64_t i = 0; i < blocked.numel(); ++i)
    CHECK(blocked.value()[i] == x0[i] * x0[i]);
  CHECK_FALSE(blocked.requires_grad());

  // f(x) = sum(x * stopgrad(x^2)): tape treats x^2 as constant, so the
  // derivative is x^2 rather than 3x^2. FD on the complete function sees
  // 3x^2, which is exactly what the block must hide.
  Var y = sum_all(mul(x, blocked));
  y.backward();
  for (int64_t i = 0; i < x0.numel(); ++i) {
    CHECK(x.grad()[i] == doctest::Approx(x0[i] * x0[i]).epsilon(1e-12));
    const double fd_full = 3.0 * x0[i] * x0[i];
    CHECK(std::abs(fd_full - x.grad()[i]) > 1e-6);  // confirms the block bites
  }
}

TEST_CASE("stop_gradient composed with an unblocked path keeps its gradient") {
  const Tensor x0 = random_tensor({4}, 118);
  Var x = Var::param(x0.clone());
  // y = sum(x^2 + stopgrad(x^2)): gradient must be exactly the unblocked 2x.
  Var y = sum_all(add(mul(x, x), stop_gradient(mul(x, x))));
  y.backward();
  for (int64_t i = 0; i < 4; ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0 * x0[i]).epsilon(1e-12));
}

TEST_CASE("gradient accumulates across repeated uses") {
  Var x = Var::param(Tensor::from({2}, {1.5, -0.5}));
  Var y = sum_all(add(mul(x, x), x));  // d/dx = 2x + 1
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(4.0));
  CHECK(x.grad()[1] == doctest::Approx(0.0));
}

TEST_CASE("grad mode guard disables graph building") {
  Var x = Var::param(random_tensor({3}, 119));
  autodiff::NoGradGuard guard;
  Var y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
}
