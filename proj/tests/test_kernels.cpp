// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Parity between the OpenMP kernels and the naive serial references. The
// parallel loops assign each output element to exactly one thread with a
// fixed inner accumulation order, so equality is exact, not approximate.

#include <doctest.h>

#include <vector>

#include "gpnerf/kernels.hpp"
#include "gpnerf/rng.hpp"

using namespace gpnerf;
namespace K = gpnerf::kernels;

namespace {

std::vector<double> random_vec(int64_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0, 1);
  return v;
}

void check_exact(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

struct ParallelOnOff {
  // Runs the same kernel with threading on and off; both must match ref.
  template <typename F>
  static void run(F&& f) {
    K::set_parallel(true);
    f();
    K::set_parallel(false);
    f();
    K::set_parallel(true);
  }
};

}  // namespace

TEST_CASE("linear matches reference exactly") {
  const int rows = 33, in_dim = 17, out_dim = 9;
  const auto x = random_vec((int64_t)rows * in_dim, 1);
  const auto w = random_vec((int64_t)in_dim * out_dim, 2);
  const auto b = random_vec(out_dim, 3);
  std::vector<double> ref((int64_t)rows * out_dim);
  K::ref::linear_fwd(x.data(), w.data(), b.data(), ref.data(), rows, in_dim, out_dim);
  ParallelOnOff::run([&] {
    std::vector<double> y((int64_t)rows * out_dim);
    K::linear_fwd(x.data(), w.data(), b.data(), y.data(), rows, in_dim, out_dim);
    check_exact(y, ref);
  });
}

TEST_CASE("batched matmuls match reference exactly") {
  const int B = 3, M = 7, N = 6, D = 5;
  const auto a = random_vec((int64_t)B * M * D, 4);
  const auto bt = random_vec((int64_t)B * N * D, 5);
  std::vector<double> ref((int64_t)B * M * N);
  K::ref::bmm_nt(a.data(), bt.data(), ref.data(), B, M, N, D, 0.37);
  ParallelOnOff::run([&] {
    std::vector<double> y((int64_t)B * M * N);
    K::bmm_nt(a.data(), bt.data(), y.data(), B, M, N, D, 0.37);
    check_exact(y, ref);
  });

  const auto attn = random_vec((int64_t)B * M * N, 6);
  const auto v = random_vec((int64_t)B * N * D, 7);
  std::vector<double> ref2((int64_t)B * M * D);
  K::ref::bmm_nn(attn.data(), v.data(), ref2.data(), B, M, N, D);
  ParallelOnOff::run([&] {
    std::vector<double> y((int64_t)B * M * D);
    K::bmm_nn(attn.data(), v.data(), y.data(), B, M, N, D);
    check_exact(y, ref2);
  });
}

TEST_CASE("masked softmax matches reference; masked lanes exactly zero") {
  const int rows = 40, n = 7;
  const auto x = random_vec((int64_t)rows * n, 8);
  std::vector<uint8_t> mask((int64_t)rows * n);
  Rng rng(9);
  for (auto& m : mask) m = rng.uniform01() < 0.6 ? 1 : 0;
  for (int i = 0; i < n; ++i) mask[(int64_t)3 * n + i] = 0;  // all-invalid row

  std::vector<double> ref((int64_t)rows * n);
  K::ref::softmax_rows(x.data(), mask.data(), ref.data(), rows, n);
  ParallelOnOff::run([&] {
    std::vector<double> y((int64_t)rows * n);
    K::softmax_rows(x.data(), mask.data(), y.data(), rows, n);
    check_exact(y, ref);
  });
  for (int64_t i = 0; i < (int64_t)rows * n; ++i)
    if (!mask[i]) CHECK(ref[i] == 0.0);
  for (int i = 0; i < n; ++i) CHECK(ref[(int64_t)3 * n + i] == 0.0);
}

TEST_CASE("conv2d matches reference exactly (stride 1 and 2)") {
  const int Bn = 2, Ci = 3, H = 11, W = 9, Co = 4;
  const auto x = random_vec((int64_t)Bn * Ci * H * W, 10);
  const auto w = random_vec((int64_t)Co * Ci * 9, 11);
  const auto b = random_vec(Co, 12);
  for (int stride : {1, 2}) {
    const int Ho = (H + 2 - 3) / stride + 1, Wo = (W + 2 - 3) / stride + 1;
    std::vector<double> ref((int64_t)Bn * Co * Ho * Wo);
    K::ref::conv2d_fwd(x.data(), w.data(), b.data(), ref.data(), Bn, Ci, H, W,
                       Co, 3, 3, stride, 1);
    ParallelOnOff::run([&] {
      std::vector<double> y((int64_t)Bn * Co * Ho * Wo);
      K::conv2d_fwd(x.data(), w.data(), b.data(), y.data(), Bn, Ci, H, W, Co, 3,
                    3, stride, 1);
      check_exact(y, ref);
    });
  }
}

TEST_CASE("weighted_sum_mid and epipolar gather match references") {
  const int A = 13, B = 5, C = 6;
  const auto w = random_vec((int64_t)A * B, 13);
  const auto x = random_vec((int64_t)A * B * C, 14);
  std::vector<double> ref((int64_t)A * C);
  K::ref::weighted_sum_mid_fwd(w.data(), x.data(), ref.data(), A, B, C);
  ParallelOnOff::run([&] {
    std::vector<double> y((int64_t)A * C);
    K::weighted_sum_mid_fwd(w.data(), x.data(), y.data(), A, B, C);
    check_exact(y, ref);
  });

  const int P = 21, N = 3, Cf = 4, Hf = 6, Wf = 7;
  const auto feats = random_vec((int64_t)N * Cf * Hf * Wf, 15);
  std::vector<double> uv((int64_t)P * N * 2);
  std::vector<uint8_t> valid((int64_t)P * N);
  Rng rng(16);
  for (int64_t i = 0; i < (int64_t)P * N; ++i) {
    uv[i * 2 + 0] = rng.uniform(-1.0, Wf + 0.5);
    uv[i * 2 + 1] = rng.uniform(-1.0, Hf + 0.5);
    valid[i] = rng.uniform01() < 0.8 ? 1 : 0;
  }
  std::vector<double> gref((int64_t)P * N * Cf);
  K::ref::epipolar_gather_fwd(feats.data(), uv.data(), valid.data(), gref.data(),
                              P, N, Cf, Hf, Wf);
  ParallelOnOff::run([&] {
    std::vector<double> y((int64_t)P * N * Cf);
    K::epipolar_gather_fwd(feats.data(), uv.data(), valid.data(), y.data(), P, N,
                           Cf, Hf, Wf);
    check_exact(y, gref);
  });
}

TEST_CASE("bilinear upsample matches reference exactly") {
  const int Bn = 1, C = 3, H = 5, W = 4, s = 4;
  const auto x = random_vec((int64_t)Bn * C * H * W, 17);
  std::vector<double> ref((int64_t)Bn * C * H * W * s * s);
  K::ref::upsample_bilinear_fwd(x.data(), ref.data(), Bn, C, H, W, s);
  ParallelOnOff::run([&] {
    std::vector<double> y((int64_t)Bn * C * H * W * s * s);
    K::upsample_bilinear_fwd(x.data(), y.data(), Bn, C, H, W, s);
    check_exact(y, ref);
  });
}

TEST_CASE("thread count does not change results") {
  // Same computation, parallel on/off, bitwise equal outputs.
  const int rows = 50, in_dim = 23, out_dim = 11;
  const auto x = random_vec((int64_t)rows * in_dim, 20);
  const auto w = random_vec((int64_t)in_dim * out_dim, 21);
  std::vector<double> y1((int64_t)rows * out_dim), y2(y1.size());
  K::set_parallel(true);
  K::linear_fwd(x.data(), w.data(), nullptr, y1.data(), rows, in_dim, out_dim);
  K::set_parallel(false);
  K::linear_fwd(x.data(), w.data(), nullptr, y2.data(), rows, in_dim, out_dim);
  K::set_parallel(true);
  check_exact(y1, y2);
}
