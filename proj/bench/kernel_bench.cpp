// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Compares the OpenMP kernels against the serial references on shapes a
// training step actually uses, and checks exact agreement while at it.
//
//   ./gpnerf_bench [repeats]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
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

double time_of(const std::function<void()>& fn, int repeats) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
             .count() /
         repeats;
}

struct Row {
  std::string name;
  double serial_ms, parallel_ms;
  bool exact;
};

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 20;
  std::vector<Row> rows;

  auto bench = [&](const std::string& name, int64_t out_n,
                   const std::function<void(double*)>& ref,
                   const std::function<void(double*)>& fast) {
    std::vector<double> a(out_n), b(out_n);
    const double ts = time_of([&] { ref(a.data()); }, repeats);
    K::set_parallel(true);
    const double tp = time_of([&] { fast(b.data()); }, repeats);
    rows.push_back({name, ts * 1e3, tp * 1e3,
                    std::memcmp(a.data(), b.data(), out_n * 8) == 0});
  };

  {  // dense projection, training-step scale
    const int rows_n = 4096, in = 64, out = 64;
    const auto x = random_vec((int64_t)rows_n * in, 1);
    const auto w = random_vec((int64_t)in * out, 2);
    const auto bias = random_vec(out, 3);
    bench(
        "linear 4096x64x64", (int64_t)rows_n * out,
        [&](double* y) {
          K::ref::linear_fwd(x.data(), w.data(), bias.data(), y, rows_n, in, out);
        },
        [&](double* y) {
          K::linear_fwd(x.data(), w.data(), bias.data(), y, rows_n, in, out);
        });
  }
  {  // ray attention logits
    const int B = 128, M = 48, D = 32;
    const auto q = random_vec((int64_t)B * M * D, 4);
    const auto k = random_vec((int64_t)B * M * D, 5);
    bench(
        "bmm_nt 128x48x48x32", (int64_t)B * M * M,
        [&](double* y) { K::ref::bmm_nt(q.data(), k.data(), y, B, M, M, D, 0.2); },
        [&](double* y) { K::bmm_nt(q.data(), k.data(), y, B, M, M, D, 0.2); });
  }
  {  // attention application
    const int B = 128, M = 48, D = 32;
    const auto a = random_vec((int64_t)B * M * M, 6);
    const auto v = random_vec((int64_t)B * M * D, 7);
    bench(
        "bmm_nn 128x48x48x32", (int64_t)B * M * D,
        [&](double* y) { K::ref::bmm_nn(a.data(), v.data(), y, B, M, M, D); },
        [&](double* y) { K::bmm_nn(a.data(), v.data(), y, B, M, M, D); });
  }
  {  // encoder stem conv
    const int Bn = 8, Ci = 3, H = 64, W = 64, Co = 16;
    const auto x = random_vec((int64_t)Bn * Ci * H * W, 8);
    const auto w = random_vec((int64_t)Co * Ci * 9, 9);
    const auto bias = random_vec(Co, 10);
    const int Ho = (H + 2 - 3) / 2 + 1, Wo = Ho;
    bench(
        "conv2d 8x3x64x64 -> 16 s2", (int64_t)Bn * Co * Ho * Wo,
        [&](double* y) {
          K::ref::conv2d_fwd(x.data(), w.data(), bias.data(), y, Bn, Ci, H, W,
                             Co, 3, 3, 2, 1);
        },
        [&](double* y) {
          K::conv2d_fwd(x.data(), w.data(), bias.data(), y, Bn, Ci, H, W, Co, 3,
                        3, 2, 1);
        });
  }
  {  // epipolar feature gather
    const int64_t P = 6144;
    const int N = 6, C = 64, Hf = 16, Wf = 16;
    const auto feats = random_vec((int64_t)N * C * Hf * Wf, 11);
    auto uv = random_vec(P * N * 2, 12);
    std::vector<uint8_t> valid(P * N, 1);
    for (int64_t i = 0; i < P * N; ++i) {
      uv[i * 2 + 0] = 7.0 + 6.0 * uv[i * 2 + 0] / 4.0;
      uv[i * 2 + 1] = 7.0 + 6.0 * uv[i * 2 + 1] / 4.0;
    }
    bench(
        "epipolar_gather 6144x6x64", P * N * C,
        [&](double* y) {
          K::ref::epipolar_gather_fwd(feats.data(), uv.data(), valid.data(), y,
                                      P, N, C, Hf, Wf);
        },
        [&](double* y) {
          K::epipolar_gather_fwd(feats.data(), uv.data(), valid.data(), y, P, N,
                                 C, Hf, Wf);
        });
  }
  {  // softmax over views
    const int64_t rows = 6144;
    const int n = 10;
    const auto x = random_vec(rows * n, 13);
    std::vector<uint8_t> mask(rows * n, 1);
    bench(
        "softmax 6144x10", rows * n,
        [&](double* y) { K::ref::softmax_rows(x.data(), mask.data(), y, rows, n); },
        [&](double* y) { K::softmax_rows(x.data(), mask.data(), y, rows, n); });
  }
  {  // logit upsample
    const int Bn = 1, C = 8, H = 16, W = 16, s = 4;
    const auto x = random_vec((int64_t)Bn * C * H * W, 14);
    bench(
        "upsample_bilinear x4 8ch", (int64_t)Bn * C * H * W * s * s,
        [&](double* y) { K::ref::upsample_bilinear_fwd(x.data(), y, Bn, C, H, W, s); },
        [&](double* y) { K::upsample_bilinear_fwd(x.data(), y, Bn, C, H, W, s); });
  }

  std::printf("%-28s %12s %12s %9s %7s\n", "kernel", "serial(ms)", "openmp(ms)",
              "speedup", "exact");
  for (const auto& r : rows)
    std::printf("%-28s %12.3f %12.3f %8.2fx %7s\n", r.name.c_str(), r.serial_ms,
                r.parallel_ms, r.serial_ms / r.parallel_ms,
                r.exact ? "yes" : "NO");
  std::printf("threads: %d\n", K::max_threads());
  bool all_exact = true;
  for (const auto& r : rows) all_exact = all_exact && r.exact;
  return all_exact ? 0 : 1;
}
