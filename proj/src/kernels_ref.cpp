// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Naive serial reference kernels. Written independently of the OpenMP
// versions, loop-per-definition, so parity tests catch indexing mistakes in
// either side. Also the baseline for the kernel benchmark.

#include <algorithm>
#include <cmath>

#include "gpnerf/kernels.hpp"

namespace gpnerf::kernels::ref {

void linear_fwd(const double* x, const double* w, const double* b, double* y,
                int64_t rows, int in_dim, int out_dim) {
  for (int64_t r = 0; r < rows; ++r)
    for (int o = 0; o < out_dim; ++o) {
      double s = b ? b[o] : 0.0;
      for (int i = 0; i < in_dim; ++i)
        s += x[r * in_dim + i] * w[(int64_t)i * out_dim + o];
      y[r * out_dim + o] = s;
    }
}

void bmm_nt(const double* a, const double* bt, double* y, int B, int M, int N,
            int D, double scale) {
  for (int b = 0; b < B; ++b)
    for (int m = 0; m < M; ++m)
      for (int n = 0; n < N; ++n) {
        double s = 0.0;
        for (int d = 0; d < D; ++d)
          s += a[((int64_t)b * M + m) * D + d] * bt[((int64_t)b * N + n) * D + d];
        y[((int64_t)b * M + m) * N + n] = scale * s;
      }
}

void bmm_nn(const double* a, const double* x, double* y, int B, int M, int N,
            int D) {
  for (int b = 0; b < B; ++b)
    for (int m = 0; m < M; ++m)
      for (int d = 0; d < D; ++d) {
        double s = 0.0;
        for (int n = 0; n < N; ++n)
          s += a[((int64_t)b * M + m) * N + n] * x[((int64_t)b * N + n) * D + d];
        y[((int64_t)b * M + m) * D + d] = s;
      }
}

void softmax_rows(const double* x, const uint8_t* mask, double* y,
                  int64_t rows, int n) {
  for (int64_t r = 0; r < rows; ++r) {
    int valid = 0;
    double mx = -1e300;
    for (int i = 0; i < n; ++i) {
      if (mask && !mask[r * n + i]) continue;
      ++valid;
      mx = std::max(mx, x[r * n + i]);
    }
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
      const bool ok = !mask || mask[r * n + i];
      y[r * n + i] = ok && valid ? std::exp(x[r * n + i] - mx) : 0.0;
      z += y[r * n + i];
    }
    if (valid)
      for (int i = 0; i < n; ++i) y[r * n + i] /= z;
  }
}

void conv2d_fwd(const double* x, const double* w, const double* b, double* y,
                int Bn, int Ci, int H, int W, int Co, int kh, int kw,
                int stride, int pad) {
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  for (int bi = 0; bi < Bn; ++bi)
    for (int co = 0; co < Co; ++co)
      for (int ho = 0; ho < Ho; ++ho)
        for (int wo = 0; wo < Wo; ++wo) {
          double s = b ? b[co] : 0.0;
          for (int ci = 0; ci < Ci; ++ci)
            for (int u = 0; u < kh; ++u)
              for (int v = 0; v < kw; ++v) {
                const int hi = ho * stride - pad + u;
                const int wi = wo * stride - pad + v;
                if (hi < 0 || hi >= H || wi < 0 || wi >= W) continue;
                s += x[(((int64_t)bi * Ci + ci) * H + hi) * W + wi] *
                     w[(((int64_t)co * Ci + ci) * kh + u) * kw + v];
              }
          y[(((int64_t)bi * Co + co) * Ho + ho) * Wo + wo] = s;
        }
}

void weighted_sum_mid_fwd(const double* w, const double* x, double* y,
                          int64_t A, int B, int C) {
  for (int64_t a = 0; a < A; ++a)
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int b = 0; b < B; ++b) s += w[a * B + b] * x[(a * B + b) * C + c];
      y[a * C + c] = s;
    }
}

void epipolar_gather_fwd(const double* feats, const double* uv,
                         const uint8_t* valid, double* out, int64_t P, int N,
                         int C, int Hf, int Wf) {
  for (int64_t p = 0; p < P; ++p)
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        double val = 0.0;
        if (valid[p * N + n]) {
          const double u = uv[(p * N + n) * 2 + 0];
          const double v = uv[(p * N + n) * 2 + 1];
          const int x0 = std::clamp((int)std::floor(u), 0, Wf - 1);
          const int y0 = std::clamp((int)std::floor(v), 0, Hf - 1);
          const int x1 = std::clamp((int)std::floor(u) + 1, 0, Wf - 1);
          const int y1 = std::clamp((int)std::floor(v) + 1, 0, Hf - 1);
          const double tx = u - std::floor(u), ty = v - std::floor(v);
          const double* fc = feats + ((int64_t)n * C + c) * Hf * Wf;
          val = (1 - ty) * ((1 - tx) * fc[(int64_t)y0 * Wf + x0] +
                            tx * fc[(int64_t)y0 * Wf + x1]) +
                ty * ((1 - tx) * fc[(int64_t)y1 * Wf + x0] +
                      tx * fc[(int64_t)y1 * Wf + x1]);
        }
        out[(p * N + n) * C + c] = val;
      }
}

void upsample_bilinear_fwd(const double* x, double* y, int Bn, int C, int H,
                           int W, int s) {
  const int Ho = s * H, Wo = s * W;
  for (int64_t bc = 0; bc < (int64_t)Bn * C; ++bc)
    for (int ho = 0; ho < Ho; ++ho)
      for (int wo = 0; wo < Wo; ++wo) {
        const double cy = (ho + 0.5) / s - 0.5, cx = (wo + 0.5) / s - 0.5;
        const int y0 = std::clamp((int)std::floor(cy), 0, H - 1);
        const int y1 = std::clamp((int)std::floor(cy) + 1, 0, H - 1);
        const int x0 = std::clamp((int)std::floor(cx), 0, W - 1);
        const int x1 = std::clamp((int)std::floor(cx) + 1, 0, W - 1);
        const double ty = cy - std::floor(cy), tx = cx - std::floor(cx);
        const double* xc = x + bc * H * W;
        y[bc * Ho * Wo + (int64_t)ho * Wo + wo] =
            (1 - ty) * ((1 - tx) * xc[(int64_t)y0 * W + x0] +
                        tx * xc[(int64_t)y0 * W + x1]) +
            ty * ((1 - tx) * xc[(int64_t)y1 * W + x0] +
                  tx * xc[(int64_t)y1 * W + x1]);
      }
}

}  // namespace gpnerf::kernels::ref
