// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gpnerf::kernels {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }
int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

#define GP_PAR_FOR _Pragma("omp parallel for schedule(static) if(g_parallel.load())")

// ---- elementwise -------------------------------------------------------

void ew_add(const double* a, const double* b, double* y, int64_t n) {
  GP_PAR_FOR
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void ew_sub(const double* a, const double* b, double* y, int64_t n) {
  GP_PAR_FOR
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

void ew_mul(const double* a, const double* b, double* y, int64_t n) {
  GP_PAR_FOR
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void ew_affine(const double* x, double* y, int64_t n, double mul, double add) {
  GP_PAR_FOR
  for (int64_t i = 0; i < n; ++i) y[i] = mul * x[i] + add;
}

void ew_relu(const double* x, double* y, int64_t n) {
  GP_PAR_FOR
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void ew_relu_bwd(const double* x, const double* dy, double* dx_acc, int64_t n) {
  GP_PAR_FOR
  for (int64_t i = 0; i < n; ++i)
    if (x[i] > 0.0) dx_acc[i] += dy[i];
}

void ew_sigmoid(const double* x, double* y, int64_t n) {
  GP_PAR_FOR
  for (int64_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void ew_sigmoid_bwd(const double* y, const double* dy, double* dx_acc, int64_t n) {
  GP_PAR_FOR
  for (int64_t i = 0; i < n; ++i) dx_acc[i] += dy[i] * y[i] * (1.0 - y[i]);
}

void ew_acc(const double* a, double* acc, int64_t n) {
  GP_PAR_FOR
  for (int64_t i = 0; i < n; ++i) acc[i] += a[i];
}

void ew_scale_acc(const double* a, double scale, double* acc, int64_t n) {
  GP_PAR_FOR
  for (int64_t i = 0; i < n; ++i) acc[i] += scale * a[i];
}

void ew_mul_acc(const double* a, const double* b, double* acc, int64_t n) {
  GP_PAR_FOR
  for (int64_t i = 0; i < n; ++i) acc[i] += a[i] * b[i];
}

// ---- linear -------------------------------------------------------------

void linear_fwd(const double* x, const double* w, const double* b, double* y,
                int64_t rows, int in_dim, int out_dim) {
  GP_PAR_FOR
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x + r * in_dim;
    double* yr = y + r * out_dim;
    for (int o = 0; o < out_dim; ++o) yr[o] = b ? b[o] : 0.0;
    for (int i = 0; i < in_dim; ++i) {
      const double xv = xr[i];
      const double* wi = w + (int64_t)i * out_dim;
      for (int o = 0; o < out_dim; ++o) yr[o] += xv * wi[o];
    }
  }
}

void linear_bwd_x(const double* dy, const double* w, double* dx_acc,
                  int64_t rows, int in_dim, int out_dim) {
  GP_PAR_FOR
  for (int64_t r = 0; r < rows; ++r) {
    const double* dyr = dy + r * out_dim;
    double* dxr = dx_acc + r * in_dim;
    for (int i = 0; i < in_dim; ++i) {
      const double* wi = w + (int64_t)i * out_dim;
      double s = 0.0;
      for (int o = 0; o < out_dim; ++o) s += dyr[o] * wi[o];
      dxr[i] += s;
    }
  }
}

void linear_bwd_w(const double* x, const double* dy, double* dw_acc,
                  int64_t rows, int in_dim, int out_dim) {
  GP_PAR_FOR
  for (int i = 0; i < in_dim; ++i) {
    double* dwi = dw_acc + (int64_t)i * out_dim;
    for (int64_t r = 0; r < rows; ++r) {
      const double xv = x[r * in_dim + i];
      const double* dyr = dy + r * out_dim;
      for (int o = 0; o < out_dim; ++o) dwi[o] += xv * dyr[o];
    }
  }
}

void linear_bwd_b(const double* dy, double* db_acc, int64_t rows, int out_dim) {
  GP_PAR_FOR
  for (int o = 0; o < out_dim; ++o) {
    double s = 0.0;
    for (int64_t r = 0; r < rows; ++r) s += dy[r * out_dim + o];
    db_acc[o] += s;
  }
}

// ---- batched matmul ------------------------------------------------------

void bmm_nt(const double* a, const double* bt, double* y, int B, int M, int N,
            int D, double scale) {
  const int64_t total = (int64_t)B * M;
  GP_PAR_FOR
  for (int64_t bm = 0; bm < total; ++bm) {
    const int b = (int)(bm / M), m = (int)(bm % M);
    const double* am = a + ((int64_t)b * M + m) * D;
    const double* bb = bt + (int64_t)b * N * D;
    double* ym = y + ((int64_t)b * M + m) * N;
    for (int n = 0; n < N; ++n) {
      const double* bn = bb + (int64_t)n * D;
      double s = 0.0;
      for (int d = 0; d < D; ++d) s += am[d] * bn[d];
      ym[n] = scale * s;
    }
  }
}

void bmm_nt_bwd_a(const double* dy, const double* bt, double* da_acc, int B,
                  int M, int N, int D, double scale) {
  const int64_t total = (int64_t)B * M;
  GP_PAR_FOR
  for (int64_t bm = 0; bm < total; ++bm) {
    const int b = (int)(bm / M), m = (int)(bm % M);
    const double* dym = dy + ((int64_t)b * M + m) * N;
    const double* bb = bt + (int64_t)b * N * D;
    double* dam = da_acc + ((int64_t)b * M + m) * D;
    for (int n = 0; n < N; ++n) {
      const double g = scale * dym[n];
      const double* bn = bb + (int64_t)n * D;
      for (int d = 0; d < D; ++d) dam[d] += g * bn[d];
    }
  }
}

void bmm_nt_bwd_b(const double* dy, const double* a, double* dbt_acc, int B,
                  int M, int N, int D, double scale) {
  const int64_t total = (int64_t)B * N;
  GP_PAR_FOR
  for (int64_t bn = 0; bn < total; ++bn) {
    const int b = (int)(bn / N), n = (int)(bn % N);
    const double* ab = a + (int64_t)b * M * D;
    double* dbn = dbt_acc + ((int64_t)b * N + n) * D;
    for (int m = 0; m < M; ++m) {
      const double g = scale * dy[((int64_t)b * M + m) * N + n];
      const double* am = ab + (int64_t)m * D;
      for (int d = 0; d < D; ++d) dbn[d] += g * am[d];
    }
  }
}

void bmm_nn(const double* a, const double* x, double* y, int B, int M, int N,
            int D) {
  const int64_t total = (int64_t)B * M;
  GP_PAR_FOR
  for (int64_t bm = 0; bm < total; ++bm) {
    const int b = (int)(bm / M), m = (int)(bm % M);
    const double* am = a + ((int64_t)b * M + m) * N;
    const double* xb = x + (int64_t)b * N * D;
    double* ym = y + ((int64_t)b * M + m) * D;
    for (int d = 0; d < D; ++d) ym[d] = 0.0;
    for (int n = 0; n < N; ++n) {
      const double av = am[n];
      const double* xn = xb + (int64_t)n * D;
      for (int d = 0; d < D; ++d) ym[d] += av * xn[d];
    }
  }
}

void bmm_nn_bwd_a(const double* dy, const double* x, double* da_acc, int B,
                  int M, int N, int D) {
  const int64_t total = (int64_t)B * M;
  GP_PAR_FOR
  for (int64_t bm = 0; bm < total; ++bm) {
    const int b = (int)(bm / M), m = (int)(bm % M);
    const double* dym = dy + ((int64_t)b * M + m) * D;
    const double* xb = x + (int64_t)b * N * D;
    double* dam = da_acc + ((int64_t)b * M + m) * N;
    for (int n = 0; n < N; ++n) {
      const double* xn = xb + (int64_t)n * D;
      double s = 0.0;
      for (int d = 0; d < D; ++d) s += dym[d] * xn[d];
      dam[n] += s;
    }
  }
}

void bmm_nn_bwd_x(const double* dy, const double* a, double* dx_acc, int B,
                  int M, int N, int D) {
  const int64_t total = (int64_t)B * N;
  GP_PAR_FOR
  for (int64_t bn = 0; bn < total; ++bn) {
    const int b = (int)(bn / N), n = (int)(bn % N);
    double* dxn = dx_acc + ((int64_t)b * N + n) * D;
    for (int m = 0; m < M; ++m) {
      const double av = a[((int64_t)b * M + m) * N + n];
      const double* dym = dy + ((int64_t)b * M + m) * D;
      for (int d = 0; d < D; ++d) dxn[d] += av * dym[d];
    }
  }
}

// ---- softmax --------------------------------------------------------------

void softmax_rows(const double* x, const uint8_t* mask, double* y,
                  int64_t rows, int n) {
  GP_PAR_FOR
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x + r * n;
    const uint8_t* mr = mask ? mask + r * n : nullptr;
    double* yr = y + r * n;
    double mx = -1e300;
    int valid = 0;
    for (int i = 0; i < n; ++i) {
      if (mr && !mr[i]) continue;
      mx = std::max(mx, xr[i]);
      ++valid;
    }
    if (valid == 0) {
      for (int i = 0; i < n; ++i) yr[i] = 0.0;
      continue;
    }
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
      if (mr && !mr[i]) {
        yr[i] = 0.0;
      } else {
        yr[i] = std::exp(xr[i] - mx);
        z += yr[i];
      }
    }
    for (int i = 0; i < n; ++i) yr[i] /= z;  // same op order as the reference
  }
}

void softmax_rows_bwd(const double* y, const double* dy, const uint8_t* mask,
                      double* dx_acc, int64_t rows, int n) {
  GP_PAR_FOR
  for (int64_t r = 0; r < rows; ++r) {
    const double* yr = y + r * n;
    const double* dyr = dy + r * n;
    const uint8_t* mr = mask ? mask + r * n : nullptr;
    double* dxr = dx_acc + r * n;
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += yr[i] * dyr[i];
    for (int i = 0; i < n; ++i) {
      if (mr && !mr[i]) continue;
      dxr[i] += yr[i] * (dyr[i] - dot);
    }
  }
}

// ---- reductions / broadcasts ----------------------------------------------

double sum_all(const double* x, int64_t n) {
  // Serial on purpose: a single fixed accumulation order.
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i];
  return s;
}

void mean_mid_fwd(const double* x, double* y, int64_t A, int B, int C) {
  const double inv = 1.0 / B;
  GP_PAR_FOR
  for (int64_t a = 0; a < A; ++a) {
    const double* xa = x + a * B * C;
    double* ya = y + a * C;
    for (int c = 0; c < C; ++c) ya[c] = 0.0;
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) ya[c] += xa[(int64_t)b * C + c];
    for (int c = 0; c < C; ++c) ya[c] *= inv;
  }
}

void mean_mid_bwd(const double* dy, double* dx_acc, int64_t A, int B, int C) {
  const double inv = 1.0 / B;
  GP_PAR_FOR
  for (int64_t a = 0; a < A; ++a) {
    const double* dya = dy + a * C;
    double* dxa = dx_acc + a * B * C;
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) dxa[(int64_t)b * C + c] += inv * dya[c];
  }
}

void weighted_sum_mid_fwd(const double* w, const double* x, double* y,
                          int64_t A, int B, int C) {
  GP_PAR_FOR
  for (int64_t a = 0; a < A; ++a) {
    const double* wa = w + a * B;
    const double* xa = x + a * B * C;
    double* ya = y + a * C;
    for (int c = 0; c < C; ++c) ya[c] = 0.0;
    for (int b = 0; b < B; ++b) {
      const double wv = wa[b];
      const double* xb = xa + (int64_t)b * C;
      for (int c = 0; c < C; ++c) ya[c] += wv * xb[c];
    }
  }
}

void weighted_sum_mid_bwd_w(const double* dy, const double* x, double* dw_acc,
                            int64_t A, int B, int C) {
  GP_PAR_FOR
  for (int64_t a = 0; a < A; ++a) {
    const double* dya = dy + a * C;
    const double* xa = x + a * B * C;
    double* dwa = dw_acc + a * B;
    for (int b = 0; b < B; ++b) {
      const double* xb = xa + (int64_t)b * C;
      double s = 0.0;
      for (int c = 0; c < C; ++c) s += dya[c] * xb[c];
      dwa[b] += s;
    }
  }
}

void weighted_sum_mid_bwd_x(const double* dy, const double* w, double* dx_acc,
                            int64_t A, int B, int C) {
  GP_PAR_FOR
  for (int64_t a = 0; a < A; ++a) {
    const double* dya = dy + a * C;
    const double* wa = w + a * B;
    double* dxa = dx_acc + a * B * C;
    for (int b = 0; b < B; ++b) {
      const double wv = wa[b];
      double* dxb = dxa + (int64_t)b * C;
      for (int c = 0; c < C; ++c) dxb[c] += wv * dya[c];
    }
  }
}

void masked_mean_mid_fwd(const double* x, const uint8_t* valid, double* y,
                         int64_t A, int B, int C) {
  GP_PAR_FOR
  for (int64_t a = 0; a < A; ++a) {
    const double* xa = x + a * B * C;
    const uint8_t* va = valid + a * B;
    double* ya = y + a * C;
    for (int c = 0; c < C; ++c) ya[c] = 0.0;
    int cnt = 0;
    for (int b = 0; b < B; ++b) {
      if (!va[b]) continue;
      ++cnt;
      const double* xb = xa + (int64_t)b * C;
      for (int c = 0; c < C; ++c) ya[c] += xb[c];
    }
    if (cnt > 1) {
      const double inv = 1.0 / cnt;
      for (int c = 0; c < C; ++c) ya[c] *= inv;
    }
  }
}

void masked_mean_mid_bwd(const double* dy, const uint8_t* valid,
                         double* dx_acc, int64_t A, int B, int C) {
  GP_PAR_FOR
  for (int64_t a = 0; a < A; ++a) {
    const double* dya = dy + a * C;
    const uint8_t* va = valid + a * B;
    double* dxa = dx_acc + a * B * C;
    int cnt = 0;
    for (int b = 0; b < B; ++b) cnt += va[b] ? 1 : 0;
    if (cnt == 0) continue;
    const double inv = 1.0 / cnt;
    for (int b = 0; b < B; ++b) {
      if (!va[b]) continue;
      double* dxb = dxa + (int64_t)b * C;
      for (int c = 0; c < C; ++c) dxb[c] += inv * dya[c];
    }
  }
}

void add_bcast_mid_fwd(const double* x, const double* q, double sign,
                       double* y, int64_t A, int B, int C) {
  GP_PAR_FOR
  for (int64_t a = 0; a < A; ++a) {
    const double* xa = x + a * B * C;
    const double* qa = q + a * C;
    double* ya = y + a * B * C;
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c)
        ya[(int64_t)b * C + c] = xa[(int64_t)b * C + c] + sign * qa[c];
  }
}

void add_bcast_mid_bwd_q(const double* dy, double sign, double* dq_acc,
                         int64_t A, int B, int C) {
  GP_PAR_FOR
  for (int64_t a = 0; a < A; ++a) {
    const double* dya = dy + a * B * C;
    double* dqa = dq_acc + a * C;
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) dqa[c] += sign * dya[(int64_t)b * C + c];
  }
}

void mul_rows_fwd(const double* x, const double* m, double* y, int64_t rows,
                  int d) {
  GP_PAR_FOR
  for (int64_t r = 0; r < rows; ++r) {
    const double mv = m[r];
    for (int i = 0; i < d; ++i) y[r * d + i] = mv * x[r * d + i];
  }
}

// ---- conv2d ----------------------------------------------------------------

void conv2d_fwd(const double* x, const double* w, const double* b, double* y,
                int Bn, int Ci, int H, int W, int Co, int kh, int kw,
                int stride, int pad) {
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  const int64_t total = (int64_t)Bn * Co;
  GP_PAR_FOR
  for (int64_t bc = 0; bc < total; ++bc) {
    const int bi = (int)(bc / Co), co = (int)(bc % Co);
    const double* xb = x + (int64_t)bi * Ci * H * W;
    double* yb = y + ((int64_t)bi * Co + co) * Ho * Wo;
    const double* wc = w + (int64_t)co * Ci * kh * kw;
    for (int ho = 0; ho < Ho; ++ho) {
      for (int wo = 0; wo < Wo; ++wo) {
        double s = b ? b[co] : 0.0;
        const int hi0 = ho * stride - pad, wi0 = wo * stride - pad;
        for (int ci = 0; ci < Ci; ++ci) {
          const double* xc = xb + (int64_t)ci * H * W;
          const double* wk = wc + (int64_t)ci * kh * kw;
          for (int u = 0; u < kh; ++u) {
            const int hi = hi0 + u;
            if (hi < 0 || hi >= H) continue;
            for (int v = 0; v < kw; ++v) {
              const int wi = wi0 + v;
              if (wi < 0 || wi >= W) continue;
              s += xc[(int64_t)hi * W + wi] * wk[u * kw + v];
            }
          }
        }
        yb[(int64_t)ho * Wo + wo] = s;
      }
    }
  }
}

void conv2d_bwd_x(const double* dy, const double* w, double* dx_acc, int Bn,
                  int Ci, int H, int W, int Co, int kh, int kw, int stride,
                  int pad) {
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  const int64_t total = (int64_t)Bn * Ci;
  GP_PAR_FOR
  for (int64_t bc = 0; bc < total; ++bc) {
    const int bi = (int)(bc / Ci), ci = (int)(bc % Ci);
    double* dxc = dx_acc + ((int64_t)bi * Ci + ci) * H * W;
    const double* dyb = dy + (int64_t)bi * Co * Ho * Wo;
    for (int hi = 0; hi < H; ++hi) {
      for (int wi = 0; wi < W; ++wi) {
        double s = 0.0;
        for (int u = 0; u < kh; ++u) {
          const int hnum = hi + pad - u;
          if (hnum < 0 || hnum % stride) continue;
          const int ho = hnum / stride;
          if (ho >= Ho) continue;
          for (int v = 0; v < kw; ++v) {
            const int wnum = wi + pad - v;
            if (wnum < 0 || wnum % stride) continue;
            const int wo = wnum / stride;
            if (wo >= Wo) continue;
            for (int co = 0; co < Co; ++co) {
              s += dyb[((int64_t)co * Ho + ho) * Wo + wo] *
                   w[(((int64_t)co * Ci + ci) * kh + u) * kw + v];
            }
          }
        }
        dxc[(int64_t)hi * W + wi] += s;
      }
    }
  }
}

void conv2d_bwd_w(const double* x, const double* dy, double* dw_acc, int Bn,
                  int Ci, int H, int W, int Co, int kh, int kw, int stride,
                  int pad) {
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  const int64_t total = (int64_t)Co * Ci * kh * kw;
  GP_PAR_FOR
  for (int64_t idx = 0; idx < total; ++idx) {
    const int v = (int)(idx % kw);
    const int u = (int)((idx / kw) % kh);
    const int ci = (int)((idx / (kw * kh)) % Ci);
    const int co = (int)(idx / ((int64_t)kw * kh * Ci));
    double s = 0.0;
    for (int bi = 0; bi < Bn; ++bi) {
      const double* xc = x + ((int64_t)bi * Ci + ci) * H * W;
      const double* dyc = dy + ((int64_t)bi * Co + co) * Ho * Wo;
      for (int ho = 0; ho < Ho; ++ho) {
        const int hi = ho * stride - pad + u;
        if (hi < 0 || hi >= H) continue;
        for (int wo = 0; wo < Wo; ++wo) {
          const int wi = wo * stride - pad + v;
          if (wi < 0 || wi >= W) continue;
          s += xc[(int64_t)hi * W + wi] * dyc[(int64_t)ho * Wo + wo];
        }
      }
    }
    dw_acc[idx] += s;
  }
}

void conv2d_bwd_b(const double* dy, double* db_acc, int Bn, int Co, int Ho,
                  int Wo) {
  GP_PAR_FOR
  for (int co = 0; co < Co; ++co) {
    double s = 0.0;
    for (int bi = 0; bi < Bn; ++bi) {
      const double* dyc = dy + ((int64_t)bi * Co + co) * Ho * Wo;
      for (int64_t i = 0; i < (int64_t)Ho * Wo; ++i) s += dyc[i];
    }
    db_acc[co] += s;
  }
}

// ---- transposed conv 2x2 stride 2 ------------------------------------------

void convtr2_fwd(const double* x, const double* w, const double* b, double* y,
                 int Bn, int Ci, int H, int W, int Co) {
  const int Ho = 2 * H, Wo = 2 * W;
  const int64_t total = (int64_t)Bn * Co;
  GP_PAR_FOR
  for (int64_t bc = 0; bc < total; ++bc) {
    const int bi = (int)(bc / Co), co = (int)(bc % Co);
    const double* xb = x + (int64_t)bi * Ci * H * W;
    double* yb = y + ((int64_t)bi * Co + co) * Ho * Wo;
    for (int ho = 0; ho < Ho; ++ho) {
      const int hi = ho / 2, u = ho % 2;
      for (int wo = 0; wo < Wo; ++wo) {
        const int wi = wo / 2, v = wo % 2;
        double s = b ? b[co] : 0.0;
        for (int ci = 0; ci < Ci; ++ci) {
          s += xb[((int64_t)ci * H + hi) * W + wi] *
               w[(((int64_t)ci * Co + co) * 2 + u) * 2 + v];
        }
        yb[(int64_t)ho * Wo + wo] = s;
      }
    }
  }
}

void convtr2_bwd_x(const double* dy, const double* w, double* dx_acc, int Bn,
                   int Ci, int H, int W, int Co) {
  const int Ho = 2 * H, Wo = 2 * W;
  const int64_t total = (int64_t)Bn * Ci;
  GP_PAR_FOR
  for (int64_t bc = 0; bc < total; ++bc) {
    const int bi = (int)(bc / Ci), ci = (int)(bc % Ci);
    const double* dyb = dy + (int64_t)bi * Co * Ho * Wo;
    double* dxc = dx_acc + ((int64_t)bi * Ci + ci) * H * W;
    for (int hi = 0; hi < H; ++hi) {
      for (int wi = 0; wi < W; ++wi) {
        double s = 0.0;
        for (int co = 0; co < Co; ++co) {
          const double* dyc = dyb + (int64_t)co * Ho * Wo;
          for (int u = 0; u < 2; ++u)
            for (int v = 0; v < 2; ++v)
              s += dyc[(int64_t)(2 * hi + u) * Wo + (2 * wi + v)] *
                   w[(((int64_t)ci * Co + co) * 2 + u) * 2 + v];
        }
        dxc[(int64_t)hi * W + wi] += s;
      }
    }
  }
}

void convtr2_bwd_w(const double* x, const double* dy, double* dw_acc, int Bn,
                   int Ci, int H, int W, int Co) {
  const int Ho = 2 * H, Wo = 2 * W;
  const int64_t total = (int64_t)Ci * Co * 4;
  GP_PAR_FOR
  for (int64_t idx = 0; idx < total; ++idx) {
    const int v = (int)(idx % 2);
    const int u = (int)((idx / 2) % 2);
    const int co = (int)((idx / 4) % Co);
    const int ci = (int)(idx / (4 * (int64_t)Co));
    double s = 0.0;
    for (int bi = 0; bi < Bn; ++bi) {
      const double* xc = x + ((int64_t)bi * Ci + ci) * H * W;
      const double* dyc = dy + ((int64_t)bi * Co + co) * Ho * Wo;
      for (int hi = 0; hi < H; ++hi)
        for (int wi = 0; wi < W; ++wi)
          s += xc[(int64_t)hi * W + wi] *
               dyc[(int64_t)(2 * hi + u) * Wo + (2 * wi + v)];
    }
    dw_acc[idx] += s;
  }
}

void convtr2_bwd_b(const double* dy, double* db_acc, int Bn, int Co, int Ho,
                   int Wo) {
  conv2d_bwd_b(dy, db_acc, Bn, Co, Ho, Wo);
}

// ---- resampling -------------------------------------------------------------

void avgpool_fwd(const double* x, double* y, int Bn, int C, int H, int W,
                 int k) {
  const int Ho = H / k, Wo = W / k;
  const double inv = 1.0 / (k * k);
  const int64_t total = (int64_t)Bn * C;
  GP_PAR_FOR
  for (int64_t bc = 0; bc < total; ++bc) {
    const double* xc = x + bc * H * W;
    double* yc = y + bc * Ho * Wo;
    for (int ho = 0; ho < Ho; ++ho)
      for (int wo = 0; wo < Wo; ++wo) {
        double s = 0.0;
        for (int u = 0; u < k; ++u)
          for (int v = 0; v < k; ++v)
            s += xc[(int64_t)(ho * k + u) * W + (wo * k + v)];
        yc[(int64_t)ho * Wo + wo] = s * inv;
      }
  }
}

void avgpool_bwd(const double* dy, double* dx_acc, int Bn, int C, int H, int W,
                 int k) {
  const int Ho = H / k, Wo = W / k;
  const double inv = 1.0 / (k * k);
  const int64_t total = (int64_t)Bn * C;
  GP_PAR_FOR
  for (int64_t bc = 0; bc < total; ++bc) {
    const double* dyc = dy + bc * Ho * Wo;
    double* dxc = dx_acc + bc * H * W;
    for (int hi = 0; hi < H; ++hi)
      for (int wi = 0; wi < W; ++wi)
        dxc[(int64_t)hi * W + wi] += inv * dyc[(int64_t)(hi / k) * Wo + (wi / k)];
  }
}

void upsample_nearest2_fwd(const double* x, double* y, int Bn, int C, int H,
                           int W) {
  const int Ho = 2 * H, Wo = 2 * W;
  const int64_t total = (int64_t)Bn * C;
  GP_PAR_FOR
  for (int64_t bc = 0; bc < total; ++bc) {
    const double* xc = x + bc * H * W;
    double* yc = y + bc * Ho * Wo;
    for (int ho = 0; ho < Ho; ++ho)
      for (int wo = 0; wo < Wo; ++wo)
        yc[(int64_t)ho * Wo + wo] = xc[(int64_t)(ho / 2) * W + (wo / 2)];
  }
}

void upsample_nearest2_bwd(const double* dy, double* dx_acc, int Bn, int C,
                           int H, int W) {
  const int Wo = 2 * W;
  const int64_t total = (int64_t)Bn * C;
  GP_PAR_FOR
  for (int64_t bc = 0; bc < total; ++bc) {
    const double* dyc = dy + bc * 4 * H * W;
    double* dxc = dx_acc + bc * H * W;
    for (int hi = 0; hi < H; ++hi)
      for (int wi = 0; wi < W; ++wi) {
        double s = 0.0;
        for (int u = 0; u < 2; ++u)
          for (int v = 0; v < 2; ++v)
            s += dyc[(int64_t)(2 * hi + u) * Wo + (2 * wi + v)];
        dxc[(int64_t)hi * W + wi] += s;
      }
  }
}

namespace {
// align_corners=false source coordinate with clamped taps
inline void bilin_taps(int o, int s, int n, int& i0, int& i1, double& t) {
  const double c = (o + 0.5) / s - 0.5;
  double f = std::floor(c);
  t = c - f;
  i0 = (int)f;
  i1 = i0 + 1;
  i0 = std::clamp(i0, 0, n - 1);
  i1 = std::clamp(i1, 0, n - 1);
}
}  // namespace

void upsample_bilinear_fwd(const double* x, double* y, int Bn, int C, int H,
                           int W, int s) {
  const int Ho = s * H, Wo = s * W;
  const int64_t total = (int64_t)Bn * C;
  GP_PAR_FOR
  for (int64_t bc = 0; bc < total; ++bc) {
    const double* xc = x + bc * H * W;
    double* yc = y + bc * Ho * Wo;
    for (int ho = 0; ho < Ho; ++ho) {
      int y0, y1;
      double ty;
      bilin_taps(ho, s, H, y0, y1, ty);
      for (int wo = 0; wo < Wo; ++wo) {
        int x0, x1;
        double tx;
        bilin_taps(wo, s, W, x0, x1, tx);
        const double a = xc[(int64_t)y0 * W + x0], b = xc[(int64_t)y0 * W + x1];
        const double c = xc[(int64_t)y1 * W + x0], d = xc[(int64_t)y1 * W + x1];
        yc[(int64_t)ho * Wo + wo] =
            (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
      }
    }
  }
}

void upsample_bilinear_bwd(const double* dy, double* dx_acc, int Bn, int C,
                           int H, int W, int s) {
  const int Ho = s * H, Wo = s * W;
  const int64_t total = (int64_t)Bn * C;
  GP_PAR_FOR
  for (int64_t bc = 0; bc < total; ++bc) {
    const double* dyc = dy + bc * Ho * Wo;
    double* dxc = dx_acc + bc * H * W;
    for (int hi = 0; hi < H; ++hi) {
      const int ho_lo = std::max(0, (hi - 1) * s), ho_hi = std::min(Ho - 1, (hi + 2) * s);
      for (int wi = 0; wi < W; ++wi) {
        const int wo_lo = std::max(0, (wi - 1) * s), wo_hi = std::min(Wo - 1, (wi + 2) * s);
        double acc = 0.0;
        for (int ho = ho_lo; ho <= ho_hi; ++ho) {
          int y0, y1;
          double ty;
          bilin_taps(ho, s, H, y0, y1, ty);
          const double wy = (y0 == hi ? 1 - ty : 0.0) + (y1 == hi ? ty : 0.0);
          if (wy == 0.0) continue;
          for (int wo = wo_lo; wo <= wo_hi; ++wo) {
            int x0, x1;
            double tx;
            bilin_taps(wo, s, W, x0, x1, tx);
            const double wx = (x0 == wi ? 1 - tx : 0.0) + (x1 == wi ? tx : 0.0);
            if (wx == 0.0) continue;
            acc += wy * wx * dyc[(int64_t)ho * Wo + wo];
          }
        }
        dxc[(int64_t)hi * W + wi] += acc;
      }
    }
  }
}

// ---- epipolar gather ---------------------------------------------------------

namespace {
inline void gather_taps(double u, double v, int Hf, int Wf, int& x0, int& x1,
                        int& y0, int& y1, double& tx, double& ty) {
  double fx = std::floor(u), fy = std::floor(v);
  tx = u - fx;
  ty = v - fy;
  x0 = std::clamp((int)fx, 0, Wf - 1);
  x1 = std::clamp((int)fx + 1, 0, Wf - 1);
  y0 = std::clamp((int)fy, 0, Hf - 1);
  y1 = std::clamp((int)fy + 1, 0, Hf - 1);
}
}  // namespace

void epipolar_gather_fwd(const double* feats, const double* uv,
                         const uint8_t* valid, double* out, int64_t P, int N,
                         int C, int Hf, int Wf) {
  GP_PAR_FOR
  for (int64_t p = 0; p < P; ++p) {
    for (int n = 0; n < N; ++n) {
      double* o = out + (p * N + n) * C;
      if (!valid[p * N + n]) {
        for (int c = 0; c < C; ++c) o[c] = 0.0;
        continue;
      }
      const double u = uv[(p * N + n) * 2 + 0], v = uv[(p * N + n) * 2 + 1];
      int x0, x1, y0, y1;
      double tx, ty;
      gather_taps(u, v, Hf, Wf, x0, x1, y0, y1, tx, ty);
      const double* fn = feats + (int64_t)n * C * Hf * Wf;
      for (int c = 0; c < C; ++c) {
        const double* fc = fn + (int64_t)c * Hf * Wf;
        o[c] = (1 - ty) * ((1 - tx) * fc[(int64_t)y0 * Wf + x0] +
                           tx * fc[(int64_t)y0 * Wf + x1]) +
               ty * ((1 - tx) * fc[(int64_t)y1 * Wf + x0] +
                     tx * fc[(int64_t)y1 * Wf + x1]);
      }
    }
  }
}

void epipolar_gather_bwd(const double* dout, const double* uv,
                         const uint8_t* valid, double* dfeats_acc, int64_t P,
                         int N, int C, int Hf, int Wf) {
  // Parallel over views: each view's grid is written by exactly one thread,
  // points visited in fixed order.
  GP_PAR_FOR
  for (int n = 0; n < N; ++n) {
    double* dfn = dfeats_acc + (int64_t)n * C * Hf * Wf;
    for (int64_t p = 0; p < P; ++p) {
      if (!valid[p * N + n]) continue;
      const double u = uv[(p * N + n) * 2 + 0], v = uv[(p * N + n) * 2 + 1];
      int x0, x1, y0, y1;
      double tx, ty;
      gather_taps(u, v, Hf, Wf, x0, x1, y0, y1, tx, ty);
      const double w00 = (1 - ty) * (1 - tx), w01 = (1 - ty) * tx;
      const double w10 = ty * (1 - tx), w11 = ty * tx;
      const double* g = dout + (p * N + n) * C;
      for (int c = 0; c < C; ++c) {
        double* fc = dfn + (int64_t)c * Hf * Wf;
        fc[(int64_t)y0 * Wf + x0] += w00 * g[c];
        fc[(int64_t)y0 * Wf + x1] += w01 * g[c];
        fc[(int64_t)y1 * Wf + x0] += w10 * g[c];
        fc[(int64_t)y1 * Wf + x1] += w11 * g[c];
      }
    }
  }
}

// ---- fused losses --------------------------------------------------------------

double ce_fwd(const double* logits, const int32_t* labels, const double* w,
              int64_t P, int C) {
  double loss = 0.0;
  for (int64_t p = 0; p < P; ++p) {
    const double* lp = logits + p * C;
    double mx = lp[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, lp[c]);
    double z = 0.0;
    for (int c = 0; c < C; ++c) z += std::exp(lp[c] - mx);
    const double lse = mx + std::log(z);
    loss += (w ? w[p] : 1.0) * (lse - lp[labels[p]]);
  }
  return loss;
}

void ce_bwd(const double* logits, const int32_t* labels, const double* w,
            double gscale, double* dlogits_acc, int64_t P, int C) {
  GP_PAR_FOR
  for (int64_t p = 0; p < P; ++p) {
    const double* lp = logits + p * C;
    double* dp = dlogits_acc + p * C;
    double mx = lp[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, lp[c]);
    double z = 0.0;
    for (int c = 0; c < C; ++c) z += std::exp(lp[c] - mx);
    const double g = gscale * (w ? w[p] : 1.0);
    for (int c = 0; c < C; ++c) {
      double soft = std::exp(lp[c] - mx) / z;
      dp[c] += g * (soft - (labels[p] == c ? 1.0 : 0.0));
    }
  }
}

void cos_rows_fwd(const double* a, const double* b, double eps, double* y,
                  int64_t R, int D) {
  GP_PAR_FOR
  for (int64_t r = 0; r < R; ++r) {
    const double* ar = a + r * D;
    const double* br = b + r * D;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int d = 0; d < D; ++d) {
      dot += ar[d] * br[d];
      na += ar[d] * ar[d];
      nb += br[d] * br[d];
    }
    y[r] = dot / (std::sqrt(na) * std::sqrt(nb) + eps);
  }
}

void cos_rows_bwd(const double* a, const double* b, double eps,
                  const double* dcos, double* da_acc, double* db_acc,
                  int64_t R, int D) {
  GP_PAR_FOR
  for (int64_t r = 0; r < R; ++r) {
    const double* ar = a + r * D;
    const double* br = b + r * D;
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (int d = 0; d < D; ++d) {
      dot += ar[d] * br[d];
      na2 += ar[d] * ar[d];
      nb2 += br[d] * br[d];
    }
    const double na = std::sqrt(na2), nb = std::sqrt(nb2);
    const double q = na * nb + eps;
    const double g = dcos[r];
    if (da_acc) {
      // d/da [dot/q] = b/q - dot*(nb/na)*a/q^2, guarded at a == 0
      const double k = na > 0.0 ? dot * nb / (na * q * q) : 0.0;
      double* dar = da_acc + r * D;
      for (int d = 0; d < D; ++d) dar[d] += g * (br[d] / q - k * ar[d]);
    }
    if (db_acc) {
      const double k = nb > 0.0 ? dot * na / (nb * q * q) : 0.0;
      double* dbr = db_acc + r * D;
      for (int d = 0; d < D; ++d) dbr[d] += g * (ar[d] / q - k * br[d]);
    }
  }
}

}  // namespace gpnerf::kernels
