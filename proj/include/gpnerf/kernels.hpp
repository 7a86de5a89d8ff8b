// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Numeric kernels. The primary implementations parallelize with OpenMP over
// independent output elements; every accumulation runs in a fixed serial
// order inside one thread, so results are bit-identical for any thread
// count (and to the serial reference in kernels::ref, which is kept for
// parity tests and the kernel benchmark).
#pragma once

#include <cstdint>

namespace gpnerf::kernels {

/// Runtime switch for the OpenMP paths (parity tests flip it).
void set_parallel(bool enabled);
bool parallel_enabled();
int max_threads();

// ---- elementwise -------------------------------------------------------
void ew_add(const double* a, const double* b, double* y, int64_t n);
void ew_sub(const double* a, const double* b, double* y, int64_t n);
void ew_mul(const double* a, const double* b, double* y, int64_t n);
void ew_affine(const double* x, double* y, int64_t n, double mul, double add);
void ew_relu(const double* x, double* y, int64_t n);
void ew_relu_bwd(const double* x, const double* dy, double* dx_acc, int64_t n);
void ew_sigmoid(const double* x, double* y, int64_t n);
void ew_sigmoid_bwd(const double* y, const double* dy, double* dx_acc, int64_t n);
void ew_acc(const double* a, double* acc, int64_t n);
void ew_scale_acc(const double* a, double scale, double* acc, int64_t n);
void ew_mul_acc(const double* a, const double* b, double* acc, int64_t n);

// ---- dense linear: x[rows,in] * W[in,out] + b --------------------------
void linear_fwd(const double* x, const double* w, const double* b, double* y,
                int64_t rows, int in_dim, int out_dim);
void linear_bwd_x(const double* dy, const double* w, double* dx_acc,
                  int64_t rows, int in_dim, int out_dim);
void linear_bwd_w(const double* x, const double* dy, double* dw_acc,
                  int64_t rows, int in_dim, int out_dim);
void linear_bwd_b(const double* dy, double* db_acc, int64_t rows, int out_dim);

// ---- batched matmul ----------------------------------------------------
// y[b,m,n] = scale * sum_d a[b,m,d] * bt[b,n,d]
void bmm_nt(const double* a, const double* bt, double* y, int B, int M, int N,
            int D, double scale);
void bmm_nt_bwd_a(const double* dy, const double* bt, double* da_acc, int B,
                  int M, int N, int D, double scale);
void bmm_nt_bwd_b(const double* dy, const double* a, double* dbt_acc, int B,
                  int M, int N, int D, double scale);
// y[b,m,d] = sum_n a[b,m,n] * x[b,n,d]
void bmm_nn(const double* a, const double* x, double* y, int B, int M, int N,
            int D);
void bmm_nn_bwd_a(const double* dy, const double* x, double* da_acc, int B,
                  int M, int N, int D);
void bmm_nn_bwd_x(const double* dy, const double* a, double* dx_acc, int B,
                  int M, int N, int D);

// ---- softmax over last dim, optional validity mask ---------------------
// Masked lanes get exactly 0; rows with no valid lane become all-zero.
void softmax_rows(const double* x, const uint8_t* mask, double* y,
                  int64_t rows, int n);
void softmax_rows_bwd(const double* y, const double* dy, const uint8_t* mask,
                      double* dx_acc, int64_t rows, int n);

// ---- reductions / broadcasts -------------------------------------------
double sum_all(const double* x, int64_t n);
void mean_mid_fwd(const double* x, double* y, int64_t A, int B, int C);
void mean_mid_bwd(const double* dy, double* dx_acc, int64_t A, int B, int C);
// y[a,c] = sum_b w[a,b] * x[a,b,c]
void weighted_sum_mid_fwd(const double* w, const double* x, double* y,
                          int64_t A, int B, int C);
void weighted_sum_mid_bwd_w(const double* dy, const double* x, double* dw_acc,
                            int64_t A, int B, int C);
void weighted_sum_mid_bwd_x(const double* dy, const double* w, double* dx_acc,
                            int64_t A, int B, int C);
// y[a,c] = mean over valid b of x[a,b,c]; all-invalid rows give 0
void masked_mean_mid_fwd(const double* x, const uint8_t* valid, double* y,
                         int64_t A, int B, int C);
void masked_mean_mid_bwd(const double* dy, const uint8_t* valid,
                         double* dx_acc, int64_t A, int B, int C);
// y[a,b,c] = x[a,b,c] + sign * q[a,c]
void add_bcast_mid_fwd(const double* x, const double* q, double sign,
                       double* y, int64_t A, int B, int C);
void add_bcast_mid_bwd_q(const double* dy, double sign, double* dq_acc,
                         int64_t A, int B, int C);
// y[r,:] = x[r,:] * m[r]
void mul_rows_fwd(const double* x, const double* m, double* y, int64_t rows,
                  int d);

// ---- conv2d (zero padding) ---------------------------------------------
void conv2d_fwd(const double* x, const double* w, const double* b, double* y,
                int Bn, int Ci, int H, int W, int Co, int kh, int kw,
                int stride, int pad);
void conv2d_bwd_x(const double* dy, const double* w, double* dx_acc, int Bn,
                  int Ci, int H, int W, int Co, int kh, int kw, int stride,
                  int pad);
void conv2d_bwd_w(const double* x, const double* dy, double* dw_acc, int Bn,
                  int Ci, int H, int W, int Co, int kh, int kw, int stride,
                  int pad);
void conv2d_bwd_b(const double* dy, double* db_acc, int Bn, int Co, int Ho,
                  int Wo);

// ---- transposed conv 2x2 stride 2 (w[Ci,Co,2,2]) ------------------------
void convtr2_fwd(const double* x, const double* w, const double* b, double* y,
                 int Bn, int Ci, int H, int W, int Co);
void convtr2_bwd_x(const double* dy, const double* w, double* dx_acc, int Bn,
                   int Ci, int H, int W, int Co);
void convtr2_bwd_w(const double* x, const double* dy, double* dw_acc, int Bn,
                   int Ci, int H, int W, int Co);
void convtr2_bwd_b(const double* dy, double* db_acc, int Bn, int Co, int Ho,
                   int Wo);

// ---- resampling ---------------------------------------------------------
void avgpool_fwd(const double* x, double* y, int Bn, int C, int H, int W,
                 int k);
void avgpool_bwd(const double* dy, double* dx_acc, int Bn, int C, int H, int W,
                 int k);
void upsample_nearest2_fwd(const double* x, double* y, int Bn, int C, int H,
                           int W);
void upsample_nearest2_bwd(const double* dy, double* dx_acc, int Bn, int C,
                           int H, int W);
// integer factor, align_corners=false, edge clamp
void upsample_bilinear_fwd(const double* x, double* y, int Bn, int C, int H,
                           int W, int s);
void upsample_bilinear_bwd(const double* dy, double* dx_acc, int Bn, int C,
                           int H, int W, int s);

// ---- bilinear gather from per-view feature grids ------------------------
// feats[N,C,Hf,Wf]; uv[P,N,2] in feature-grid pixel coords; invalid
// (point,view) pairs produce zeros. Taps are edge-clamped for valid pairs.
void epipolar_gather_fwd(const double* feats, const double* uv,
                         const uint8_t* valid, double* out, int64_t P, int N,
                         int C, int Hf, int Wf);
void epipolar_gather_bwd(const double* dout, const double* uv,
                         const uint8_t* valid, double* dfeats_acc, int64_t P,
                         int N, int C, int Hf, int Wf);

// ---- fused losses -------------------------------------------------------
// loss = sum_p w[p] * (logsumexp(logits[p,:]) - logits[p,labels[p]])
double ce_fwd(const double* logits, const int32_t* labels, const double* w,
              int64_t P, int C);
void ce_bwd(const double* logits, const int32_t* labels, const double* w,
            double gscale, double* dlogits_acc, int64_t P, int C);
// cos[r] = <a_r,b_r> / (|a_r||b_r| + eps)
void cos_rows_fwd(const double* a, const double* b, double eps, double* y,
                  int64_t R, int D);
void cos_rows_bwd(const double* a, const double* b, double eps,
                  const double* dcos, double* da_acc, double* db_acc,
                  int64_t R, int D);

namespace ref {
// Naive serial reference implementations (subset used for parity tests).
void linear_fwd(const double* x, const double* w, const double* b, double* y,
                int64_t rows, int in_dim, int out_dim);
void bmm_nt(const double* a, const double* bt, double* y, int B, int M, int N,
            int D, double scale);
void bmm_nn(const double* a, const double* x, double* y, int B, int M, int N,
            int D);
void softmax_rows(const double* x, const uint8_t* mask, double* y,
                  int64_t rows, int n);
void conv2d_fwd(const double* x, const double* w, const double* b, double* y,
                int Bn, int Ci, int H, int W, int Co, int kh, int kw,
                int stride, int pad);
void weighted_sum_mid_fwd(const double* w, const double* x, double* y,
                          int64_t A, int B, int C);
void epipolar_gather_fwd(const double* feats, const double* uv,
                         const uint8_t* valid, double* out, int64_t P, int N,
                         int C, int Hf, int Wf);
void upsample_bilinear_fwd(const double* x, double* y, int Bn, int C, int H,
                           int W, int s);
}  // namespace ref

}  // namespace gpnerf::kernels
