// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/fields.hpp"

#include <cmath>

namespace gpnerf {

Tensor positional_encoding(const Tensor& x, int freqs, double scale) {
  GPNERF_CHECK(x.rank() == 2 && x.dim(1) == 3, "positional_encoding expects [P,3]");
  const int64_t P = x.dim(0);
  const int out_dim = 3 + 6 * freqs;
  Tensor pe({(int)P, out_dim});
  for (int64_t p = 0; p < P; ++p) {
    for (int c = 0; c < 3; ++c) {
      const double v = x[p * 3 + c] * scale;
      pe[p * out_dim + c] = v;
      for (int f = 0; f < freqs; ++f) {
        const double w = std::ldexp(v, f);  // v * 2^f
        pe[p * out_dim + 3 + 6 * f + 2 * c + 0] = std::sin(w);
        pe[p * out_dim + 3 + 6 * f + 2 * c + 1] = std::cos(w);
      }
    }
  }
  return pe;
}

FieldAggregator FieldAggregator::create(ParamStore& ps, const FieldsConfig& cfg,
                                        Rng& rng) {
  GPNERF_CHECK(cfg.d_rgb % cfg.n_heads == 0, "d_rgb must divide by head count");
  FieldAggregator f;
  f.cfg_ = cfg;
  const int D = cfg.d_rgb;
  for (int b = 0; b < cfg.n_blocks; ++b) {
    const std::string fp = "fat.b" + std::to_string(b);
    FatBlock fb;
    fb.fq = Linear::create(ps, fp + ".fq", D, D, rng);
    fb.fk = Linear::create(ps, fp + ".fk", D, D, rng);
    fb.fv = Linear::create(ps, fp + ".fv", D, D, rng);
    fb.fa = Linear::create(ps, fp + ".fa", D, cfg.n_heads, rng);
    fb.fp = Mlp2::create(ps, fp + ".fp", 3, D, D, rng);
    fb.frgb = Mlp2::create(ps, fp + ".frgb", D, D, D, rng);
    f.fat_.push_back(fb);

    const std::string rp = "rat.b" + std::to_string(b);
    RatBlock rb;
    rb.fin = Linear::create(ps, rp + ".fin", D + 2 * cfg.pe_dim(), D, rng);
    rb.fq = Linear::create(ps, rp + ".fq", D, D, rng);
    rb.fk = Linear::create(ps, rp + ".fk", D, D, rng);
    rb.fv = Linear::create(ps, rp + ".fv", D, D, rng);
    rb.fout = Mlp2::create(ps, rp + ".fout", D, D, D, rng);
    f.rat_.push_back(rb);
  }
  f.color_mlp_ = Mlp2::create(ps, "rat.color", D, D, 3, rng);
  const int DS = cfg.d_sem();
  f.sem_mlp_ = Mlp2::create(ps, "rat.sem", DS, DS, DS, rng);
  return f;
}

FieldAggregator::FatOut FieldAggregator::fat_aggregate(
    int block, const Var& x_rgb, const Var& rel_dirs, const MaskArray& valid,
    const Var& query_init, const Tensor& point_valid) const {
  const FatBlock& fb = fat_[block];
  const int P = x_rgb.shape()[0], N = x_rgb.shape()[1], D = x_rgb.shape()[2];
  const int h = cfg_.n_heads, Dh = D / h;

  const Var K = fb.fk(x_rgb);
  const Var V = fb.fv(x_rgb);
  const Var Ppos = fb.fp(rel_dirs);
  const Var Q = fb.fq(query_init);
  // K - Q + P, reduced to per-head scalar logits over the channel axis.
  const Var L = add_bcast_mid(add(K, Ppos), Q, -1.0);
  const Var logits = fb.fa(L);  // [P,N,h]
  const Var VP = add(V, Ppos);

  std::vector<Var> head_out;
  std::vector<Var> head_attn;
  for (int i = 0; i < h; ++i) {
    Var lg = h == 1 ? reshape(logits, {P, N})
                    : reshape(slice_lastdim(logits, i, i + 1), {P, N});
    Var A = softmax_masked(lg, valid);  // masked views exactly 0
    head_attn.push_back(A);
    Var Vh = h == 1 ? VP : slice_lastdim(VP, i * Dh, (i + 1) * Dh);
    head_out.push_back(weighted_sum_mid(A, Vh));
  }
  Var pre = h == 1 ? head_out[0] : concat_lastdim(head_out);
  Var a_fat = head_attn[0];
  if (h > 1) {
    for (int i = 1; i < h; ++i) a_fat = add(a_fat, head_attn[i]);
    a_fat = affine(a_fat, 1.0 / h, 0.0);
  }
  // Points no view can see carry a zero feature.
  Var tokens = mul_rows(fb.frgb(pre), point_valid);
  return {tokens, a_fat, Ppos};
}

Var FieldAggregator::semantic_field(const Var& a_fat, const Var& x_sem,
                                    const Var& p_pos,
                                    const Tensor& point_valid) const {
  // Shared attention: the weights come from the radiance pass untouched.
  const Var p_tiled = tile_lastdim(p_pos, 4);
  const Var f = weighted_sum_mid(a_fat, add(x_sem, p_tiled));
  return mul_rows(f, point_valid);
}

FieldAggregator::RatOut FieldAggregator::rat_aggregate(int block,
                                                       const Var& tokens3,
                                                       const Var& pe_x,
                                                       const Var& pe_d) const {
  const RatBlock& rb = rat_[block];
  const int R = tokens3.shape()[0], M = tokens3.shape()[1], D = tokens3.shape()[2];
  const int h = cfg_.n_heads, Dh = D / h;

  const Var X0 = rb.fin(concat_lastdim({tokens3, pe_d, pe_x}));
  const Var Q = rb.fq(X0), K = rb.fk(X0), V = rb.fv(X0);

  std::vector<Var> head_tok;
  Var a_mean;
  for (int i = 0; i < h; ++i) {
    Var Qh = h == 1 ? Q : slice_lastdim(Q, i * Dh, (i + 1) * Dh);
    Var Kh = h == 1 ? K : slice_lastdim(K, i * Dh, (i + 1) * Dh);
    Var Vh = h == 1 ? V : slice_lastdim(V, i * Dh, (i + 1) * Dh);
    Var A = softmax_masked(bmm_nt(Qh, Kh, 1.0 / std::sqrt((double)Dh)),
                           MaskArray());  // [R,M,M]
    head_tok.push_back(bmm_nn(A, Vh));
    // One weight vector per ray: mean of the M query rows.
    Var am = mean_mid(A);  // [R,M]
    a_mean = i == 0 ? am : add(a_mean, am);
  }
  if (h > 1) a_mean = affine(a_mean, 1.0 / h, 0.0);
  Var tokens = rb.fout(h == 1 ? head_tok[0] : concat_lastdim(head_tok));
  (void)R;
  (void)M;
  return {tokens, a_mean};
}

Var FieldAggregator::render_color(const Var& rat_tokens) const {
  return sigmoid(color_mlp_(mean_mid(rat_tokens)));
}

Var FieldAggregator::render_semantic(const Var& a_rat,
                                     const Var& f_sem_points3) const {
  // The per-ray weights broadcast across all semantic channels, which is the
  // channel-repeated form of the exported weights.
  return sem_mlp_(weighted_sum_mid(a_rat, f_sem_points3));
}

FieldOutputs FieldAggregator::run(const EpipolarInputs& in) const {
  const int R = in.rays, M = in.samples;
  const int P = R * M;
  const int D = cfg_.d_rgb, DS = cfg_.d_sem();
  GPNERF_CHECK(in.x_rgb.shape()[0] == P, "epipolar inputs do not match R*M");

  const Var pe_x3 = reshape(Var::constant(in.pe_coords), {R, M, cfg_.pe_dim()});
  const Var pe_d3 = reshape(Var::constant(in.pe_dirs), {R, M, cfg_.pe_dim()});

  Var query = masked_mean_mid(in.x_rgb, in.valid);  // parameter-free init
  FatOut fat;
  RatOut rat;
  for (int b = 0; b < cfg_.n_blocks; ++b) {
    fat = fat_aggregate(b, in.x_rgb, in.rel_dirs, in.valid, query, in.point_valid);
    rat = rat_aggregate(b, reshape(fat.tokens, {R, M, D}), pe_x3, pe_d3);
    query = reshape(rat.tokens, {P, D});
  }

  FieldOutputs out;
  out.a_fat = fat.a_fat;
  out.a_rat = rat.a_rat;
  out.f_rgb_points = fat.tokens;
  out.color = render_color(rat.tokens);
  out.f_sem_points = semantic_field(fat.a_fat, in.x_sem, fat.p_pos, in.point_valid);
  out.sem_ray = render_semantic(rat.a_rat, reshape(out.f_sem_points, {R, M, DS}));
  return out;
}

}  // namespace gpnerf
