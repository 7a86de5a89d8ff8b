// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/head.hpp"

#include <cstring>

#include "gpnerf/kernels.hpp"

namespace gpnerf {

FusedMap fuse_maps(const Tensor& teacher, const Var& rendered,
                   const std::vector<std::pair<int, int>>& cells) {
  GPNERF_CHECK(teacher.rank() == 4 && teacher.dim(0) == 1, "teacher is [1,D,Hf,Wf]");
  const int D = teacher.dim(1), Hf = teacher.dim(2), Wf = teacher.dim(3);
  const int R = rendered.defined() ? rendered.shape()[0] : 0;
  GPNERF_CHECK((int)cells.size() == R, "one cell per rendered row");
  GPNERF_CHECK(R == 0 || rendered.shape()[1] == D, "feature width mismatch");

  FusedMap fused;
  fused.provenance = MaskArray({Hf, Wf});

  // Last write wins; remember which row owns each cell.
  std::vector<int> owner((size_t)Hf * Wf, -1);
  for (int r = 0; r < R; ++r) {
    const auto [gy, gx] = cells[r];
    GPNERF_CHECK(gy >= 0 && gy < Hf && gx >= 0 && gx < Wf,
                 "rendered cell outside the feature grid");
    if (owner[(size_t)gy * Wf + gx] >= 0) ++fused.duplicate_warnings;
    owner[(size_t)gy * Wf + gx] = r;
    fused.provenance[(int64_t)gy * Wf + gx] = 1;
  }

  Tensor out = teacher.clone();
  for (int64_t c = 0; c < (int64_t)Hf * Wf; ++c) {
    const int r = owner[c];
    if (r < 0) continue;
    for (int d = 0; d < D; ++d)
      out[(int64_t)d * Hf * Wf + c] = rendered.value()[(int64_t)r * D + d];
  }

  if (R == 0) {
    fused.map = Var::constant(std::move(out));
    return fused;
  }
  fused.map = Var::make(
      "fuse_maps", std::move(out), {rendered},
      [owner, D, Hf, Wf](autodiff::Node& nd) {
        auto& parent = *nd.parents[0];
        if (!parent.requires_grad) return;
        parent.ensure_grad();
        for (int64_t c = 0; c < (int64_t)Hf * Wf; ++c) {
          const int r = owner[c];
          if (r < 0) continue;
          for (int d = 0; d < D; ++d)
            parent.grad[(int64_t)r * D + d] += nd.grad[(int64_t)d * Hf * Wf + c];
        }
      });
  return fused;
}

PerceptionHead PerceptionHead::create(ParamStore& ps, int d_sem, int n_classes,
                                      Rng& rng) {
  GPNERF_CHECK(d_sem % 4 == 0, "d_sem must divide into 4 slices");
  GPNERF_CHECK(n_classes >= 1, "need at least one class");
  PerceptionHead h;
  h.d_sem_ = d_sem;
  h.n_classes_ = n_classes;
  const int dl = d_sem / 4;
  for (int k = 0; k < 4; ++k) {
    const std::string p = "head.block" + std::to_string(k + 1);
    h.blocks_[k].c1 = Conv::create(ps, p + ".c1", dl, dl, 3, 1, 1, rng);
    h.blocks_[k].c2 = Conv::create(ps, p + ".c2", dl, dl, 3, 1, 1, rng);
  }
  for (int k = 0; k < 3; ++k)
    h.ups_[k] = UpConv2::create(ps, "head.up" + std::to_string(k + 1), dl, dl, rng);
  h.classifier_ = Conv::create(ps, "head.classifier", dl, n_classes, 1, 1, 0, rng);
  return h;
}

std::array<Var, 4> PerceptionHead::split_features(const Var& map) const {
  GPNERF_CHECK(map.value().rank() == 4, "split expects [1,D,Hf,Wf]");
  const int D = map.shape()[1];
  GPNERF_CHECK(D % 4 == 0, "feature width " + std::to_string(D) +
                               " not divisible into 4 parts");
  const int dl = D / 4;
  return {slice_channels(map, 0, dl), slice_channels(map, dl, 2 * dl),
          slice_channels(map, 2 * dl, 3 * dl), slice_channels(map, 3 * dl, 4 * dl)};
}

Var PerceptionHead::decode(const std::array<Var, 4>& parts) const {
  const int Hf = parts[0].shape()[2], Wf = parts[0].shape()[3];
  GPNERF_CHECK(Hf % 8 == 0 && Wf % 8 == 0,
               "stride-4 grid must be divisible by 8 for the pyramid");
  auto block = [&](int k, const Var& x) {
    return relu(blocks_[k].c2(relu(blocks_[k].c1(x))));
  };
  // Pool coarser slices back to native strides (8/16/32).
  const Var s2 = avgpool(parts[1], 2);
  const Var s3 = avgpool(parts[2], 4);
  const Var s4 = avgpool(parts[3], 8);

  Var t = block(3, s4);
  t = block(2, add(s3, ups_[2](t)));
  t = block(1, add(s2, ups_[1](t)));
  t = block(0, add(parts[0], ups_[0](t)));
  return upsample_bilinear(classifier_(t), 4);
}

Var PerceptionHead::predict_full(const Var& map, const MaskArray& provenance) const {
  if (provenance.defined())
    for (int64_t i = 0; i < provenance.numel(); ++i)
      GPNERF_CHECK(provenance[i] == 1,
                   "predict_full on a map with teacher-filled cells");
  return decode(split_features(map));
}

}  // namespace gpnerf
