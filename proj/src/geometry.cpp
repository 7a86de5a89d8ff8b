// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/geometry.hpp"

#include <cmath>

#include "gpnerf/rng.hpp"

namespace gpnerf {

RayBatch generate_rays(const CameraModel& cam,
                       const std::vector<std::pair<double, double>>& pixels,
                       double t_near, double t_far) {
  GPNERF_CHECK(t_far > t_near && t_near > 0, "need t_far > t_near > 0");
  const int R = (int)pixels.size();
  RayBatch rb;
  rb.origins = Tensor({R, 3});
  rb.dirs = Tensor({R, 3});
  rb.pixels = Tensor({R, 2});
  rb.t_near = t_near;
  rb.t_far = t_far;
  for (int r = 0; r < R; ++r) {
    const auto [u, v] = pixels[r];
    GPNERF_CHECK(u >= 0 && u <= cam.width - 1 && v >= 0 && v <= cam.height - 1,
                 "pixel (" + std::to_string(u) + "," + std::to_string(v) +
                     ") outside image bounds");
    const Vec3 d = cam.pixel_ray_dir(u, v);
    rb.origins.at({r, 0}) = cam.center.x;
    rb.origins.at({r, 1}) = cam.center.y;
    rb.origins.at({r, 2}) = cam.center.z;
    rb.dirs.at({r, 0}) = d.x;
    rb.dirs.at({r, 1}) = d.y;
    rb.dirs.at({r, 2}) = d.z;
    rb.pixels.at({r, 0}) = u;
    rb.pixels.at({r, 1}) = v;
  }
  return rb;
}

SampledPoints sample_points(const RayBatch& rays, int samples, bool stratified,
                            uint64_t seed) {
  GPNERF_CHECK(samples >= 1, "need at least one sample per ray");
  const int R = rays.count();
  const int M = samples;
  SampledPoints sp;
  sp.rays = R;
  sp.samples = M;
  sp.positions = Tensor({R, M, 3});
  sp.ts = Tensor({R, M});
  const double bin = (rays.t_far - rays.t_near) / M;
  Rng rng(Rng::mix(seed, 0x5a3cf1));
  for (int r = 0; r < R; ++r) {
    const Vec3 o = rays.origin(r), d = rays.dir(r);
    for (int m = 0; m < M; ++m) {
      const double jitter = stratified ? rng.uniform01() : 0.5;
      const double t = rays.t_near + (m + jitter) * bin;
      sp.ts.at({r, m}) = t;
      const Vec3 p = o + d * t;
      sp.positions.at({r, m, 0}) = p.x;
      sp.positions.at({r, m, 1}) = p.y;
      sp.positions.at({r, m, 2}) = p.z;
    }
  }
  return sp;
}

Tensor relative_directions(const SampledPoints& points, const RayBatch& rays,
                           const std::vector<CameraModel>& refs) {
  const int R = points.rays, M = points.samples, N = (int)refs.size();
  Tensor dd({R, M, N, 3});
  for (int r = 0; r < R; ++r) {
    const Vec3 dt = rays.dir(r);
    for (int m = 0; m < M; ++m) {
      const Vec3 x = points.position(r, m);
      for (int n = 0; n < N; ++n) {
        const Vec3 dr = (x - refs[n].center).normalized();
        dd.at({r, m, n, 0}) = dt.x - dr.x;
        dd.at({r, m, n, 1}) = dt.y - dr.y;
        dd.at({r, m, n, 2}) = dt.z - dr.z;
      }
    }
  }
  return dd;
}

void project_points(const Tensor& positions, const std::vector<CameraModel>& refs,
                    Tensor& uv_out, MaskArray& valid_out) {
  const int64_t P = positions.numel() / 3;
  const int N = (int)refs.size();
  uv_out = Tensor({(int)P, N, 2});
  valid_out = MaskArray({(int)P, N});
  for (int64_t p = 0; p < P; ++p) {
    const Vec3 x{positions[p * 3 + 0], positions[p * 3 + 1], positions[p * 3 + 2]};
    for (int n = 0; n < N; ++n) {
      const ProjectedPoint pr = project_in_bounds(x, refs[n]);
      uv_out[(p * N + n) * 2 + 0] = pr.u;
      uv_out[(p * N + n) * 2 + 1] = pr.v;
      valid_out[p * N + n] = pr.valid ? 1 : 0;
    }
  }
}

std::pair<std::vector<double>, bool> bilinear_sample(const Tensor& grid,
                                                     double u, double v) {
  GPNERF_CHECK(grid.rank() == 3, "bilinear_sample expects [D,H,W]");
  const int D = grid.dim(0), H = grid.dim(1), W = grid.dim(2);
  std::vector<double> out(D, 0.0);
  if (u < 0.0 || u > W - 1.0 || v < 0.0 || v > H - 1.0) return {out, false};
  const int x0 = std::min((int)std::floor(u), W - 1);
  const int y0 = std::min((int)std::floor(v), H - 1);
  const int x1 = std::min(x0 + 1, W - 1);
  const int y1 = std::min(y0 + 1, H - 1);
  const double tx = u - std::floor(u), ty = v - std::floor(v);
  for (int d = 0; d < D; ++d) {
    const double a = grid.at({d, y0, x0}), b = grid.at({d, y0, x1});
    const double c = grid.at({d, y1, x0}), e = grid.at({d, y1, x1});
    out[d] = (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * e);
  }
  return {out, true};
}

int depth_to_sample_index(const double* ts, int count, double gt_depth,
                          double t_near, double t_far, int64_t* clamp_warnings) {
  GPNERF_CHECK(count >= 1, "empty sample list");
  if (gt_depth < t_near || gt_depth > t_far) {
    if (clamp_warnings) ++(*clamp_warnings);
    return gt_depth < t_near ? 0 : count - 1;
  }
  int best = 0;
  double best_d = std::abs(ts[0] - gt_depth);
  for (int i = 1; i < count; ++i) {
    const double d = std::abs(ts[i] - gt_depth);
    if (d < best_d) {  // strict: ties keep the lower index
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace gpnerf
