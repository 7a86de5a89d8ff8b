// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "gpnerf/camera.hpp"
#include "gpnerf/tensor.hpp"

namespace gpnerf {

struct RayBatch {
  Tensor origins;  // [R,3]
  Tensor dirs;     // [R,3], unit norm
  Tensor pixels;   // [R,2] (u,v)
  double t_near = 0, t_far = 0;

  int count() const { return origins.defined() ? origins.shape()[0] : 0; }
  Vec3 origin(int r) const {
    return {origins.at({r, 0}), origins.at({r, 1}), origins.at({r, 2})};
  }
  Vec3 dir(int r) const {
    return {dirs.at({r, 0}), dirs.at({r, 1}), dirs.at({r, 2})};
  }
};

struct SampledPoints {
  Tensor positions;  // [R,M,3]
  Tensor ts;         // [R,M], strictly increasing per ray
  int rays = 0, samples = 0;

  Vec3 position(int r, int m) const {
    return {positions.at({r, m, 0}), positions.at({r, m, 1}),
            positions.at({r, m, 2})};
  }
};

/// Rays through pixel centers. Throws on out-of-bounds pixels.
RayBatch generate_rays(const CameraModel& cam,
                       const std::vector<std::pair<double, double>>& pixels,
                       double t_near, double t_far);

/// stratified=false: deterministic bin midpoints
/// t_i = t_near + (i + 0.5) (t_far - t_near)/M.
/// stratified=true: one uniform jitter per bin, seeded.
SampledPoints sample_points(const RayBatch& rays, int samples, bool stratified,
                            uint64_t seed);

/// Relative viewing direction per (point, reference view):
/// unit(target ray dir) - unit(point - ref camera center).  [R,M,N,3]
Tensor relative_directions(const SampledPoints& points, const RayBatch& rays,
                           const std::vector<CameraModel>& refs);

/// Projects flattened points [P,3] into every reference view.
/// uv is in image pixel coordinates; valid requires depth > 1e-6 and the
/// projection inside the image.
void project_points(const Tensor& positions, const std::vector<CameraModel>& refs,
                    Tensor& uv_out /*[P,N,2]*/, MaskArray& valid_out /*[P,N]*/);

/// Image-resolution pixel coords -> feature-grid coords at an integer stride
/// (align_corners=false convention).
inline double image_to_grid(double pix, int stride) {
  return (pix + 0.5) / stride - 0.5;
}

/// Bilinear lookup on a planar grid [D,H,W] at grid coords (u, v).
/// Out-of-grid coordinates return zeros with valid=false; in-bounds taps are
/// edge-clamped.
std::pair<std::vector<double>, bool> bilinear_sample(const Tensor& grid,
                                                     double u, double v);

/// argmin_i |ts[i] - gt_depth| with ties broken toward the lower index.
/// Depths outside [t_near, t_far] clamp to the nearest end and bump
/// *clamp_warnings.
int depth_to_sample_index(const double* ts, int count, double gt_depth,
                          double t_near, double t_far, int64_t* clamp_warnings);

}  // namespace gpnerf
