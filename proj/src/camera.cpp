// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/camera.hpp"

namespace gpnerf {

double CameraModel::orthonormality_error() const {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double d = rot.col(i).dot(rot.col(j)) - (i == j ? 1.0 : 0.0);
      worst = std::max(worst, std::abs(d));
    }
  return worst;
}

void CameraModel::validate() const {
  GPNERF_CHECK(fx > 0 && fy > 0, "focal lengths must be positive");
  GPNERF_CHECK(orthonormality_error() < 1e-6, "camera rotation not orthonormal");
}

ProjectedPoint project(const Vec3& world_point, const CameraModel& cam) {
  ProjectedPoint p;
  const Vec3 c = cam.world_to_cam(world_point);
  p.depth = c.z;
  if (c.z <= 1e-6) return p;  // behind or grazing the camera plane
  p.u = cam.fx * c.x / c.z + cam.cx;
  p.v = cam.fy * c.y / c.z + cam.cy;
  p.valid = true;
  return p;
}

ProjectedPoint project_in_bounds(const Vec3& world_point, const CameraModel& cam) {
  ProjectedPoint p = project(world_point, cam);
  if (p.valid && (p.u < 0.0 || p.u > cam.width - 1.0 || p.v < 0.0 ||
                  p.v > cam.height - 1.0))
    p.valid = false;
  return p;
}

CameraModel look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up,
                    double fx, double fy, double cx, double cy, int width,
                    int height) {
  CameraModel cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  cam.center = eye;
  const Vec3 fwd = (target - eye).normalized();
  GPNERF_CHECK(std::abs(fwd.dot(world_up.normalized())) < 0.999,
               "look_at direction parallel to up vector");
  const Vec3 right = fwd.cross(world_up).normalized();
  const Vec3 down = fwd.cross(right);  // right x down = fwd (right-handed)
  cam.rot = Mat3::from_cols(right, down, fwd);
  cam.validate();
  return cam;
}

}  // namespace gpnerf
