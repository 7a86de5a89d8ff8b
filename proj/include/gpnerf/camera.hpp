// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>

#include "gpnerf/tensor.hpp"

namespace gpnerf {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    GPNERF_CHECK(n > 1e-12, "normalizing near-zero vector");
    return *this * (1.0 / n);
  }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

struct Mat3 {
  // row-major
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  Vec3 col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }
  Vec3 apply(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Vec3 apply_transposed(const Vec3& v) const {
    return {m[0] * v.x + m[3] * v.y + m[6] * v.z,
            m[1] * v.x + m[4] * v.y + m[7] * v.z,
            m[2] * v.x + m[5] * v.y + m[8] * v.z};
  }
  static Mat3 from_cols(const Vec3& a, const Vec3& b, const Vec3& c) {
    Mat3 r;
    r.m = {a.x, b.x, c.x, a.y, b.y, c.y, a.z, b.z, c.z};
    return r;
  }
};

struct ProjectedPoint {
  double u = 0, v = 0;
  double depth = 0;  // camera-frame z
  bool valid = false;
};

/// Pinhole camera, OpenCV convention: +z forward, +x right, +y down.
/// rot columns are the camera axes expressed in world coordinates.
struct CameraModel {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Mat3 rot;      // camera-to-world rotation
  Vec3 center;   // camera position in world
  int width = 0, height = 0;

  Vec3 forward() const { return rot.col(2); }

  Vec3 world_to_cam(const Vec3& p) const {
    return rot.apply_transposed(p - center);
  }
  Vec3 cam_dir_to_world(const Vec3& d) const { return rot.apply(d); }

  /// Ray direction through pixel (u, v), unit length in world coords.
  Vec3 pixel_ray_dir(double u, double v) const {
    const Vec3 d{(u - cx) / fx, (v - cy) / fy, 1.0};
    return rot.apply(d).normalized();
  }

  /// Largest deviation of rotᵀ·rot from identity.
  double orthonormality_error() const;
  void validate() const;
};

ProjectedPoint project(const Vec3& world_point, const CameraModel& cam);

/// valid additionally requires the projection to land inside the image.
ProjectedPoint project_in_bounds(const Vec3& world_point, const CameraModel& cam);

CameraModel look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up,
                    double fx, double fy, double cx, double cy, int width,
                    int height);

}  // namespace gpnerf
