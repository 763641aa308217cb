// Copyright 2026 The Handeye Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HANDEYE_GEOM_CAMERA_HPP_
#define HANDEYE_GEOM_CAMERA_HPP_

#include <optional>

#include <Eigen/Core>

namespace handeye::geom {

// World frame: meters, z up, table plane at z = 0.
using Point3 = Eigen::Vector3d;
using Pixel = Eigen::Vector2d;

struct Ray {
  Point3 origin;
  Eigen::Vector3d direction;  // unit norm
};

// Pinhole camera with an OpenCV-style camera frame (x right, y down,
// z forward). `rotation` maps world directions into the camera frame.
struct CameraModel {
  Point3 position = Point3::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double focal_length = 70.0;
  Pixel principal_point = Pixel(32.0, 32.0);
  int width = 64;
  int height = 64;

  [[nodiscard]] Eigen::Vector3d forward() const { return rotation.row(2).transpose(); }

  // Throws std::invalid_argument if the rotation is not proper orthonormal or
  // the intrinsics are degenerate.
  void validate() const;
};

// Camera at `position` looking at `target`, with image rows aligned so that
// world +z projects upward in the image.
CameraModel look_at(const Point3& position, const Point3& target,
                    double focal_length = 70.0, int width = 64, int height = 64);

// Default desk camera: 1 m from the workspace center at 30 degrees elevation,
// looking along +y.
CameraModel default_camera(const Point3& workspace_center = Point3::Zero());

struct Projection {
  Pixel pixel = Pixel::Zero();
  double depth = 0.0;  // camera-frame z
  bool behind = false;
};

Projection project_point(const Point3& p, const CameraModel& cam);

Ray ray_through_pixel(const Pixel& px, const CameraModel& cam);

// Intersection with the horizontal plane z = plane_height at a nonnegative ray
// parameter; nullopt if the ray is parallel to or points away from the plane.
std::optional<Point3> intersect_ray_plane(const Point3& origin,
                                          const Eigen::Vector3d& direction,
                                          double plane_height);

}  // namespace handeye::geom

#endif  // HANDEYE_GEOM_CAMERA_HPP_
