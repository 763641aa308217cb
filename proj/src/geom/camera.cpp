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

#include "handeye/geom/camera.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Geometry>

namespace handeye::geom {

void CameraModel::validate() const {
  const Eigen::Matrix3d gram = rotation * rotation.transpose();
  if (!gram.isApprox(Eigen::Matrix3d::Identity(), 1e-9) ||
      std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw std::invalid_argument("camera rotation must be a proper rotation");
  }
  if (!(focal_length > 0.0) || width <= 0 || height <= 0) {
    throw std::invalid_argument("camera intrinsics must be positive");
  }
  if (!position.allFinite() || !principal_point.allFinite()) {
    throw std::invalid_argument("camera parameters must be finite");
  }
}

CameraModel look_at(const Point3& position, const Point3& target,
                    double focal_length, int width, int height) {
  const Eigen::Vector3d forward = (target - position).normalized();
  Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
  if (right.norm() < 1e-12) {
    throw std::invalid_argument("look_at: view direction parallel to world up");
  }
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);

  CameraModel cam;
  cam.position = position;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.focal_length = focal_length;
  cam.width = width;
  cam.height = height;
  cam.principal_point = Pixel(0.5 * width, 0.5 * height);
  return cam;
}

CameraModel default_camera(const Point3& workspace_center) {
  constexpr double kDistance = 1.0;
  constexpr double kElevation = 30.0 * std::numbers::pi / 180.0;
  const Point3 position =
      workspace_center + Point3(0.0, -kDistance * std::cos(kElevation),
                                kDistance * std::sin(kElevation));
  return look_at(position, workspace_center);
}

Projection project_point(const Point3& p, const CameraModel& cam) {
  const Eigen::Vector3d pc = cam.rotation * (p - cam.position);
  Projection out;
  out.depth = pc.z();
  if (pc.z() <= 0.0) {
    out.behind = true;
    return out;
  }
  out.pixel = cam.principal_point + cam.focal_length * pc.head<2>() / pc.z();
  return out;
}

Ray ray_through_pixel(const Pixel& px, const CameraModel& cam) {
  const Eigen::Vector3d dc(
      (px.x() - cam.principal_point.x()) / cam.focal_length,
      (px.y() - cam.principal_point.y()) / cam.focal_length, 1.0);
  return Ray{cam.position, (cam.rotation.transpose() * dc).normalized()};
}

std::optional<Point3> intersect_ray_plane(const Point3& origin,
                                          const Eigen::Vector3d& direction,
                                          double plane_height) {
  constexpr double kParallel = 1e-12;
  if (std::abs(direction.z()) < kParallel) return std::nullopt;
  const double t = (plane_height - origin.z()) / direction.z();
  if (t < 0.0) return std::nullopt;
  Point3 hit = origin + t * direction;
  hit.z() = plane_height;
  return hit;
}

}  // namespace handeye::geom
