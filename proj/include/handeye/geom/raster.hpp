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

#ifndef HANDEYE_GEOM_RASTER_HPP_
#define HANDEYE_GEOM_RASTER_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "handeye/geom/camera.hpp"

namespace handeye::geom {

enum class Shape { kBox, kCylinder, kTruncatedEllipsoid };

// A vertical-axis solid resting anywhere in the world. `half_extents` is the
// half size of its yaw-aligned bounding box; every shape touches all six
// faces of that box.
//
// The truncated ellipsoid has semi-axes (hx, hy, kEllipsoidStretch * hz) and
// is cut flat at local z = +-hz.
struct Primitive {
  static constexpr double kEllipsoidStretch = 1.25;

  Shape shape = Shape::kBox;
  Point3 center = Point3::Zero();
  double yaw = 0.0;
  Eigen::Vector3d half_extents = Eigen::Vector3d::Constant(0.025);
  Eigen::Vector3d color = Eigen::Vector3d::Constant(0.5);
  int id = 0;

  [[nodiscard]] std::array<Point3, 8> corners() const;

  // Smallest t >= 0 where o + t d enters the solid (d need not be unit).
  [[nodiscard]] std::optional<double> intersect(const Point3& o,
                                                const Eigen::Vector3d& d) const;

  // Point membership, used by independent checks.
  [[nodiscard]] bool contains(const Point3& p) const;
};

struct BBox2 {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  [[nodiscard]] Pixel center() const {
    return Pixel(0.5 * (x_min + x_max), 0.5 * (y_min + y_max));
  }
  [[nodiscard]] bool contains(const Pixel& p, double slack = 0.0) const {
    return p.x() >= x_min - slack && p.x() <= x_max + slack &&
           p.y() >= y_min - slack && p.y() <= y_max + slack;
  }
};

inline constexpr int kNoId = -1;

struct FrameBuffer {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3d> color;  // row-major, values in [0, 1]
  std::vector<double> depth;           // ray distance, +inf where empty
  std::vector<int> id;                 // kNoId where empty

  FrameBuffer() = default;
  FrameBuffer(int w, int h);

  [[nodiscard]] std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  [[nodiscard]] int count_id(int target) const;

  // 8-bit quantized color, interleaved RGB row-major.
  [[nodiscard]] std::vector<std::uint8_t> to_rgb8() const;
};

// Hull of the projected bounding-box corners; ignores all occluders.
// Throws std::invalid_argument when every corner is behind the camera.
BBox2 amodal_box(const Primitive& prim, const CameraModel& cam);

// Flat-shaded nearest-surface render. Pixels whose ray hits the table plane
// get the table color; everything else the sky color. Neither has an id.
FrameBuffer rasterize(std::span<const Primitive> scene, const CameraModel& cam);

// Visible pixels of `target_id` over its pixels when rendered alone. Zero when
// the target covers no pixel (out of frame). Throws std::invalid_argument for
// an unknown id.
double visibility_fraction(std::span<const Primitive> scene,
                           const CameraModel& cam, int target_id);

// Same, reusing an existing render of the full scene.
double visibility_fraction(const FrameBuffer& full,
                           std::span<const Primitive> scene,
                           const CameraModel& cam, int target_id);

// Binary PPM (P6, 8-bit) dump of the color plane.
void write_ppm(const FrameBuffer& fb, const std::string& path);

}  // namespace handeye::geom

#endif  // HANDEYE_GEOM_RASTER_HPP_
