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

#include "handeye/geom/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace handeye::geom {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = 1e-14;

const Eigen::Vector3d kTableColor(0.55, 0.50, 0.45);
const Eigen::Vector3d kSkyColor(0.80, 0.85, 0.90);

// World -> primitive-local (yaw removed, centered).
Eigen::Vector3d to_local(const Primitive& prim, const Eigen::Vector3d& v,
                         bool is_point) {
  const Eigen::Vector3d w = is_point ? Eigen::Vector3d(v - prim.center) : v;
  const double c = std::cos(prim.yaw);
  const double s = std::sin(prim.yaw);
  return {c * w.x() + s * w.y(), -s * w.x() + c * w.y(), w.z()};
}

void keep_min(double t, double& best) {
  if (t >= 0.0 && t < best) best = t;
}

// Roots of a t^2 + b t + c = 0 where the quadric is entered/exited.
bool solve_quadratic(double a, double b, double c, double& t0, double& t1) {
  if (std::abs(a) < kEps) return false;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  t0 = (-b - sq) / (2.0 * a);
  t1 = (-b + sq) / (2.0 * a);
  return true;
}

std::optional<double> intersect_box(const Eigen::Vector3d& o,
                                    const Eigen::Vector3d& d,
                                    const Eigen::Vector3d& h) {
  double t_near = -kInf;
  double t_far = kInf;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < kEps) {
      if (std::abs(o[i]) > h[i]) return std::nullopt;
      continue;
    }
    double ta = (-h[i] - o[i]) / d[i];
    double tb = (h[i] - o[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    t_near = std::max(t_near, ta);
    t_far = std::min(t_far, tb);
  }
  if (t_near > t_far || t_far < 0.0) return std::nullopt;
  return std::max(t_near, 0.0);
}

// Elliptic cylinder and truncated ellipsoid share the cap logic; `stretch`
// is the quadric z semi-axis over hz (0 means infinite, i.e. a cylinder).
std::optional<double> intersect_capped_quadric(const Eigen::Vector3d& o,
                                               const Eigen::Vector3d& d,
                                               const Eigen::Vector3d& h,
                                               double stretch) {
  const double inv_z = stretch > 0.0 ? 1.0 / (stretch * h.z()) : 0.0;
  const Eigen::Vector3d os(o.x() / h.x(), o.y() / h.y(), o.z() * inv_z);
  const Eigen::Vector3d ds(d.x() / h.x(), d.y() / h.y(), d.z() * inv_z);
  const double cap_r2 = stretch > 0.0 ? 1.0 - 1.0 / (stretch * stretch) : 1.0;

  const auto inside = [&](const Eigen::Vector3d& p) {
    const double r2 = (p.x() / h.x()) * (p.x() / h.x()) +
                      (p.y() / h.y()) * (p.y() / h.y()) +
                      (p.z() * inv_z) * (p.z() * inv_z);
    return r2 <= 1.0 && std::abs(p.z()) <= h.z();
  };
  if (inside(o)) return 0.0;

  double best = kInf;
  double t0 = 0.0;
  double t1 = 0.0;
  if (solve_quadratic(ds.squaredNorm(), 2.0 * os.dot(ds), os.squaredNorm() - 1.0,
                      t0, t1)) {
    for (double t : {t0, t1}) {
      if (std::abs(o.z() + t * d.z()) <= h.z()) keep_min(t, best);
    }
  }
  if (std::abs(d.z()) > kEps) {
    for (double zc : {-h.z(), h.z()}) {
      const double t = (zc - o.z()) / d.z();
      const double x = (o.x() + t * d.x()) / h.x();
      const double y = (o.y() + t * d.y()) / h.y();
      if (x * x + y * y <= cap_r2) keep_min(t, best);
    }
  }
  if (best == kInf) return std::nullopt;
  return best;
}

struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
  [[nodiscard]] bool empty() const { return x0 >= x1 || y0 >= y1; }
};

// Pixels whose centers can see the primitive. The projection of a convex
// solid in front of the camera lies inside the hull of its projected box
// corners, so the cull is exact up to the one-pixel margin.
PixelRect screen_rect(const Primitive& prim, const CameraModel& cam) {
  double x_min = kInf, y_min = kInf, x_max = -kInf, y_max = -kInf;
  for (const Point3& c : prim.corners()) {
    const Projection pr = project_point(c, cam);
    if (pr.behind) return {0, 0, cam.width, cam.height};
    x_min = std::min(x_min, pr.pixel.x());
    y_min = std::min(y_min, pr.pixel.y());
    x_max = std::max(x_max, pr.pixel.x());
    y_max = std::max(y_max, pr.pixel.y());
  }
  const auto clampi = [](double v, int hi) {
    return static_cast<int>(std::clamp(v, 0.0, static_cast<double>(hi)));
  };
  return {clampi(std::floor(x_min) - 1.0, cam.width),
          clampi(std::floor(y_min) - 1.0, cam.height),
          clampi(std::ceil(x_max) + 1.0, cam.width),
          clampi(std::ceil(y_max) + 1.0, cam.height)};
}

const Primitive& find_target(std::span<const Primitive> scene, int target_id) {
  const auto it = std::find_if(scene.begin(), scene.end(),
                               [&](const Primitive& p) { return p.id == target_id; });
  if (it == scene.end()) {
    throw std::invalid_argument("visibility_fraction: unknown target id " +
                                std::to_string(target_id));
  }
  return *it;
}

int target_only_pixels(const Primitive& target, const CameraModel& cam) {
  const PixelRect r = screen_rect(target, cam);
  int count = 0;
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      const Ray ray = ray_through_pixel(Pixel(x + 0.5, y + 0.5), cam);
      if (target.intersect(ray.origin, ray.direction)) ++count;
    }
  }
  return count;
}

}  // namespace

std::array<Point3, 8> Primitive::corners() const {
  std::array<Point3, 8> out;
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  int k = 0;
  for (int sx : {-1, 1}) {
    for (int sy : {-1, 1}) {
      for (int sz : {-1, 1}) {
        const double lx = sx * half_extents.x();
        const double ly = sy * half_extents.y();
        out[k++] = center + Point3(c * lx - s * ly, s * lx + c * ly,
                                   sz * half_extents.z());
      }
    }
  }
  return out;
}

std::optional<double> Primitive::intersect(const Point3& o,
                                           const Eigen::Vector3d& d) const {
  const Eigen::Vector3d ol = to_local(*this, o, true);
  const Eigen::Vector3d dl = to_local(*this, d, false);
  switch (shape) {
    case Shape::kBox:
      return intersect_box(ol, dl, half_extents);
    case Shape::kCylinder:
      return intersect_capped_quadric(ol, dl, half_extents, 0.0);
    case Shape::kTruncatedEllipsoid:
      return intersect_capped_quadric(ol, dl, half_extents, kEllipsoidStretch);
  }
  return std::nullopt;
}

bool Primitive::contains(const Point3& p) const {
  const Eigen::Vector3d l = to_local(*this, p, true);
  const Eigen::Vector3d& h = half_extents;
  if (std::abs(l.z()) > h.z()) return false;
  const double rx = l.x() / h.x();
  const double ry = l.y() / h.y();
  switch (shape) {
    case Shape::kBox:
      return std::abs(l.x()) <= h.x() && std::abs(l.y()) <= h.y();
    case Shape::kCylinder:
      return rx * rx + ry * ry <= 1.0;
    case Shape::kTruncatedEllipsoid: {
      const double rz = l.z() / (kEllipsoidStretch * h.z());
      return rx * rx + ry * ry + rz * rz <= 1.0;
    }
  }
  return false;
}

FrameBuffer::FrameBuffer(int w, int h)
    : width(w),
      height(h),
      color(static_cast<std::size_t>(w) * h, kSkyColor),
      depth(static_cast<std::size_t>(w) * h, kInf),
      id(static_cast<std::size_t>(w) * h, kNoId) {}

int FrameBuffer::count_id(int target) const {
  return static_cast<int>(std::count(id.begin(), id.end(), target));
}

std::vector<std::uint8_t> FrameBuffer::to_rgb8() const {
  std::vector<std::uint8_t> out;
  out.reserve(color.size() * 3);
  for (const Eigen::Vector3d& c : color) {
    for (int k = 0; k < 3; ++k) {
      out.push_back(static_cast<std::uint8_t>(
          std::lround(std::clamp(c[k], 0.0, 1.0) * 255.0)));
    }
  }
  return out;
}

BBox2 amodal_box(const Primitive& prim, const CameraModel& cam) {
  BBox2 box{kInf, kInf, -kInf, -kInf};
  bool any = false;
  for (const Point3& c : prim.corners()) {
    const Projection pr = project_point(c, cam);
    if (pr.behind) continue;
    any = true;
    box.x_min = std::min(box.x_min, pr.pixel.x());
    box.y_min = std::min(box.y_min, pr.pixel.y());
    box.x_max = std::max(box.x_max, pr.pixel.x());
    box.y_max = std::max(box.y_max, pr.pixel.y());
  }
  if (!any) throw std::invalid_argument("amodal_box: primitive behind camera");
  return box;
}

FrameBuffer rasterize(std::span<const Primitive> scene, const CameraModel& cam) {
  FrameBuffer fb(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Ray ray = ray_through_pixel(Pixel(x + 0.5, y + 0.5), cam);
      if (ray.direction.z() < 0.0 && ray.origin.z() > 0.0) {
        fb.color[fb.index(x, y)] = kTableColor;
      }
    }
  }
  for (const Primitive& prim : scene) {
    const PixelRect r = screen_rect(prim, cam);
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        const Ray ray = ray_through_pixel(Pixel(x + 0.5, y + 0.5), cam);
        const std::optional<double> t = prim.intersect(ray.origin, ray.direction);
        const std::size_t i = fb.index(x, y);
        if (t && *t < fb.depth[i]) {
          fb.depth[i] = *t;
          fb.id[i] = prim.id;
          fb.color[i] = prim.color;
        }
      }
    }
  }
  return fb;
}

double visibility_fraction(std::span<const Primitive> scene,
                           const CameraModel& cam, int target_id) {
  find_target(scene, target_id);
  return visibility_fraction(rasterize(scene, cam), scene, cam, target_id);
}

double visibility_fraction(const FrameBuffer& full,
                           std::span<const Primitive> scene,
                           const CameraModel& cam, int target_id) {
  const Primitive& target = find_target(scene, target_id);
  const int alone = target_only_pixels(target, cam);
  if (alone == 0) return 0.0;
  return static_cast<double>(full.count_id(target_id)) / alone;
}

void write_ppm(const FrameBuffer& fb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P6\n" << fb.width << ' ' << fb.height << "\n255\n";
  const std::vector<std::uint8_t> rgb = fb.to_rgb8();
  out.write(reinterpret_cast<const char*>(rgb.data()),
            static_cast<std::streamsize>(rgb.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace handeye::geom
