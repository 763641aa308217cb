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

#include "handeye/percept/detector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace handeye::percept {

ProbabilityCurve parse_curve(const std::string& name) {
  if (name == "sqrt_occluded") return ProbabilityCurve::kSqrtOccluded;
  if (name == "piecewise_linear") return ProbabilityCurve::kPiecewiseLinear;
  throw std::invalid_argument("unknown detection curve '" + name + "'");
}

std::string to_string(ProbabilityCurve curve) {
  return curve == ProbabilityCurve::kSqrtOccluded ? "sqrt_occluded" : "piecewise_linear";
}

double detection_probability(double visibility, ProbabilityCurve curve) {
  const double v = std::clamp(visibility, 0.0, 1.0);
  switch (curve) {
    case ProbabilityCurve::kSqrtOccluded:
      return 1.0 - std::sqrt(1.0 - v);
    case ProbabilityCurve::kPiecewiseLinear:
      return std::min(4.6 * v, 0.1 * v + 0.9);
  }
  return 0.0;
}

Detection simulate_detection(double visibility, const geom::BBox2& amodal,
                             const DetectorParams& params, std::mt19937_64& rng) {
  if (!(visibility >= 0.0 && visibility <= 1.0)) {
    throw std::invalid_argument("simulate_detection: visibility outside [0, 1]");
  }
  Detection det;
  const double p = detection_probability(visibility, params.curve);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Fixed draw count per call: one uniform, four normals.
  det.detected = u(rng) < p;
  std::normal_distribution<double> noise(0.0, params.box_noise_sigma);
  const double n0 = noise(rng);
  const double n1 = noise(rng);
  const double n2 = noise(rng);
  const double n3 = noise(rng);
  if (!det.detected) return det;
  det.confidence = p;
  geom::BBox2 b{amodal.x_min + n0, amodal.y_min + n1, amodal.x_max + n2, amodal.y_max + n3};
  if (b.x_min > b.x_max) std::swap(b.x_min, b.x_max);
  if (b.y_min > b.y_max) std::swap(b.y_min, b.y_max);
  det.box = b;
  return det;
}

std::optional<Point3> localize_3d(const Detection& det, const geom::CameraModel& cam,
                                  double object_center_height) {
  if (!det.detected) return std::nullopt;
  const geom::Ray ray = geom::ray_through_pixel(det.box.center(), cam);
  return geom::intersect_ray_plane(ray.origin, ray.direction, object_center_height);
}

Point3 track_estimate(const Point3& previous, const std::optional<Point3>& located) {
  if (located && located->allFinite()) return *located;
  return previous;
}

Percept perceive(const env::WorldState& state, const env::EnvConfig& env_cfg,
                 const DetectorParams& params, const Point3& previous_estimate,
                 std::mt19937_64& rng) {
  const std::vector<geom::Primitive> scene = env::build_scene(state, env_cfg);
  const geom::CameraModel cam = env::camera_for(state, env_cfg);
  Percept out;
  out.frame = geom::rasterize(scene, cam);
  out.visibility = geom::visibility_fraction(out.frame, scene, cam, env::kObjectId);

  geom::BBox2 amodal;
  bool framed = true;
  try {
    amodal = geom::amodal_box(scene.front(), cam);
  } catch (const std::invalid_argument&) {
    framed = false;
  }
  out.detection = simulate_detection(framed ? out.visibility : 0.0, amodal, params, rng);
  out.estimate = track_estimate(
      previous_estimate, localize_3d(out.detection, cam, env_cfg.object_height()));
  return out;
}

Percept perceive_initial(const env::WorldState& state, const env::EnvConfig& env_cfg,
                         const DetectorParams& params, std::mt19937_64& rng) {
  if (params.oracle_initial_estimate) {
    Percept p = perceive(state, env_cfg, params, state.object_pos, rng);
    p.estimate = state.object_pos;
    return p;
  }
  // Poll until the first hit; fall back to the workspace center.
  Percept p = perceive(state, env_cfg, params, Point3(0.0, 0.0, env_cfg.object_height()), rng);
  for (int i = 1; i < params.max_initial_polls && !p.detection.detected; ++i) {
    p = perceive(state, env_cfg, params, p.estimate, rng);
  }
  return p;
}

}  // namespace handeye::percept
