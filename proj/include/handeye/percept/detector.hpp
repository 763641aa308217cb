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

#ifndef HANDEYE_PERCEPT_DETECTOR_HPP_
#define HANDEYE_PERCEPT_DETECTOR_HPP_

#include <optional>
#include <random>
#include <string>

#include <Eigen/Core>

#include "handeye/env/pushing_env.hpp"
#include "handeye/geom/camera.hpp"
#include "handeye/geom/raster.hpp"

namespace handeye::percept {

using geom::Point3;

enum class ProbabilityCurve {
  kSqrtOccluded,     // 1 - sqrt(1 - v)
  kPiecewiseLinear,  // min(4.6 v, 0.1 v + 0.9)
};

ProbabilityCurve parse_curve(const std::string& name);
std::string to_string(ProbabilityCurve curve);

struct DetectorParams {
  double box_noise_sigma = 1.0;  // pixels, applied to every box coordinate
  ProbabilityCurve curve = ProbabilityCurve::kSqrtOccluded;
  // Seed the estimate from the true object position at reset; otherwise
  // the detector is polled at t = 0 until it first fires.
  bool oracle_initial_estimate = true;
  int max_initial_polls = 100;
};

struct Detection {
  bool detected = false;
  geom::BBox2 box;  // meaningful only when detected
  double confidence = 0.0;
};

double detection_probability(double visibility, ProbabilityCurve curve);

Detection simulate_detection(double visibility, const geom::BBox2& amodal,
                             const DetectorParams& params, std::mt19937_64& rng);

// Ray through the box center intersected with z = object_center_height.
std::optional<Point3> localize_3d(const Detection& det, const geom::CameraModel& cam,
                                  double object_center_height);

// Hold-last: a miss keeps the previous estimate.
Point3 track_estimate(const Point3& previous, const std::optional<Point3>& located);

// Everything the agent perceives at one step, before the learned encoder.
struct Percept {
  geom::FrameBuffer frame;
  double visibility = 0.0;
  Detection detection;
  Point3 estimate = Point3::Zero();  // tracked object estimate after this frame
};

// Renders the state, measures visibility, runs the simulated detector and
// updates the hold-last estimate.
Percept perceive(const env::WorldState& state, const env::EnvConfig& env_cfg,
                 const DetectorParams& params, const Point3& previous_estimate,
                 std::mt19937_64& rng);

// Initial estimate for a fresh episode (oracle or polled, per params).
Percept perceive_initial(const env::WorldState& state, const env::EnvConfig& env_cfg,
                         const DetectorParams& params, std::mt19937_64& rng);

}  // namespace handeye::percept

#endif  // HANDEYE_PERCEPT_DETECTOR_HPP_
