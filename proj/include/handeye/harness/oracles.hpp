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

#ifndef HANDEYE_HARNESS_ORACLES_HPP_
#define HANDEYE_HARNESS_ORACLES_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "handeye/env/pushing_env.hpp"
#include "handeye/geom/raster.hpp"
#include "handeye/nn/gradcheck.hpp"
#include "handeye/percept/detector.hpp"
#include "handeye/rl/replay.hpp"

namespace handeye::harness {

// Noise-free amodal detections localized on random scenes and camera offsets.
struct LocalizationReport {
  int trials = 0;
  int within = 0;  // planar error at most `tolerance`
  double max_error = 0.0;
  double mean_error = 0.0;
};
LocalizationReport localization_oracle(const env::EnvConfig& cfg, int trials, std::uint64_t seed,
                                       double tolerance = 0.01);

// Visibility from `sub` x `sub` rays per pixel, each resolved by analytic
// nearest-hit over the scene.
double supersampled_visibility(const std::vector<geom::Primitive>& scene,
                               const geom::CameraModel& cam, int target_id, int sub = 4);

struct VisibilityReport {
  int scenes = 0;
  int occluded = 0;  // scenes where the oracle saw v < 0.99
  double max_abs_diff = 0.0;
  double mean_abs_diff = 0.0;
};
VisibilityReport visibility_oracle(const env::EnvConfig& cfg, int scenes, std::uint64_t seed,
                                   int sub = 4);

struct CurvePoint {
  double visibility = 0.0;
  double configured = 0.0;
  double empirical = 0.0;
};
std::vector<CurvePoint> detector_curve(const percept::DetectorParams& params, int levels,
                                       int draws, std::uint64_t seed);

// Finite-difference checks of every layer type plus the encoder, actor and
// critic networks, in float64.
struct GradientReport {
  std::vector<std::pair<std::string, nn::GradCheckResult>> items;
  [[nodiscard]] double worst() const;
};
GradientReport gradient_oracle(std::uint64_t seed);

// Fills a small replay ring from random-action rollouts in `cfg` (so it also
// evicts) and audits every stored record.
rl::ReplayAudit her_oracle(const env::EnvConfig& cfg, int episodes, std::size_t capacity,
                           double visibility_bonus, std::uint64_t seed);

// Object-centric encodings of (o, h, g) and (o + c, h + c, g + c) compared
// bitwise on a dyadic grid, where every difference is exact.
struct InvarianceReport {
  int trials = 0;
  int mismatches = 0;
};
InvarianceReport encoding_invariance_oracle(int trials, std::uint64_t seed);

// Twin episodes whose scene differs by a planar shift, driven by identical
// actions; discrepancy of the object track while both grippers stay in the
// interior of their region.
struct EquivarianceReport {
  int episodes = 0;
  int steps_checked = 0;
  int episodes_pushed = 0;  // object moved more than 1 cm
  double max_discrepancy = 0.0;
};
EquivarianceReport equivariance_oracle(const env::EnvConfig& cfg, int episodes,
                                       std::uint64_t seed);

// Repeats reset, step sequences and noise-free agent rollouts for every
// policy variant and counts any difference.
struct DeterminismReport {
  int comparisons = 0;
  int differences = 0;
};
DeterminismReport determinism_oracle(const env::EnvConfig& cfg, int episodes, std::uint64_t seed);

}  // namespace handeye::harness

#endif  // HANDEYE_HARNESS_ORACLES_HPP_
