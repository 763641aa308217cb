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

#ifndef HANDEYE_ENV_PUSHING_ENV_HPP_
#define HANDEYE_ENV_PUSHING_ENV_HPP_

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "handeye/geom/camera.hpp"
#include "handeye/geom/raster.hpp"

namespace handeye::env {

using geom::Point3;
using Vec2 = Eigen::Vector2d;

// Axis-aligned rectangle on the table plane.
struct Rect {
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Zero();

  static Rect centered(const Vec2& c, const Vec2& half) { return {c - half, c + half}; }
  [[nodiscard]] bool contains(const Vec2& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  [[nodiscard]] Vec2 clamp(const Vec2& p) const { return p.cwiseMax(lo).cwiseMin(hi); }
  template <typename Rng>
  Vec2 sample(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double a = u(rng);
    const double b = u(rng);
    return lo + Vec2(a * (hi.x() - lo.x()), b * (hi.y() - lo.y()));
  }
};

struct EnvConfig {
  Rect object_region{Vec2(-0.15, -0.15), Vec2(0.15, 0.15)};
  Rect goal_region{Vec2(-0.15, -0.15), Vec2(0.15, 0.15)};
  Rect gripper_region{Vec2(-0.25, -0.25), Vec2(0.25, 0.25)};
  Vec2 gripper_start = Vec2(0.0, 0.20);

  double cube_side = 0.05;
  double gripper_radius = 0.02;
  double gripper_max_step = 0.05;
  int substeps = 10;

  // Camera translates in its horizontal plane around the default pose.
  double camera_range = 0.20;
  double camera_max_step = 0.06;

  int min_distractors = 0;
  int max_distractors = 3;
  // Half size of the placement rectangle centered between object and camera.
  Vec2 distractor_spread = Vec2(0.12, 0.08);
  Vec2 distractor_half_xy = Vec2(0.03, 0.06);      // min, max
  Vec2 distractor_half_height = Vec2(0.05, 0.15);  // min, max
  int max_placement_retries = 100;

  double tolerance = 0.02;
  int horizon = 50;

  [[nodiscard]] double object_height() const { return 0.5 * cube_side; }
  [[nodiscard]] double object_radius() const;  // circumscribes the cube footprint
  [[nodiscard]] Point3 camera_origin() const;
  [[nodiscard]] geom::CameraModel camera_at(const Point3& position) const;

  void validate() const;
};

inline constexpr int kObjectId = 0;
inline constexpr int kGripperId = 1;
inline constexpr int kFirstDistractorId = 2;

struct WorldState {
  Point3 object_pos = Point3::Zero();
  Point3 gripper_pos = Point3::Zero();
  Point3 camera_pos = Point3::Zero();
  std::vector<geom::Primitive> distractors;
  Point3 goal = Point3::Zero();
  int step_index = 0;

  bool operator==(const WorldState& other) const;
};

// Metric deltas; `step` clamps them to the per-step limits.
struct ActionFull {
  Vec2 gripper_delta = Vec2::Zero();
  Vec2 camera_delta = Vec2::Zero();
};

struct StepResult {
  WorldState state;
  double reward = -1.0;
  bool done = false;
  bool success = false;
  bool timeout = false;
  Point3 achieved_goal = Point3::Zero();
};

WorldState reset(const EnvConfig& config, std::uint64_t seed);

StepResult step(const WorldState& state, const ActionFull& action,
                const EnvConfig& config);

Point3 push_dynamics(const Point3& object_pos, const Point3& gripper_old,
                     const Point3& gripper_new, const EnvConfig& config);

double reward_fn(const Point3& achieved, const Point3& goal, const EnvConfig& config);

bool is_success(const Point3& achieved, const Point3& goal, const EnvConfig& config);

// Object cube, gripper puck, then distractors.
std::vector<geom::Primitive> build_scene(const WorldState& state,
                                         const EnvConfig& config);

geom::CameraModel camera_for(const WorldState& state, const EnvConfig& config);

// Line-delimited episode transcript: one JSON object per step.
struct TranscriptStep {
  WorldState state;  // state before the action
  ActionFull action;
  double reward = 0.0;
  bool done = false;
};

void write_transcript(std::ostream& out, const std::vector<TranscriptStep>& steps);
std::vector<TranscriptStep> read_transcript(std::istream& in);

}  // namespace handeye::env

#endif  // HANDEYE_ENV_PUSHING_ENV_HPP_
