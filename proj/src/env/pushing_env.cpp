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

#include "handeye/env/pushing_env.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace handeye::env {
namespace {

using geom::Primitive;
using geom::Shape;

const Eigen::Vector3d kObjectColor(0.85, 0.10, 0.10);
const Eigen::Vector3d kGripperColor(0.15, 0.15, 0.20);
constexpr double kGripperPuckHalfHeight = 0.015;

Vec2 xy(const Point3& p) { return p.head<2>(); }

Primitive sample_distractor(const EnvConfig& config, const Vec2& center_xy,
                            int id, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto lerp = [&](const Vec2& range) {
    return range.x() + u(rng) * (range.y() - range.x());
  };
  Primitive p;
  p.shape = static_cast<Shape>(std::uniform_int_distribution<int>(0, 2)(rng));
  const Vec2 c = Rect::centered(center_xy, config.distractor_spread).sample(rng);
  p.half_extents = Eigen::Vector3d(lerp(config.distractor_half_xy),
                                   lerp(config.distractor_half_xy),
                                   lerp(config.distractor_half_height));
  p.center = Point3(c.x(), c.y(), p.half_extents.z());
  p.yaw = u(rng) * std::numbers::pi;
  p.color = Eigen::Vector3d(u(rng), u(rng), u(rng));
  p.id = id;
  return p;
}

bool overlaps_footprint(const Primitive& p, const Vec2& object_xy, double object_radius) {
  const double reach = object_radius + p.half_extents.head<2>().norm();
  return (xy(p.center) - object_xy).norm() < reach;
}

nlohmann::json to_json(const Point3& p) { return {p.x(), p.y(), p.z()}; }
nlohmann::json to_json(const Vec2& p) { return {p.x(), p.y()}; }
Point3 point_from(const nlohmann::json& j) {
  return Point3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}
Vec2 vec2_from(const nlohmann::json& j) { return Vec2(j.at(0).get<double>(), j.at(1).get<double>()); }

}  // namespace

double EnvConfig::object_radius() const { return 0.5 * cube_side * std::numbers::sqrt2; }

Point3 EnvConfig::camera_origin() const { return geom::default_camera().position; }

geom::CameraModel EnvConfig::camera_at(const Point3& position) const {
  geom::CameraModel cam = geom::default_camera();
  cam.position = position;
  return cam;
}

void EnvConfig::validate() const {
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  if (!(cube_side > 0.0) || !(gripper_radius > 0.0)) {
    throw std::invalid_argument("cube side and gripper radius must be > 0");
  }
  if (min_distractors < 0 || max_distractors < min_distractors) {
    throw std::invalid_argument("invalid distractor count range");
  }
  if (!(camera_range >= 0.0) || !(camera_max_step >= 0.0) || !(gripper_max_step >= 0.0)) {
    throw std::invalid_argument("motion limits must be nonnegative");
  }
  if (!gripper_region.contains(gripper_start)) {
    throw std::invalid_argument("gripper start outside gripper workspace");
  }
}

bool WorldState::operator==(const WorldState& o) const {
  if (object_pos != o.object_pos || gripper_pos != o.gripper_pos ||
      camera_pos != o.camera_pos || goal != o.goal || step_index != o.step_index ||
      distractors.size() != o.distractors.size()) {
    return false;
  }
  for (std::size_t i = 0; i < distractors.size(); ++i) {
    const Primitive& a = distractors[i];
    const Primitive& b = o.distractors[i];
    if (a.shape != b.shape || a.center != b.center || a.yaw != b.yaw ||
        a.half_extents != b.half_extents || a.color != b.color || a.id != b.id) {
      return false;
    }
  }
  return true;
}

WorldState reset(const EnvConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  WorldState s;
  const double z = config.object_height();
  s.gripper_pos = Point3(config.gripper_start.x(), config.gripper_start.y(), z);
  s.camera_pos = config.camera_origin();

  const double contact = config.gripper_radius + config.object_radius();
  Vec2 obj = config.object_region.sample(rng);
  for (int i = 0; i < config.max_placement_retries &&
                  (obj - config.gripper_start).norm() < contact;
       ++i) {
    obj = config.object_region.sample(rng);
  }
  s.object_pos = Point3(obj.x(), obj.y(), z);

  Vec2 goal = config.goal_region.sample(rng);
  for (int i = 0; i < config.max_placement_retries &&
                  (goal - obj).norm() <= config.tolerance;
       ++i) {
    goal = config.goal_region.sample(rng);
  }
  s.goal = Point3(goal.x(), goal.y(), z);

  const int count = std::uniform_int_distribution<int>(config.min_distractors,
                                                       config.max_distractors)(rng);
  const Vec2 center = 0.5 * (obj + xy(s.camera_pos));
  for (int k = 0; k < count; ++k) {
    const int id = kFirstDistractorId + k;
    Primitive p = sample_distractor(config, center, id, rng);
    int tries = 0;
    while (overlaps_footprint(p, obj, config.object_radius())) {
      if (++tries > config.max_placement_retries) {
        throw std::runtime_error("reset: could not place distractor clear of the object");
      }
      p = sample_distractor(config, center, id, rng);
    }
    s.distractors.push_back(p);
  }
  return s;
}

Point3 push_dynamics(const Point3& object_pos, const Point3& gripper_old,
                     const Point3& gripper_new, const EnvConfig& config) {
  const double contact = config.gripper_radius + config.object_radius();
  const Vec2 motion = xy(gripper_new) - xy(gripper_old);
  Vec2 obj = xy(object_pos);
  for (int k = 1; k <= config.substeps; ++k) {
    const Vec2 g = xy(gripper_old) + motion * (static_cast<double>(k) / config.substeps);
    const Vec2 diff = obj - g;
    const double dist = diff.norm();
    if (dist >= contact) continue;
    Vec2 dir;
    if (dist > 1e-12) {
      dir = diff / dist;
    } else if (motion.norm() > 1e-12) {
      dir = motion.normalized();
    } else {
      dir = Vec2::UnitX();
    }
    obj += (contact - dist) * dir;
  }
  return {obj.x(), obj.y(), object_pos.z()};
}

bool is_success(const Point3& achieved, const Point3& goal, const EnvConfig& config) {
  return (xy(achieved) - xy(goal)).norm() <= config.tolerance;
}

double reward_fn(const Point3& achieved, const Point3& goal, const EnvConfig& config) {
  return is_success(achieved, goal, config) ? 0.0 : -1.0;
}

StepResult step(const WorldState& state, const ActionFull& action,
                const EnvConfig& config) {
  StepResult r;
  r.state = state;
  WorldState& s = r.state;

  const Vec2 gd = action.gripper_delta.cwiseMax(-config.gripper_max_step)
                      .cwiseMin(config.gripper_max_step);
  const Vec2 g_new = config.gripper_region.clamp(xy(state.gripper_pos) + gd);
  s.gripper_pos.head<2>() = g_new;

  const Vec2 cd = action.camera_delta.cwiseMax(-config.camera_max_step)
                      .cwiseMin(config.camera_max_step);
  const Rect cam_box = Rect::centered(xy(config.camera_origin()),
                                      Vec2::Constant(config.camera_range));
  s.camera_pos.head<2>() = cam_box.clamp(xy(state.camera_pos) + cd);

  s.object_pos = push_dynamics(state.object_pos, state.gripper_pos, s.gripper_pos, config);
  s.step_index = state.step_index + 1;

  r.achieved_goal = s.object_pos;
  r.success = is_success(s.object_pos, s.goal, config);
  r.reward = r.success ? 0.0 : -1.0;
  r.timeout = !r.success && s.step_index >= config.horizon;
  r.done = r.success || r.timeout;
  return r;
}

std::vector<geom::Primitive> build_scene(const WorldState& state,
                                         const EnvConfig& config) {
  std::vector<Primitive> scene;
  scene.reserve(2 + state.distractors.size());

  Primitive cube;
  cube.shape = Shape::kBox;
  cube.center = state.object_pos;
  cube.half_extents = Eigen::Vector3d::Constant(0.5 * config.cube_side);
  cube.color = kObjectColor;
  cube.id = kObjectId;
  scene.push_back(cube);

  Primitive puck;
  puck.shape = Shape::kCylinder;
  puck.center = Point3(state.gripper_pos.x(), state.gripper_pos.y(), kGripperPuckHalfHeight);
  puck.half_extents = Eigen::Vector3d(config.gripper_radius, config.gripper_radius,
                                      kGripperPuckHalfHeight);
  puck.color = kGripperColor;
  puck.id = kGripperId;
  scene.push_back(puck);

  scene.insert(scene.end(), state.distractors.begin(), state.distractors.end());
  return scene;
}

geom::CameraModel camera_for(const WorldState& state, const EnvConfig& config) {
  return config.camera_at(state.camera_pos);
}

void write_transcript(std::ostream& out, const std::vector<TranscriptStep>& steps) {
  for (const TranscriptStep& t : steps) {
    nlohmann::json d = nlohmann::json::array();
    for (const Primitive& p : t.state.distractors) {
      d.push_back({{"shape", static_cast<int>(p.shape)},
                   {"center", to_json(p.center)},
                   {"yaw", p.yaw},
                   {"half_extents", to_json(Point3(p.half_extents))},
                   {"color", to_json(Point3(p.color))},
                   {"id", p.id}});
    }
    const nlohmann::json line = {
        {"state",
         {{"object", to_json(t.state.object_pos)},
          {"gripper", to_json(t.state.gripper_pos)},
          {"camera", to_json(t.state.camera_pos)},
          {"goal", to_json(t.state.goal)},
          {"step", t.state.step_index},
          {"distractors", d}}},
        {"action",
         {{"gripper", to_json(t.action.gripper_delta)},
          {"camera", to_json(t.action.camera_delta)}}},
        {"reward", t.reward},
        {"done", t.done}};
    out << line.dump() << '\n';
  }
}

std::vector<TranscriptStep> read_transcript(std::istream& in) {
  std::vector<TranscriptStep> steps;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    TranscriptStep t;
    const nlohmann::json& s = j.at("state");
    t.state.object_pos = point_from(s.at("object"));
    t.state.gripper_pos = point_from(s.at("gripper"));
    t.state.camera_pos = point_from(s.at("camera"));
    t.state.goal = point_from(s.at("goal"));
    t.state.step_index = s.at("step");
    for (const nlohmann::json& d : s.at("distractors")) {
      Primitive p;
      p.shape = static_cast<Shape>(d.at("shape").get<int>());
      p.center = point_from(d.at("center"));
      p.yaw = d.at("yaw");
      p.half_extents = point_from(d.at("half_extents"));
      p.color = point_from(d.at("color"));
      p.id = d.at("id");
      t.state.distractors.push_back(p);
    }
    t.action.gripper_delta = vec2_from(j.at("action").at("gripper"));
    t.action.camera_delta = vec2_from(j.at("action").at("camera"));
    t.reward = j.at("reward");
    t.done = j.at("done");
    steps.push_back(std::move(t));
  }
  return steps;
}

}  // namespace handeye::env
