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

#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "handeye/env/pushing_env.hpp"

namespace {

using handeye::env::ActionFull;
using handeye::env::EnvConfig;
using handeye::env::Point3;
using handeye::env::Vec2;
using handeye::env::WorldState;

EnvConfig cluttered() {
  EnvConfig c;
  c.min_distractors = 0;
  c.max_distractors = 3;
  return c;
}

// Pushes from behind the object toward the goal using the true state,
// re-aligning every step.
ActionFull scripted_push(const WorldState& s, const EnvConfig& cfg) {
  const Vec2 obj = s.object_pos.head<2>();
  const Vec2 goal = s.goal.head<2>();
  const Vec2 grip = s.gripper_pos.head<2>();
  ActionFull a;
  Vec2 dir = goal - obj;
  const double dist = dir.norm();
  if (dist < 1e-9) return a;
  dir /= dist;
  const double contact = cfg.object_radius() + cfg.gripper_radius;
  const Vec2 rel = grip - obj;
  const double along = rel.dot(dir);
  const Vec2 side(-dir.y(), dir.x());
  const double lateral = rel.dot(side);

  Vec2 target;
  if (along < 0.0 && std::abs(lateral) < 0.004 && -along < contact + 0.02) {
    // Lined up: drive through far enough to close the gap and cover the
    // remaining distance.
    target = grip + dir * ((-along - contact) + dist);
  } else if (along > -contact && std::abs(lateral) < contact + 0.005) {
    // Blocked by the object: go around on the nearer side.
    const double sgn = lateral >= 0.0 ? 1.0 : -1.0;
    target = obj + side * sgn * (contact + 0.01) - dir * contact;
  } else {
    target = obj - dir * (contact + 0.005);
  }
  Vec2 d = target - grip;
  // Scale rather than clip per axis so the direction survives.
  const double m = d.cwiseAbs().maxCoeff();
  if (m > cfg.gripper_max_step) d *= cfg.gripper_max_step / m;
  a.gripper_delta = d;
  return a;
}

TEST(Reset, IsDeterministicPerSeed) {
  const EnvConfig cfg = cluttered();
  for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
    EXPECT_TRUE(handeye::env::reset(cfg, seed) == handeye::env::reset(cfg, seed));
  }
  EXPECT_FALSE(handeye::env::reset(cfg, 1) == handeye::env::reset(cfg, 2));
}

TEST(Reset, CameraStartsAtOriginAndObjectOnTable) {
  const EnvConfig cfg = cluttered();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const WorldState s = handeye::env::reset(cfg, seed);
    EXPECT_EQ(s.camera_pos, cfg.camera_origin());
    EXPECT_DOUBLE_EQ(s.object_pos.z(), 0.5 * cfg.cube_side);
    EXPECT_TRUE(cfg.object_region.contains(s.object_pos.head<2>()));
    EXPECT_TRUE(cfg.goal_region.contains(s.goal.head<2>()));
    EXPECT_EQ(s.step_index, 0);
  }
}

TEST(Reset, DistractorCountIsUniform) {
  const EnvConfig cfg = cluttered();
  std::array<int, 4> counts{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto s = handeye::env::reset(cfg, static_cast<std::uint64_t>(i) + 12345);
    ASSERT_LE(s.distractors.size(), 3u);
    ++counts[s.distractors.size()];
  }
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / n, 0.25, 0.03);
}

TEST(Reset, DistractorsAvoidTheObjectFootprint) {
  const EnvConfig cfg = cluttered();
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const auto s = handeye::env::reset(cfg, seed);
    for (const auto& d : s.distractors) {
      EXPECT_FALSE(d.contains(s.object_pos));
      EXPECT_GE(d.id, handeye::env::kFirstDistractorId);
    }
  }
}

TEST(Step, ZeroActionAtGoalSucceeds) {
  const EnvConfig cfg;
  WorldState s = handeye::env::reset(cfg, 4);
  s.goal = s.object_pos;
  const auto r = handeye::env::step(s, ActionFull{}, cfg);
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(r.success);
}

TEST(Step, NonSuccessStepCostsOne) {
  const EnvConfig cfg;
  WorldState s = handeye::env::reset(cfg, 4);
  s.goal = s.object_pos + Point3(0.1, 0.0, 0.0);
  const auto r = handeye::env::step(s, ActionFull{}, cfg);
  EXPECT_EQ(r.reward, -1.0);
  EXPECT_FALSE(r.done);
  EXPECT_EQ(r.state.step_index, 1);
}

TEST(Step, HorizonEndsTheEpisodeWithNormalReward) {
  EnvConfig cfg;
  cfg.horizon = 3;
  WorldState s = handeye::env::reset(cfg, 4);
  s.goal = s.object_pos + Point3(0.1, 0.0, 0.0);
  handeye::env::StepResult r;
  for (int t = 0; t < 3; ++t) {
    r = handeye::env::step(s, ActionFull{}, cfg);
    s = r.state;
  }
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(r.timeout);
  EXPECT_EQ(r.reward, -1.0);
}

TEST(Step, CameraStepIsCappedAtSixCentimeters) {
  const EnvConfig cfg;
  const WorldState s = handeye::env::reset(cfg, 8);
  ActionFull a;
  a.camera_delta = Vec2(0.10, 0.0);
  const auto r = handeye::env::step(s, a, cfg);
  EXPECT_NEAR((r.state.camera_pos - s.camera_pos).x(), 0.06, 1e-12);
  EXPECT_NEAR((r.state.camera_pos - s.camera_pos).y(), 0.0, 1e-12);
}

TEST(Step, CameraStaysInsideItsBox) {
  const EnvConfig cfg;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  WorldState s = handeye::env::reset(cfg, 8);
  for (int t = 0; t < 500; ++t) {
    ActionFull a;
    a.camera_delta = Vec2(u(rng), u(rng));
    a.gripper_delta = Vec2(u(rng), u(rng));
    s = handeye::env::step(s, a, cfg).state;
    s.step_index = 0;
    const Point3 off = s.camera_pos - cfg.camera_origin();
    EXPECT_LE(std::abs(off.x()), cfg.camera_range + 1e-12);
    EXPECT_LE(std::abs(off.y()), cfg.camera_range + 1e-12);
    EXPECT_DOUBLE_EQ(off.z(), 0.0);
    EXPECT_TRUE(cfg.gripper_region.contains(s.gripper_pos.head<2>()));
  }
}

TEST(Step, IsDeterministic) {
  const EnvConfig cfg = cluttered();
  const WorldState s = handeye::env::reset(cfg, 21);
  ActionFull a;
  a.gripper_delta = Vec2(0.013, -0.04);
  a.camera_delta = Vec2(-0.02, 0.05);
  const auto r1 = handeye::env::step(s, a, cfg);
  const auto r2 = handeye::env::step(s, a, cfg);
  EXPECT_TRUE(r1.state == r2.state);
  EXPECT_EQ(r1.reward, r2.reward);
}

TEST(Reward, ToleranceBoundary) {
  const EnvConfig cfg;
  const Point3 g(0.0, 0.0, 0.025);
  EXPECT_EQ(handeye::env::reward_fn(g, g, cfg), 0.0);
  EXPECT_EQ(handeye::env::reward_fn(g + Point3(0.019, 0, 0), g, cfg), 0.0);
  EXPECT_EQ(handeye::env::reward_fn(g + Point3(0.021, 0, 0), g, cfg), -1.0);
  // Height does not count.
  EXPECT_EQ(handeye::env::reward_fn(g + Point3(0, 0, 0.5), g, cfg), 0.0);
}

TEST(Reward, AchievedGoalIsAlwaysASuccess) {
  const EnvConfig cfg;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Point3 p(u(rng), u(rng), u(rng));
    EXPECT_EQ(handeye::env::reward_fn(p, p, cfg), 0.0);
  }
}

TEST(Push, DistantGripperLeavesObject) {
  const EnvConfig cfg;
  const Point3 obj(0, 0, 0.025);
  const Point3 moved =
      handeye::env::push_dynamics(obj, Point3(0.2, 0.2, 0.02), Point3(0.2, 0.1, 0.02), cfg);
  EXPECT_EQ(moved, obj);
}

TEST(Push, HeadOnPushMovesAlongTheGripperPath) {
  const EnvConfig cfg;
  const Point3 obj(0, 0, 0.025);
  const double start = -(cfg.object_radius() + cfg.gripper_radius) - 0.001;
  const Point3 moved = handeye::env::push_dynamics(obj, Point3(start, 0, 0.02),
                                                   Point3(start + 0.05, 0, 0.02), cfg);
  EXPECT_GT(moved.x(), 0.04);
  EXPECT_NEAR(moved.y(), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(moved.z(), obj.z());
}

TEST(Push, ObjectNeverOverlapsGripperAfterAStep) {
  const EnvConfig cfg;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (int i = 0; i < 2000; ++i) {
    const Point3 obj(u(rng), u(rng), 0.025);
    const Point3 g0(u(rng) - 0.1, u(rng), 0.02);
    const Point3 g1 = g0 + Point3(0.05 * std::copysign(1.0, u(rng)), 0.5 * u(rng), 0.0);
    if ((g0 - obj).head<2>().norm() < cfg.object_radius() + cfg.gripper_radius) continue;
    const Point3 moved = handeye::env::push_dynamics(obj, g0, g1, cfg);
    EXPECT_GE((moved - g1).head<2>().norm(), cfg.object_radius() + cfg.gripper_radius - 1e-9);
  }
}

TEST(Push, DisplacementIsContinuousInTheGripperPath) {
  const EnvConfig cfg;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  const Point3 obj(0.0, 0.0, 0.025);
  const double contact = cfg.object_radius() + cfg.gripper_radius;
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    // Start just out of contact and sweep a full step toward the object
    // with a random lateral offset.
    const double a = ang(rng);
    const Vec2 dir(std::cos(a), std::sin(a));
    const Vec2 side(-dir.y(), dir.x());
    const Vec2 start = -dir * (contact + 0.005) + side * (0.8 * contact * u(rng));
    const Point3 g0(start.x(), start.y(), 0.02);
    const Point3 g1 = g0 + Point3(dir.x(), dir.y(), 0.0) * cfg.gripper_max_step;
    const double b = ang(rng);
    const Point3 jitter = 1e-3 * Point3(std::cos(b), std::sin(b), 0.0);
    const Point3 p = handeye::env::push_dynamics(obj, g0, g1, cfg);
    const Point3 q = handeye::env::push_dynamics(obj, g0 + jitter, g1 + jitter, cfg);
    worst = std::max(worst, (p - q).norm());
  }
  EXPECT_LE(worst, 5e-3);
}

TEST(Equivariance, TranslatedEpisodesStayTranslated) {
  EnvConfig cfg = cluttered();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  int checked = 0;
  int pushed = 0;
  for (int trial = 0; trial < 50; ++trial) {
    WorldState s = handeye::env::reset(cfg, rng());
    // Keep everything well inside the workspace.
    s.object_pos.head<2>() *= 0.4;
    s.goal.head<2>() *= 0.4;
    s.gripper_pos.head<2>() = s.object_pos.head<2>() + Vec2(0.0, 0.08);
    const Vec2 shift(0.03 * u(rng), 0.03 * u(rng));
    const Point3 start = s.object_pos;
    WorldState t = s;
    t.object_pos.head<2>() += shift;
    t.goal.head<2>() += shift;
    t.gripper_pos.head<2>() += shift;
    for (auto& d : t.distractors) d.center.head<2>() += shift;
    for (int k = 0; k < cfg.horizon; ++k) {
      ActionFull a;
      a.gripper_delta = Vec2(0.01 * u(rng), -0.004 + 0.01 * u(rng));
      a.camera_delta = Vec2(0.03 * u(rng), 0.03 * u(rng));
      const auto rs = handeye::env::step(s, a, cfg);
      const auto rt = handeye::env::step(t, a, cfg);
      s = rs.state;
      t = rt.state;
      if (!cfg.gripper_region.contains(s.gripper_pos.head<2>() * 1.25) ||
          !cfg.gripper_region.contains(t.gripper_pos.head<2>() * 1.25)) {
        break;  // left the interior; the clamp is not translation invariant
      }
      worst = std::max(worst, (t.object_pos.head<2>() - s.object_pos.head<2>() - shift).norm());
      ++checked;
    }
    pushed += (s.object_pos - start).norm() > 0.01 ? 1 : 0;
  }
  EXPECT_GT(checked, 1000);
  EXPECT_GT(pushed, 25);  // the sequences really do move the object
  EXPECT_LE(worst, 1e-3);
}

TEST(Environment, ScriptedPusherSolvesTheTask) {
  const EnvConfig cfg;
  int wins = 0;
  const int n = 400;
  for (int e = 0; e < n; ++e) {
    WorldState s = handeye::env::reset(cfg, 5000 + e);
    for (int t = 0; t < cfg.horizon; ++t) {
      const auto r = handeye::env::step(s, scripted_push(s, cfg), cfg);
      s = r.state;
      if (r.success) {
        ++wins;
        break;
      }
      if (r.done) break;
    }
  }
  EXPECT_GE(static_cast<double>(wins) / n, 0.95);
}

TEST(Transcript, RoundTripsExactly) {
  const EnvConfig cfg = cluttered();
  WorldState s = handeye::env::reset(cfg, 31);
  std::vector<handeye::env::TranscriptStep> steps;
  for (int t = 0; t < 5; ++t) {
    ActionFull a;
    a.gripper_delta = Vec2(0.01 * t, -0.003);
    const auto r = handeye::env::step(s, a, cfg);
    steps.push_back({s, a, r.reward, r.done});
    s = r.state;
  }
  std::stringstream buf;
  handeye::env::write_transcript(buf, steps);
  const auto back = handeye::env::read_transcript(buf);
  ASSERT_EQ(back.size(), steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    EXPECT_TRUE(back[i].state == steps[i].state);
    EXPECT_EQ(back[i].action.gripper_delta, steps[i].action.gripper_delta);
    EXPECT_EQ(back[i].reward, steps[i].reward);
  }
}

TEST(Config, RejectsBadValues) {
  EnvConfig c;
  c.tolerance = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = EnvConfig{};
  c.horizon = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
