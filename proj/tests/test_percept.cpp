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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "handeye/env/pushing_env.hpp"
#include "handeye/harness/oracles.hpp"
#include "handeye/percept/detector.hpp"
#include "handeye/percept/encoding.hpp"

namespace {

using handeye::geom::BBox2;
using handeye::percept::DetectorParams;
using handeye::percept::Layout;
using handeye::percept::ProbabilityCurve;
using Eigen::Vector3d;

const BBox2 kBox{10.0, 12.0, 20.0, 24.0};

double detection_rate(double v, int draws, std::uint64_t seed,
                      ProbabilityCurve curve = ProbabilityCurve::kSqrtOccluded) {
  DetectorParams p;
  p.curve = curve;
  std::mt19937_64 rng(seed);
  int hits = 0;
  for (int i = 0; i < draws; ++i) {
    hits += handeye::percept::simulate_detection(v, kBox, p, rng).detected ? 1 : 0;
  }
  return static_cast<double>(hits) / draws;
}

TEST(Detector, Endpoints) {
  EXPECT_EQ(detection_rate(1.0, 5000, 1), 1.0);
  EXPECT_EQ(detection_rate(0.0, 5000, 2), 0.0);
}

TEST(Detector, ThreeQuartersVisibleIsACoinFlip) {
  EXPECT_NEAR(detection_rate(0.75, 100000, 3), 0.5, 0.01);
}

TEST(Detector, ProbabilityIsMonotone) {
  for (ProbabilityCurve c : {ProbabilityCurve::kSqrtOccluded, ProbabilityCurve::kPiecewiseLinear}) {
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
      const double p = handeye::percept::detection_probability(i / 1000.0, c);
      EXPECT_GE(p, prev);
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
      prev = p;
    }
  }
  EXPECT_NEAR(handeye::percept::detection_probability(0.1, ProbabilityCurve::kPiecewiseLinear),
              0.46, 1e-12);
}

TEST(Detector, EmpiricalCurveFollowsConfiguredCurve) {
  const auto curve = handeye::harness::detector_curve(DetectorParams{}, 11, 20000, 4);
  ASSERT_EQ(curve.size(), 11u);
  for (const auto& c : curve) EXPECT_NEAR(c.empirical, c.configured, 0.015) << c.visibility;
}

TEST(Detector, BoxNoiseHasConfiguredSpread) {
  DetectorParams p;
  p.box_noise_sigma = 1.0;
  std::mt19937_64 rng(5);
  const int n = 20000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto d = handeye::percept::simulate_detection(1.0, kBox, p, rng);
    ASSERT_TRUE(d.detected);
    const double e = d.box.y_max - kBox.y_max;
    sum += e;
    sq += e * e;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.03);
  EXPECT_NEAR(std::sqrt(sq / n), 1.0, 0.03);
}

TEST(Detector, ZeroNoiseKeepsTheAmodalBox) {
  DetectorParams p;
  p.box_noise_sigma = 0.0;
  std::mt19937_64 rng(6);
  const auto d = handeye::percept::simulate_detection(1.0, kBox, p, rng);
  EXPECT_EQ(d.box.x_min, kBox.x_min);
  EXPECT_EQ(d.box.y_max, kBox.y_max);
}

TEST(Detector, ParsesCurveNames) {
  EXPECT_EQ(handeye::percept::parse_curve("sqrt_occluded"), ProbabilityCurve::kSqrtOccluded);
  EXPECT_EQ(handeye::percept::parse_curve("piecewise_linear"), ProbabilityCurve::kPiecewiseLinear);
  EXPECT_THROW(handeye::percept::parse_curve("linear"), std::invalid_argument);
}

TEST(Localize, RecoversObjectsWithinOneCentimeter) {
  const auto rep = handeye::harness::localization_oracle(handeye::env::EnvConfig{}, 1000, 8);
  EXPECT_EQ(rep.within, 1000) << "max error " << rep.max_error;
}

TEST(Localize, PrincipalPointHitsTheOpticalAxis) {
  const auto cam = handeye::geom::default_camera();
  handeye::percept::Detection det;
  det.detected = true;
  det.box = BBox2{30.0, 30.0, 34.0, 34.0};
  const auto p = handeye::percept::localize_3d(det, cam, 0.0);
  ASSERT_TRUE(p);
  const auto q = handeye::geom::intersect_ray_plane(cam.position, cam.forward(), 0.0);
  ASSERT_TRUE(q);
  EXPECT_LT((*p - *q).norm(), 1e-9);
}

TEST(Localize, HorizontalRayGivesNothing) {
  const auto cam = handeye::geom::look_at(Vector3d(0, -1, 0.5), Vector3d(0, 0, 0.5));
  handeye::percept::Detection det;
  det.detected = true;
  det.box = BBox2{31.0, 31.0, 33.0, 33.0};
  EXPECT_FALSE(handeye::percept::localize_3d(det, cam, 0.5).has_value());
  det.detected = false;
  EXPECT_FALSE(handeye::percept::localize_3d(det, cam, 0.0).has_value());
}

TEST(Tracking, HoldsTheLastEstimateOnMisses) {
  const Vector3d prev(0.1, 0.2, 0.025);
  EXPECT_EQ(handeye::percept::track_estimate(prev, std::nullopt), prev);
  const Vector3d hit(0.3, 0.1, 0.025);
  EXPECT_EQ(handeye::percept::track_estimate(prev, hit), hit);
}

TEST(Tracking, StreaksAndAlternationAreStepwise) {
  Vector3d est(0, 0, 0.025);
  std::vector<Vector3d> trace;
  for (int t = 0; t < 20; ++t) {
    const bool hit = t % 2 == 0;
    const std::optional<Vector3d> loc =
        hit ? std::optional<Vector3d>(Vector3d(0.01 * t, 0, 0.025)) : std::nullopt;
    est = handeye::percept::track_estimate(est, loc);
    trace.push_back(est);
  }
  for (int t = 1; t < 20; t += 2) EXPECT_EQ(trace[t], trace[t - 1]);
  for (int t = 2; t < 20; t += 2) EXPECT_NE(trace[t], trace[t - 1]);
}

TEST(Tracking, PerceiveFollowsTheObjectWithoutNoise) {
  handeye::env::EnvConfig cfg;
  cfg.max_distractors = 0;
  DetectorParams p;
  p.box_noise_sigma = 0.0;
  std::mt19937_64 rng(10);
  handeye::env::WorldState s = handeye::env::reset(cfg, 10);
  s.gripper_pos.head<2>() = s.object_pos.head<2>() + Eigen::Vector2d(0.0, 0.06);
  auto per = handeye::percept::perceive_initial(s, cfg, p, rng);
  for (int t = 0; t < 20; ++t) {
    handeye::env::ActionFull a;
    a.gripper_delta = Eigen::Vector2d(0.0, -0.03);
    s = handeye::env::step(s, a, cfg).state;
    per = handeye::percept::perceive(s, cfg, p, per.estimate, rng);
    if (per.detection.detected) {
      EXPECT_LT((per.estimate - s.object_pos).head<2>().norm(), 0.01);
    }
    EXPECT_TRUE(per.estimate.allFinite());
  }
}

TEST(Tracking, PolledInitialEstimateIsFinite) {
  handeye::env::EnvConfig cfg;
  cfg.min_distractors = 3;
  DetectorParams p;
  p.oracle_initial_estimate = false;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const auto s = handeye::env::reset(cfg, 100 + i);
    EXPECT_TRUE(handeye::percept::perceive_initial(s, cfg, p, rng).estimate.allFinite());
  }
}

TEST(Encoding, ArithmeticExample) {
  const auto e = handeye::percept::encode(Eigen::VectorXd::Zero(64), Vector3d(1, 1, 1),
                                          Vector3d(1, 2, 3), Vector3d(0, 0, 0),
                                          Layout::kObjectCentric);
  EXPECT_EQ(e.relative_gripper, Vector3d(0, 1, 2));
  EXPECT_EQ(e.relative_goal, Vector3d(-1, -1, -1));
  EXPECT_EQ(e.state_vector().size(), 67);
  EXPECT_EQ(e.locations().size(), handeye::percept::location_dim(Layout::kObjectCentric));
}

TEST(Encoding, CoincidentPointsGiveZeros) {
  const Vector3d p(0.3, -0.2, 0.025);
  const auto e =
      handeye::percept::encode(Eigen::VectorXd::Ones(64), p, p, p, Layout::kObjectCentric);
  EXPECT_TRUE(e.locations().isZero(0.0));
}

TEST(Encoding, ObjectCentricIsExactlyTranslationInvariant) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-0.25, 0.25);
  // Coordinates on a 2^-20 m grid make every sum and difference exact, so
  // the comparison can be bitwise.
  const auto grid = [&] { return std::ldexp(std::round(std::ldexp(u(rng), 20)), -20); };
  for (int i = 0; i < 1000; ++i) {
    const Vector3d o(grid(), grid(), grid());
    const Vector3d h(grid(), grid(), grid());
    const Vector3d g(grid(), grid(), grid());
    const Vector3d c(grid(), grid(), grid());
    const Eigen::VectorXd f = Eigen::VectorXd::Random(64);
    const auto a = handeye::percept::encode(f, o, h, g, Layout::kObjectCentric);
    const auto b = handeye::percept::encode(f, o + c, h + c, g + c, Layout::kObjectCentric);
    EXPECT_EQ(a.state_vector(), b.state_vector());
    EXPECT_EQ(a.goal_vector(), b.goal_vector());
    const auto x = handeye::percept::encode(f, o, h, g, Layout::kAbsolute);
    const auto y = handeye::percept::encode(f, o + c, h + c, g + c, Layout::kAbsolute);
    EXPECT_EQ(y.goal_vector() - x.goal_vector(), c);
  }
}

TEST(Encoding, AbsoluteLayoutCarriesRawPositions) {
  const auto e = handeye::percept::encode(Eigen::VectorXd::Zero(4), Vector3d(1, 2, 3),
                                          Vector3d(4, 5, 6), Vector3d(7, 8, 9), Layout::kAbsolute);
  Eigen::VectorXd want(9);
  want << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  EXPECT_EQ(e.locations(), want);
  EXPECT_EQ(e.goal_vector(), Vector3d(7, 8, 9));
}

TEST(Encoding, RejectsNonFiniteInput) {
  EXPECT_THROW(handeye::percept::encode(Eigen::VectorXd::Zero(4),
                                        Vector3d(std::nan(""), 0, 0), Vector3d::Zero(),
                                        Vector3d::Zero(), Layout::kObjectCentric),
               std::invalid_argument);
}

}  // namespace
