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

#include "handeye/harness/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "handeye/harness/trainer.hpp"
#include "handeye/nn/networks.hpp"
#include "handeye/percept/encoding.hpp"
#include "handeye/rl/agent.hpp"

namespace handeye::harness {
namespace {

using nn::Mat;
using nn::Mode;
using nn::ParamSet;

Mat<double> random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Scalar probe sum(R .* net(x)) checked over parameters and the input.
nn::GradCheckResult check_sequential(const nn::Sequential& net, const Mat<double>& x, Mode mode,
                                     std::mt19937_64& rng, int max_per_tensor = -1,
                                     bool check_input = true, bool skip_kinks = false,
                                     double floor = 1e-6) {
  ParamSet<double> p;
  net.init(p, rng);
  // Perturb gains and offsets away from their identity initialization.
  for (auto& [name, e] : p.entries()) {
    if (name.find(".gain") != std::string::npos || name.find(".offset") != std::string::npos ||
        name.find(".bias") != std::string::npos) {
      e.value += 0.3 * random_matrix(e.value.rows(), e.value.cols(), rng);
    }
    if (name.find("running_var") != std::string::npos) e.value.array() += 0.5;
  }
  nn::Tape<double> tape;
  const Mat<double> y = net.forward(p, x, mode, &tape);
  const Mat<double> R = random_matrix(y.rows(), y.cols(), rng);
  ParamSet<double> g = p.zeros_like();
  const Mat<double> dx = net.backward(p, tape, R, g, true);

  const auto loss_p = [&](const ParamSet<double>& q) {
    return (net.forward(q, x, mode, nullptr).array() * R.array()).sum();
  };
  nn::GradCheckResult r =
      nn::check_param_gradients(p, g, loss_p, 1e-5, max_per_tensor, rng(), floor, skip_kinks);
  if (check_input) {
    const auto loss_x = [&](const Mat<double>& xi) {
      return (net.forward(p, xi, mode, nullptr).array() * R.array()).sum();
    };
    r.merge(nn::check_input_gradient(x, dx, loss_x));
  }
  return r;
}

}  // namespace

LocalizationReport localization_oracle(const env::EnvConfig& cfg, int trials, std::uint64_t seed,
                                       double tolerance) {
  env::EnvConfig clean = cfg;
  clean.min_distractors = 0;
  clean.max_distractors = 0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> offset(-cfg.camera_range, cfg.camera_range);
  LocalizationReport rep;
  double sum = 0.0;
  for (int i = 0; i < trials; ++i) {
    env::WorldState s = env::reset(clean, rng());
    s.camera_pos += Eigen::Vector3d(offset(rng), offset(rng), 0.0);
    const auto scene = env::build_scene(s, clean);
    const geom::CameraModel cam = env::camera_for(s, clean);
    percept::Detection det;
    det.detected = true;
    det.box = geom::amodal_box(scene.front(), cam);
    const auto est = percept::localize_3d(det, cam, clean.object_height());
    const double err = est ? (est->head<2>() - s.object_pos.head<2>()).norm()
                           : std::numeric_limits<double>::infinity();
    ++rep.trials;
    rep.within += err <= tolerance ? 1 : 0;
    rep.max_error = std::max(rep.max_error, err);
    sum += err;
  }
  rep.mean_error = rep.trials ? sum / rep.trials : 0.0;
  return rep;
}

double supersampled_visibility(const std::vector<geom::Primitive>& scene,
                               const geom::CameraModel& cam, int target_id, int sub) {
  const auto it = std::find_if(scene.begin(), scene.end(),
                               [&](const geom::Primitive& p) { return p.id == target_id; });
  if (it == scene.end()) throw std::invalid_argument("supersampled_visibility: unknown id");
  int x0 = 0;
  int y0 = 0;
  int x1 = cam.width;
  int y1 = cam.height;
  try {
    const geom::BBox2 b = geom::amodal_box(*it, cam);
    x0 = std::clamp(static_cast<int>(std::floor(b.x_min)) - 1, 0, cam.width);
    y0 = std::clamp(static_cast<int>(std::floor(b.y_min)) - 1, 0, cam.height);
    x1 = std::clamp(static_cast<int>(std::ceil(b.x_max)) + 1, 0, cam.width);
    y1 = std::clamp(static_cast<int>(std::ceil(b.y_max)) + 1, 0, cam.height);
  } catch (const std::invalid_argument&) {
    return 0.0;
  }
  long seen = 0;
  long total = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      for (int j = 0; j < sub; ++j) {
        for (int i = 0; i < sub; ++i) {
          const geom::Pixel px(x + (i + 0.5) / sub, y + (j + 0.5) / sub);
          const geom::Ray ray = geom::ray_through_pixel(px, cam);
          const auto t_target = it->intersect(ray.origin, ray.direction);
          if (!t_target) continue;
          ++total;
          bool hidden = false;
          for (const geom::Primitive& p : scene) {
            if (p.id == target_id) continue;
            const auto t = p.intersect(ray.origin, ray.direction);
            if (t && *t < *t_target) {
              hidden = true;
              break;
            }
          }
          seen += hidden ? 0 : 1;
        }
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(seen) / static_cast<double>(total);
}

VisibilityReport visibility_oracle(const env::EnvConfig& cfg, int scenes, std::uint64_t seed,
                                   int sub) {
  env::EnvConfig cluttered = cfg;
  cluttered.min_distractors = std::max(1, cfg.min_distractors);
  cluttered.max_distractors = std::max(cluttered.min_distractors, cfg.max_distractors);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> offset(-cfg.camera_range, cfg.camera_range);
  VisibilityReport rep;
  double sum = 0.0;
  for (int i = 0; i < scenes; ++i) {
    env::WorldState s = env::reset(cluttered, rng());
    s.camera_pos += Eigen::Vector3d(offset(rng), offset(rng), 0.0);
    const auto scene = env::build_scene(s, cluttered);
    const geom::CameraModel cam = env::camera_for(s, cluttered);
    const double fast = geom::visibility_fraction(scene, cam, env::kObjectId);
    const double slow = supersampled_visibility(scene, cam, env::kObjectId, sub);
    const double d = std::abs(fast - slow);
    ++rep.scenes;
    rep.occluded += slow < 0.99 ? 1 : 0;
    rep.max_abs_diff = std::max(rep.max_abs_diff, d);
    sum += d;
  }
  rep.mean_abs_diff = rep.scenes ? sum / rep.scenes : 0.0;
  return rep;
}

std::vector<CurvePoint> detector_curve(const percept::DetectorParams& params, int levels,
                                       int draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const geom::BBox2 box{20.0, 20.0, 30.0, 30.0};
  std::vector<CurvePoint> out;
  for (int l = 0; l < levels; ++l) {
    CurvePoint c;
    c.visibility = levels == 1 ? 1.0 : static_cast<double>(l) / (levels - 1);
    c.configured = percept::detection_probability(c.visibility, params.curve);
    int hits = 0;
    for (int d = 0; d < draws; ++d) {
      hits += percept::simulate_detection(c.visibility, box, params, rng).detected ? 1 : 0;
    }
    c.empirical = static_cast<double>(hits) / draws;
    out.push_back(c);
  }
  return out;
}

double GradientReport::worst() const {
  double w = 0.0;
  for (const auto& [name, r] : items) w = std::max(w, r.max_rel_error);
  return w;
}

GradientReport gradient_oracle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradientReport rep;
  const auto single = [](nn::Layer l) { return nn::Sequential({std::move(l)}); };

  rep.items.emplace_back("linear", check_sequential(single(nn::Linear{"lin", 5, 4}),
                                                    random_matrix(5, 3, rng), Mode::kTrain, rng));
  rep.items.emplace_back("layer_norm", check_sequential(single(nn::LayerNorm{"ln", 6}),
                                                        random_matrix(6, 3, rng), Mode::kTrain, rng));
  rep.items.emplace_back("relu", check_sequential(single(nn::Relu{}), random_matrix(7, 3, rng),
                                                  Mode::kTrain, rng));
  rep.items.emplace_back("tanh", check_sequential(single(nn::Tanh{}), random_matrix(7, 3, rng),
                                                  Mode::kTrain, rng));

  nn::Conv2d c2;
  c2.name = "conv_s2";
  c2.in_channels = 3;
  c2.out_channels = 4;
  c2.in_height = c2.in_width = 8;
  c2.kernel = 4;
  c2.stride = 2;
  c2.pad = 1;
  rep.items.emplace_back("conv_stride2",
                         check_sequential(single(c2), random_matrix(c2.in_size(), 2, rng),
                                          Mode::kTrain, rng));
  nn::Conv2d c4 = c2;
  c4.name = "conv_s4";
  c4.stride = 4;
  c4.pad = 0;
  rep.items.emplace_back("conv_stride4",
                         check_sequential(single(c4), random_matrix(c4.in_size(), 2, rng),
                                          Mode::kTrain, rng));

  const nn::BatchNorm2d bn{"bn", 3, 4, 0.99};
  rep.items.emplace_back("batch_norm_train", check_sequential(single(bn), random_matrix(12, 3, rng),
                                                              Mode::kTrain, rng));
  rep.items.emplace_back("batch_norm_eval", check_sequential(single(bn), random_matrix(12, 3, rng),
                                                             Mode::kEval, rng));
  rep.items.emplace_back("global_avg_pool",
                         check_sequential(single(nn::GlobalAvgPool{3, 4}),
                                          random_matrix(12, 3, rng), Mode::kTrain, rng));

  // Encoder at full size with parameters subsampled. Thousands of ReLU
  // inputs per channel sit close enough to zero for a 1e-5 step to cross
  // them, so kink-straddling entries are set aside. The input check is
  // skipped at this size. Conv biases feeding train-mode batch norm have an
  // identically zero gradient, so their numeric estimate is round-off near
  // 1e-10; the larger floor keeps that from reading as relative error.
  const nn::CNNSpec spec;
  Mat<double> img = Mat<double>::Zero(spec.image_size * spec.image_size * spec.in_channels, 2);
  {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = u(rng);
  }
  rep.items.emplace_back("encoder",
                         check_sequential(nn::make_encoder("enc", spec), img, Mode::kTrain, rng,
                                          24, false, true, 1e-5));

  // Actor with two trunks on named blocks.
  {
    const std::map<std::string, int> dims = {{"embed", 8}, {"loc", 6}};
    const nn::ActorNet actor("actor",
                             {{"gripper", {"loc"}, 2}, {"camera", {"embed", "loc"}, 2}}, dims,
                             nn::MLPSpec{{16, 16}});
    ParamSet<double> p;
    actor.init(p, rng);
    nn::Blocks<double> in = {{"embed", random_matrix(8, 3, rng)}, {"loc", random_matrix(6, 3, rng)}};
    nn::ActorNet::Cache<double> cache;
    const Mat<double> y = actor.forward(p, in, Mode::kTrain, &cache);
    const Mat<double> R = random_matrix(y.rows(), y.cols(), rng);
    ParamSet<double> g = p.zeros_like();
    nn::Blocks<double> din;
    actor.backward(p, cache, R, g, &din);
    const auto loss = [&](const ParamSet<double>& q) {
      return (actor.forward(q, in, Mode::kTrain, nullptr).array() * R.array()).sum();
    };
    nn::GradCheckResult r = nn::check_param_gradients(p, g, loss);
    for (const char* b : {"embed", "loc"}) {
      const auto loss_b = [&](const Mat<double>& xb) {
        nn::Blocks<double> alt = in;
        alt[b] = xb;
        return (actor.forward(p, alt, Mode::kTrain, nullptr).array() * R.array()).sum();
      };
      r.merge(nn::check_input_gradient(in.at(b), din.at(b), loss_b));
    }
    rep.items.emplace_back("actor", r);
  }

  // Critic: state blocks and the action input.
  {
    const std::map<std::string, int> dims = {{"embed", 8}, {"loc", 6}};
    const nn::CriticNet critic("critic", {"embed", "loc"}, dims, 4, nn::MLPSpec{{16, 16, 16}});
    ParamSet<double> p;
    critic.init(p, rng);
    const nn::Blocks<double> in = {{"embed", random_matrix(8, 3, rng)},
                                   {"loc", random_matrix(6, 3, rng)}};
    const Mat<double> a = random_matrix(4, 3, rng);
    nn::CriticNet::Cache<double> cache;
    const Mat<double> q = critic.forward(p, in, a, Mode::kTrain, &cache);
    const Mat<double> R = random_matrix(1, q.cols(), rng);
    ParamSet<double> g = p.zeros_like();
    Mat<double> da;
    nn::Blocks<double> din;
    critic.backward(p, cache, R, g, &da, &din);
    const auto loss = [&](const ParamSet<double>& w) {
      return (critic.forward(w, in, a, Mode::kTrain, nullptr).array() * R.array()).sum();
    };
    nn::GradCheckResult r = nn::check_param_gradients(p, g, loss);
    const auto loss_a = [&](const Mat<double>& ai) {
      return (critic.forward(p, in, ai, Mode::kTrain, nullptr).array() * R.array()).sum();
    };
    r.merge(nn::check_input_gradient(a, da, loss_a));
    const auto loss_e = [&](const Mat<double>& e) {
      nn::Blocks<double> alt = in;
      alt["embed"] = e;
      return (critic.forward(p, alt, a, Mode::kTrain, nullptr).array() * R.array()).sum();
    };
    r.merge(nn::check_input_gradient(in.at("embed"), din.at("embed"), loss_e));
    rep.items.emplace_back("critic", r);
  }
  return rep;
}

rl::ReplayAudit her_oracle(const env::EnvConfig& cfg, int episodes, std::size_t capacity,
                           double visibility_bonus, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Policy random_policy = [&](const rl::ObsRecord&, const rl::Point3&) {
    return rl::ActionVec(u(rng), u(rng), u(rng), u(rng));
  };
  const rl::RewardFn reward = [&cfg](const rl::Point3& a, const rl::Point3& g) {
    return env::reward_fn(a, g, cfg);
  };
  percept::DetectorParams det;
  rl::ReplayBuffer buffer(capacity);
  for (int e = 0; e < episodes; ++e) {
    Rollout r = run_episode(cfg, det, rng(), random_policy, {}, rng);
    buffer.store_episode(std::move(r.episode), {4, visibility_bonus}, reward, rng);
  }
  return rl::audit_replay(buffer, reward, visibility_bonus);
}

InvarianceReport encoding_invariance_oracle(int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.25, 0.25);
  const auto grid = [&] { return std::ldexp(std::round(std::ldexp(u(rng), 20)), -20); };
  const auto point = [&] { return Eigen::Vector3d(grid(), grid(), grid()); };
  InvarianceReport rep;
  for (int i = 0; i < trials; ++i) {
    const Eigen::Vector3d o = point();
    const Eigen::Vector3d h = point();
    const Eigen::Vector3d g = point();
    const Eigen::Vector3d c = point();
    const Eigen::VectorXd f = random_matrix(64, 1, rng);
    const auto a = percept::encode(f, o, h, g, percept::Layout::kObjectCentric);
    const auto b = percept::encode(f, o + c, h + c, g + c, percept::Layout::kObjectCentric);
    ++rep.trials;
    if (a.state_vector() != b.state_vector() || a.goal_vector() != b.goal_vector()) {
      ++rep.mismatches;
    }
  }
  return rep;
}

EquivarianceReport equivariance_oracle(const env::EnvConfig& cfg, int episodes,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto interior = [&cfg](const env::WorldState& s) {
    return cfg.gripper_region.contains(s.gripper_pos.head<2>() * 1.25);
  };
  EquivarianceReport rep;
  for (int e = 0; e < episodes; ++e) {
    env::WorldState s = env::reset(cfg, rng());
    s.object_pos.head<2>() *= 0.4;
    s.goal.head<2>() *= 0.4;
    s.gripper_pos.head<2>() = s.object_pos.head<2>() + env::Vec2(0.0, 0.08);
    const env::Vec2 shift(0.03 * u(rng), 0.03 * u(rng));
    const env::Point3 start = s.object_pos;
    env::WorldState t = s;
    t.object_pos.head<2>() += shift;
    t.goal.head<2>() += shift;
    t.gripper_pos.head<2>() += shift;
    for (auto& d : t.distractors) d.center.head<2>() += shift;
    for (int k = 0; k < cfg.horizon; ++k) {
      // Mostly toward -y, so the gripper sweeps through the object.
      env::ActionFull a;
      a.gripper_delta = env::Vec2(0.01 * u(rng), -0.004 + 0.01 * u(rng));
      a.camera_delta = env::Vec2(0.03 * u(rng), 0.03 * u(rng));
      s = env::step(s, a, cfg).state;
      t = env::step(t, a, cfg).state;
      if (!interior(s) || !interior(t)) break;
      rep.max_discrepancy = std::max(
          rep.max_discrepancy, (t.object_pos.head<2>() - s.object_pos.head<2>() - shift).norm());
      ++rep.steps_checked;
    }
    ++rep.episodes;
    rep.episodes_pushed += (s.object_pos - start).norm() > 0.01 ? 1 : 0;
  }
  return rep;
}

DeterminismReport determinism_oracle(const env::EnvConfig& cfg, int episodes,
                                     std::uint64_t seed) {
  DeterminismReport rep;
  const auto compare = [&rep](bool same) {
    ++rep.comparisons;
    rep.differences += same ? 0 : 1;
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t s = rng();
    env::WorldState a = env::reset(cfg, s);
    env::WorldState b = env::reset(cfg, s);
    compare(a == b);
    for (int k = 0; k < cfg.horizon; ++k) {
      env::ActionFull act;
      act.gripper_delta = env::Vec2(u(rng), u(rng));
      act.camera_delta = env::Vec2(u(rng), u(rng));
      const env::StepResult ra = env::step(a, act, cfg);
      const env::StepResult rb = env::step(b, act, cfg);
      compare(ra.state == rb.state && ra.reward == rb.reward && ra.done == rb.done);
      a = ra.state;
      b = rb.state;
    }
  }

  percept::DetectorParams det;
  rl::AgentConfig ac;
  ac.cnn.channels = {4, 4, 8};
  ac.cnn.embedding = 16;
  for (rl::PolicyVariant v :
       {rl::PolicyVariant::kCamStatic, rl::PolicyVariant::kCamStaticImage,
        rl::PolicyVariant::kCamActiveFull, rl::PolicyVariant::kCamActiveAbstr}) {
    ac.variant = v;
    const rl::Agent<float> agent(ac, seed);
    const std::uint64_t env_seed = rng();
    std::mt19937_64 r1(seed);
    std::mt19937_64 r2(seed);
    const Rollout x = run_agent_episode(agent, cfg, det, env_seed, false, r1);
    const Rollout y = run_agent_episode(agent, cfg, det, env_seed, false, r2);
    compare(x.states == y.states && x.episode.actions == y.episode.actions &&
            x.rewards == y.rewards);
    // The noise-free action must not depend on the generator's state.
    std::mt19937_64 other(seed + 1);
    for (std::size_t i = 0; i < x.episode.actions.size(); ++i) {
      compare(agent.act(x.episode.obs[i], x.episode.goal, false, other) == x.episode.actions[i]);
    }
  }
  return rep;
}

}  // namespace handeye::harness
