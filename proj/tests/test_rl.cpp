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

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "handeye/env/pushing_env.hpp"
#include "handeye/nn/gradcheck.hpp"
#include "handeye/rl/agent.hpp"
#include "handeye/rl/replay.hpp"

namespace {

using handeye::rl::ActionVec;
using handeye::rl::Agent;
using handeye::rl::AgentConfig;
using handeye::rl::Episode;
using handeye::rl::ObsRecord;
using handeye::rl::Point3;
using handeye::rl::PolicyVariant;
using handeye::rl::RelabelConfig;
using handeye::rl::ReplayBuffer;

const handeye::env::EnvConfig kEnv;

double env_reward(const Point3& achieved, const Point3& goal) {
  return handeye::env::reward_fn(achieved, goal, kEnv);
}

ObsRecord random_obs(std::mt19937_64& rng, int embedding = 64) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  ObsRecord o;
  o.embedding = Eigen::VectorXd::NullaryExpr(embedding, [&] { return n(rng); });
  o.object_estimate = Point3(u(rng), u(rng), 0.025);
  o.gripper = Point3(u(rng), u(rng), 0.02);
  o.camera = Point3(0.0, -0.87, 0.5);
  o.detected = u(rng) > 0.0;
  o.visibility = 1.0;
  return o;
}

// Random-walk episode in which the object drifts, so relabeled goals differ.
Episode random_episode(std::mt19937_64& rng, int length) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Episode ep;
  ep.goal = Point3(0.1 * u(rng), 0.1 * u(rng), 0.025);
  Point3 obj(0.1 * u(rng), 0.1 * u(rng), 0.025);
  for (int t = 0; t <= length; ++t) ep.obs.push_back(random_obs(rng));
  for (int t = 0; t < length; ++t) {
    ep.actions.push_back(ActionVec(u(rng), u(rng), u(rng), u(rng)));
    obj += Point3(0.01 * u(rng), 0.01 * u(rng), 0.0);
    ep.achieved.push_back(obj);
  }
  ep.timed_out = true;
  return ep;
}

std::vector<handeye::rl::Transition> one_batch(const std::vector<ObsRecord>& obs,
                                               std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<handeye::rl::Transition> b;
  for (int i = 0; i < n; ++i) {
    handeye::rl::Transition t;
    t.obs = &obs[2 * static_cast<std::size_t>(i)];
    t.next_obs = &obs[2 * static_cast<std::size_t>(i) + 1];
    t.action = ActionVec(u(rng), u(rng), u(rng), u(rng));
    t.goal = Point3(0.1 * u(rng), 0.1 * u(rng), 0.025);
    t.reward = -1.0;
    b.push_back(t);
  }
  return b;
}

AgentConfig small_config(PolicyVariant v) {
  AgentConfig c;
  c.variant = v;
  c.batch_size = 8;
  return c;
}

TEST(Replay, RelabelingOracleOverAFilledBuffer) {
  std::mt19937_64 rng(1);
  ReplayBuffer buf(2000);
  RelabelConfig cfg;
  for (int e = 0; e < 60; ++e) buf.store_episode(random_episode(rng, 50), cfg, env_reward, rng);
  const auto audit = handeye::rl::audit_replay(buf, env_reward, 0.0);
  EXPECT_TRUE(audit.clean());
  EXPECT_EQ(audit.records, buf.size() * 5);
  EXPECT_EQ(audit.relabeled, buf.size() * 4);
  // Every record's reward, recomputed independently of the audit helper.
  std::size_t zero_rewards = 0;
  buf.for_each([&](const Episode& ep, const handeye::rl::StoredTransition& st) {
    const double r = env_reward(ep.achieved[static_cast<std::size_t>(st.t)], st.goal);
    EXPECT_EQ(st.reward, r);
    EXPECT_EQ(st.terminal, r == 0.0);
    zero_rewards += r == 0.0 ? 1 : 0;
    if (st.relabeled) {
      EXPECT_GE(st.goal_source, st.t);
      EXPECT_LT(st.goal_source, ep.length());
    }
  });
  EXPECT_GT(zero_rewards, 0u);  // relabeling does manufacture successes
}

TEST(Replay, VisibilityBonusRidesOnEveryRecord) {
  std::mt19937_64 rng(2);
  ReplayBuffer buf(500);
  RelabelConfig cfg;
  cfg.visibility_bonus = 0.25;
  for (int e = 0; e < 5; ++e) buf.store_episode(random_episode(rng, 50), cfg, env_reward, rng);
  EXPECT_TRUE(handeye::rl::audit_replay(buf, env_reward, 0.25).clean());
  EXPECT_FALSE(handeye::rl::audit_replay(buf, env_reward, 0.0).clean());
}

TEST(Replay, FinalStepRelabeledWithItsOwnGoalIsASuccess) {
  std::mt19937_64 rng(3);
  ReplayBuffer buf(100);
  buf.store_episode(random_episode(rng, 10), RelabelConfig{}, env_reward, rng);
  int last_relabels = 0;
  buf.for_each([&](const Episode& ep, const handeye::rl::StoredTransition& st) {
    if (st.relabeled && st.t == ep.length() - 1) {
      ++last_relabels;
      EXPECT_EQ(st.goal_source, st.t);
      EXPECT_EQ(st.reward, 0.0);
      EXPECT_TRUE(st.terminal);
    }
    EXPECT_EQ(st.timeout, !st.terminal ? st.t == ep.length() - 1 : st.timeout);
  });
  EXPECT_EQ(last_relabels, 4);
}

TEST(Replay, ZeroKStoresOnlyOriginals) {
  std::mt19937_64 rng(4);
  ReplayBuffer buf(1000);
  RelabelConfig cfg;
  cfg.k = 0;
  for (int e = 0; e < 4; ++e) buf.store_episode(random_episode(rng, 50), cfg, env_reward, rng);
  EXPECT_EQ(buf.record_count(), buf.size());
  buf.for_each([](const Episode& ep, const handeye::rl::StoredTransition& st) {
    EXPECT_FALSE(st.relabeled);
    EXPECT_EQ(st.goal, ep.goal);
  });
}

TEST(Replay, EvictsWholeEpisodesOldestFirst) {
  std::mt19937_64 rng(5);
  ReplayBuffer buf(120);
  std::vector<Point3> goals;
  for (int e = 0; e < 7; ++e) {
    Episode ep = random_episode(rng, 50);
    goals.push_back(ep.goal);
    buf.store_episode(std::move(ep), RelabelConfig{}, env_reward, rng);
    EXPECT_LE(buf.size(), buf.capacity());
  }
  EXPECT_EQ(buf.episode_count(), 2u);
  EXPECT_EQ(buf.size(), 100u);
  std::set<int> steps_per_goal[2];
  buf.for_each([&](const Episode& ep, const handeye::rl::StoredTransition& st) {
    ASSERT_TRUE(ep.goal == goals[5] || ep.goal == goals[6]);
    steps_per_goal[ep.goal == goals[5] ? 0 : 1].insert(st.t);
  });
  EXPECT_EQ(steps_per_goal[0].size(), 50u);
  EXPECT_EQ(steps_per_goal[1].size(), 50u);
}

TEST(Replay, RejectsEpisodesLongerThanCapacity) {
  std::mt19937_64 rng(6);
  ReplayBuffer buf(20);
  EXPECT_THROW(buf.store_episode(random_episode(rng, 50), RelabelConfig{}, env_reward, rng),
               std::invalid_argument);
}

TEST(Replay, SamplesPointIntoStoredEpisodes) {
  std::mt19937_64 rng(7);
  ReplayBuffer buf(1000);
  for (int e = 0; e < 3; ++e) buf.store_episode(random_episode(rng, 20), RelabelConfig{}, env_reward, rng);
  const auto batch = buf.sample(256, rng);
  ASSERT_EQ(batch.size(), 256u);
  int relabeled = 0;
  for (const auto& t : batch) {
    ASSERT_NE(t.obs, nullptr);
    ASSERT_NE(t.next_obs, nullptr);
    EXPECT_EQ(t.reward, env_reward(t.achieved_goal, t.goal));
    relabeled += t.relabeled ? 1 : 0;
  }
  EXPECT_NEAR(relabeled / 256.0, 0.8, 0.1);
}

TEST(TdTarget, ArithmeticTerminalAndClipping) {
  const double lo = -1.0 / (1.0 - 0.98);
  EXPECT_NEAR(handeye::rl::td_target(-1.0, -5.0, false, 0.98, lo, 0.0), -5.9, 1e-12);
  EXPECT_EQ(handeye::rl::td_target(0.0, -5.0, true, 0.98, lo, 0.0), 0.0);
  EXPECT_NEAR(handeye::rl::td_target(-1.0, -80.0, false, 0.98, lo, 0.0), -50.0, 1e-12);
  EXPECT_EQ(handeye::rl::td_target(-1.0, 10.0, false, 0.98, lo, 0.0), 0.0);
}

TEST(Critic, TargetsStayInTheClipRange) {
  std::mt19937_64 rng(8);
  Agent<double> agent(small_config(PolicyVariant::kCamActiveAbstr), 8);
  // Push the target critic far below the range so raw targets leave it.
  auto ckpt = agent.to_checkpoint();
  ckpt.nets.at("critic_target").at("critic.head.bias").setConstant(-500.0);
  agent.restore(ckpt);
  std::vector<ObsRecord> obs;
  for (int i = 0; i < 64; ++i) obs.push_back(random_obs(rng));
  auto batch = one_batch(obs, rng, 32);
  for (int i = 0; i < 8; ++i) {
    batch[static_cast<std::size_t>(i)].reward = 0.0;
    batch[static_cast<std::size_t>(i)].terminal = true;
  }
  std::vector<double> targets;
  agent.critic_loss(batch, rng, nullptr, nullptr, &targets);
  ASSERT_EQ(targets.size(), 32u);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    EXPECT_GE(targets[i], -50.0 - 1e-9);
    EXPECT_LE(targets[i], 0.0);
    if (i < 8) {
      EXPECT_EQ(targets[i], 0.0);
    } else {
      EXPECT_NEAR(targets[i], -50.0, 1e-9);
    }
  }
}

TEST(Critic, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  Agent<double> agent(small_config(PolicyVariant::kCamActiveFull), 9);
  std::vector<ObsRecord> obs;
  for (int i = 0; i < 8; ++i) obs.push_back(random_obs(rng));
  const auto batch = one_batch(obs, rng, 4);
  auto grad = agent.critic_params().zeros_like();
  std::mt19937_64 r1(1);
  agent.critic_loss(batch, r1, &grad, nullptr, nullptr);
  const auto loss = [&](const handeye::nn::ParamSet<double>&) {
    std::mt19937_64 r(1);
    return agent.critic_loss(batch, r, nullptr, nullptr, nullptr);
  };
  const auto res = handeye::nn::check_param_gradients(agent.critic_params(), grad, loss);
  EXPECT_LE(res.max_rel_error, 1e-4) << res.worst;
}

TEST(Actor, SingleTransitionGradientMatchesFiniteDifferences) {
  for (PolicyVariant v : {PolicyVariant::kCamStatic, PolicyVariant::kCamActiveAbstr,
                          PolicyVariant::kCamActiveFull, PolicyVariant::kCamStaticImage}) {
    std::mt19937_64 rng(10);
    Agent<double> agent(small_config(v), 10);
    std::vector<ObsRecord> obs;
    for (int i = 0; i < 2; ++i) obs.push_back(random_obs(rng));
    const auto batch = one_batch(obs, rng, 1);
    auto grad = agent.actor_params().zeros_like();
    agent.actor_loss(batch, &grad);
    const auto loss = [&](const handeye::nn::ParamSet<double>&) {
      return agent.actor_loss(batch, nullptr);
    };
    const auto res = handeye::nn::check_param_gradients(agent.actor_params(), grad, loss);
    EXPECT_LE(res.max_rel_error, 1e-4) << to_string(v) << " " << res.worst;
    EXPECT_GT(res.checked, 1000);
  }
}

TEST(Actor, ConstantCriticLeavesOnlyThePenaltyGradient) {
  std::mt19937_64 rng(11);
  AgentConfig cfg = small_config(PolicyVariant::kCamActiveAbstr);
  cfg.action_l2 = 0.0;
  Agent<double> agent(cfg, 11);
  agent.critic_params().at("critic.head.weight").setZero();
  std::vector<ObsRecord> obs;
  for (int i = 0; i < 16; ++i) obs.push_back(random_obs(rng));
  const auto batch = one_batch(obs, rng, 8);
  auto grad = agent.actor_params().zeros_like();
  agent.actor_loss(batch, &grad);
  for (const auto& [name, e] : grad.entries()) EXPECT_TRUE(e.value.isZero(0.0)) << name;

  // With the penalty on, the gradient is exactly the penalty's.
  cfg.action_l2 = 1e-3;
  Agent<double> pen(cfg, 11);
  pen.critic_params().at("critic.head.weight").setZero();
  auto g2 = pen.actor_params().zeros_like();
  const double l = pen.actor_loss(batch, &g2);
  const double q = -pen.critic_params().at("critic.head.bias")(0, 0);
  const auto penalty = [&](const handeye::nn::ParamSet<double>&) {
    return pen.actor_loss(batch, nullptr) - q;
  };
  EXPECT_GT(l - q, 0.0);
  const auto res = handeye::nn::check_param_gradients(pen.actor_params(), g2, penalty);
  EXPECT_LE(res.max_rel_error, 1e-4) << res.worst;
}

TEST(Actor, RewardingLargerDxRaisesDx) {
  std::mt19937_64 rng(12);
  AgentConfig cfg = small_config(PolicyVariant::kCamStatic);
  cfg.critic_mlp = handeye::nn::MLPSpec{{64}};  // head sees the action directly
  Agent<double> agent(cfg, 12);
  auto& head = agent.critic_params().at("critic.head.weight");
  ASSERT_EQ(head.cols(), 64 + 2);
  head(0, 64) += 5.0;  // the gripper dx input
  std::vector<ObsRecord> obs;
  for (int i = 0; i < 64; ++i) obs.push_back(random_obs(rng));
  const auto batch = one_batch(obs, rng, 32);
  const auto mean_dx = [&] {
    double s = 0.0;
    for (const auto& t : batch) s += agent.act(*t.obs, t.goal, false, rng)[0];
    return s / static_cast<double>(batch.size());
  };
  const double before = mean_dx();
  auto state = handeye::nn::AdamState<double>::for_params(agent.actor_params());
  for (int k = 0; k < 5; ++k) {
    auto grad = agent.actor_params().zeros_like();
    agent.actor_loss(batch, &grad);
    handeye::nn::adam_step(agent.actor_params(), grad, state, cfg.actor_optim);
  }
  EXPECT_GT(mean_dx(), before);
}

TEST(Act, NoiseOffIsDeterministicAndIgnoresTheRng) {
  for (PolicyVariant v : {PolicyVariant::kCamStatic, PolicyVariant::kCamStaticImage,
                          PolicyVariant::kCamActiveAbstr, PolicyVariant::kCamActiveFull}) {
    Agent<float> agent(small_config(v), 13);
    std::mt19937_64 rng(13);
    const ObsRecord o = random_obs(rng);
    const Point3 g(0.05, 0.02, 0.025);
    std::mt19937_64 r1(1);
    std::mt19937_64 r2(999);
    for (int i = 0; i < 5; ++i) r2();
    const ActionVec a = agent.act(o, g, false, r1);
    const ActionVec b = agent.act(o, g, false, r2);
    EXPECT_EQ(a, b) << to_string(v);
    EXPECT_LE(a.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Act, StaticCameraIsExactlyZero) {
  Agent<float> agent(small_config(PolicyVariant::kCamStatic), 14);
  std::mt19937_64 rng(14);
  for (int i = 0; i < 2000; ++i) {
    const ObsRecord o = random_obs(rng);
    const ActionVec a = agent.act(o, Point3(0, 0, 0.025), i % 2 == 0, rng);
    EXPECT_EQ(a[2], 0.0);
    EXPECT_EQ(a[3], 0.0);
  }
}

TEST(Act, IgnoredCameraOverrideZeroesTheCamera) {
  Agent<float> agent(small_config(PolicyVariant::kCamActiveFull), 15);
  agent.set_camera_override(handeye::rl::CameraOverride::kIgnored);
  std::mt19937_64 rng(15);
  for (int i = 0; i < 500; ++i) {
    const ActionVec a = agent.act(random_obs(rng), Point3(0, 0, 0.025), true, rng);
    EXPECT_EQ(a.tail<2>(), Eigen::Vector2d::Zero());
  }
}

// Two-sided one-sample Kolmogorov-Smirnov p-value (asymptotic series).
double ks_uniform_p(std::vector<double> x, double lo, double hi) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = (x[i] - lo) / (hi - lo);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    p += 2.0 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
  }
  return std::clamp(p, 0.0, 1.0);
}

TEST(Act, RandomCameraIsUniformOverItsRange) {
  Agent<float> agent(small_config(PolicyVariant::kCamRandom), 16);
  std::mt19937_64 rng(16);
  const ObsRecord o = random_obs(rng);
  std::vector<double> cx;
  std::vector<double> cy;
  for (int i = 0; i < 100000; ++i) {
    const ActionVec a = agent.act(o, Point3(0, 0, 0.025), false, rng);
    cx.push_back(a[2]);
    cy.push_back(a[3]);
  }
  EXPECT_GT(ks_uniform_p(cx, -1.0, 1.0), 0.01);
  EXPECT_GT(ks_uniform_p(cy, -1.0, 1.0), 0.01);
  // The gripper part is still deterministic.
  std::mt19937_64 r(1);
  EXPECT_EQ(agent.act(o, Point3(0, 0, 0.025), false, r).head<2>(),
            agent.act(o, Point3(0, 0, 0.025), false, rng).head<2>());
}

TEST(Act, KsHelperRejectsASkewedSample) {
  std::vector<double> x;
  for (int i = 0; i < 10000; ++i) x.push_back(-1.0 + 2.0 * std::pow((i + 0.5) / 10000.0, 1.2));
  EXPECT_LT(ks_uniform_p(x, -1.0, 1.0), 0.01);
}

TEST(Update, StepsMoveOnlineAndTargetNetworks) {
  std::mt19937_64 rng(17);
  Agent<float> agent(small_config(PolicyVariant::kCamActiveAbstr), 17);
  ReplayBuffer buf(1000);
  for (int e = 0; e < 4; ++e) buf.store_episode(random_episode(rng, 50), RelabelConfig{}, env_reward, rng);
  const auto actor0 = agent.actor_params();
  const auto target0 = agent.target_actor_params();
  const auto stats = agent.update(buf, rng);
  EXPECT_TRUE(std::isfinite(stats.critic_loss));
  EXPECT_TRUE(std::isfinite(stats.actor_loss));
  const auto& name = actor0.entries().begin()->first;
  EXPECT_NE(agent.actor_params().at(name), actor0.at(name));
  // target <- 0.95 target + 0.05 online after the step.
  const auto want = (0.95f * target0.at(name) + 0.05f * agent.actor_params().at(name)).eval();
  EXPECT_LT((agent.target_actor_params().at(name) - want).cwiseAbs().maxCoeff(), 1e-6f);
}

TEST(Checkpointing, RestoreIsExactAndLoadWeightsTransfers) {
  Agent<float> a(small_config(PolicyVariant::kCamActiveAbstr), 18);
  Agent<float> b(small_config(PolicyVariant::kCamActiveAbstr), 19);
  b.restore(a.to_checkpoint());
  for (const auto& [name, e] : a.actor_params().entries()) {
    EXPECT_EQ(b.actor_params().at(name), e.value) << name;
  }
  // Different wiring: restore refuses, weight transfer between matching
  // variants succeeds.
  Agent<float> s(small_config(PolicyVariant::kCamStatic), 20);
  EXPECT_THROW(s.restore(a.to_checkpoint()), handeye::nn::CheckpointError);
  Agent<float> r(small_config(PolicyVariant::kCamRandom), 21);
  EXPECT_THROW(r.load_weights(s.to_checkpoint()), std::exception);
}

TEST(Checkpointing, WeightTransferKeepsSharedAdamMoments) {
  std::mt19937_64 rng(22);
  Agent<float> src(small_config(PolicyVariant::kCamActiveAbstr), 22);
  ReplayBuffer buf(1000);
  for (int e = 0; e < 4; ++e) buf.store_episode(random_episode(rng, 50), RelabelConfig{}, env_reward, rng);
  for (int k = 0; k < 3; ++k) src.update(buf, rng);
  const auto from = src.to_checkpoint();

  // Same wiring: every moment and the step count carry over.
  Agent<float> same(small_config(PolicyVariant::kCamActiveAbstr), 23);
  same.load_weights(from);
  const auto got = same.to_checkpoint();
  EXPECT_EQ(got.optimizers.at("critic").step, 3);
  for (const auto& [name, e] : from.optimizers.at("actor").v.entries()) {
    EXPECT_EQ(got.optimizers.at("actor").v.at(name), e.value) << name;
  }

  // A random-camera agent owns a subset of the tensors and takes theirs.
  Agent<float> rnd(small_config(PolicyVariant::kCamRandom), 24);
  rnd.load_weights(from);
  const auto sub = rnd.to_checkpoint();
  EXPECT_EQ(sub.optimizers.at("actor").step, 3);
  for (const auto& [name, e] : sub.optimizers.at("actor").m.entries()) {
    EXPECT_EQ(e.value, from.optimizers.at("actor").m.at(name)) << name;
  }
}

}  // namespace
