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

#ifndef HANDEYE_RL_AGENT_HPP_
#define HANDEYE_RL_AGENT_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "handeye/nn/checkpoint.hpp"
#include "handeye/nn/networks.hpp"
#include "handeye/nn/optim.hpp"
#include "handeye/percept/encoding.hpp"
#include "handeye/rl/replay.hpp"
#include "handeye/rl/variant.hpp"

namespace handeye::rl {

struct AgentConfig {
  PolicyVariant variant = PolicyVariant::kCamActiveAbstr;
  percept::Layout layout = percept::Layout::kObjectCentric;
  nn::CNNSpec cnn;
  nn::MLPSpec actor_mlp{{64, 64}};
  nn::MLPSpec critic_mlp{{64, 64, 64}};
  double gamma = 0.98;
  double noise_sigma = 0.1;         // normalized action units
  double random_action_prob = 0.2;
  double polyak = 0.95;
  int batch_size = 256;
  double action_l2 = 1e-3;          // times mean squared norm of the used actions
  double position_scale = 10.0;     // meters to network units for location blocks
  double visibility_bonus = 0.0;    // only widens the target clip here
  nn::AdamConfig actor_optim;
  nn::AdamConfig critic_optim;
  // Train the image encoder through the critic loss. Otherwise the encoder is
  // a fixed feature extractor whose batch-norm statistics are calibrated once.
  bool train_encoder = false;

  void validate() const;
};

// r + gamma * q_next (dropped when terminal), clipped to [lo, hi].
double td_target(double reward, double q_next, bool terminal, double gamma, double lo, double hi);

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double mean_q = 0.0;
};

// DDPG actor-critic with target networks over one policy variant.
template <typename Scalar>
class Agent {
 public:
  using M = nn::Mat<Scalar>;
  using Params = nn::ParamSet<Scalar>;

  Agent(AgentConfig cfg, std::uint64_t seed);

  [[nodiscard]] const AgentConfig& config() const { return cfg_; }
  [[nodiscard]] CameraOverride camera_override() const { return camera_; }
  void set_camera_override(CameraOverride o) { camera_ = o; }
  // Whether rollouts must keep raw frames in replay.
  [[nodiscard]] bool stores_frames() const { return cfg_.train_encoder; }
  [[nodiscard]] bool camera_learned() const {
    return has_camera_trunk(cfg_.variant) && camera_ == CameraOverride::kLearned;
  }

  // Image embedding with the encoder in eval mode.
  [[nodiscard]] Eigen::VectorXd embed(const std::vector<std::uint8_t>& rgb8) const;
  // Folds batch statistics of `frames` into the encoder's running statistics
  // for `passes` sweeps.
  void calibrate_encoder(const std::vector<std::vector<std::uint8_t>>& frames, int batch,
                         int passes);

  // Normalized action. Without exploration the result is a pure function
  // of the inputs for every variant except cam-random, whose camera is drawn
  // uniformly on every call.
  ActionVec act(const ObsRecord& obs, const Point3& goal, bool explore,
                std::mt19937_64& rng) const;

  // Mean squared TD error on `batch`; accumulates gradients when sinks are
  // given and optionally reports the clipped targets.
  double critic_loss(const std::vector<Transition>& batch, std::mt19937_64& rng,
                     Params* critic_grad, Params* encoder_grad, std::vector<double>* targets);
  // -mean Q(s, pi(s)) + action_l2 * mean |a|^2 over the used components.
  double actor_loss(const std::vector<Transition>& batch, Params* actor_grad,
                    double* mean_q = nullptr);
  // One critic step, one actor step, then Polyak averaging of the targets.
  UpdateStats update(const ReplayBuffer& buffer, std::mt19937_64& rng);

  [[nodiscard]] nn::Checkpoint to_checkpoint() const;
  // Exact resume: every network and optimizer must match this agent.
  void restore(const nn::Checkpoint& ckpt);
  // Weight transfer between stages: copies each tensor this agent owns from
  // the checkpoint (extra source tensors are ignored) and resets optimizers.
  void load_weights(const nn::Checkpoint& ckpt);

  [[nodiscard]] Params& actor_params() { return actor_; }
  [[nodiscard]] Params& critic_params() { return critic_; }
  [[nodiscard]] Params& encoder_params() { return encoder_; }
  [[nodiscard]] const Params& actor_params() const { return actor_; }
  [[nodiscard]] const Params& critic_params() const { return critic_; }
  [[nodiscard]] const Params& encoder_params() const { return encoder_; }
  [[nodiscard]] const Params& target_actor_params() const { return actor_target_; }
  [[nodiscard]] const Params& target_critic_params() const { return critic_target_; }
  [[nodiscard]] const nn::ActorNet& actor_net() const { return actor_net_; }
  [[nodiscard]] const nn::CriticNet& critic_net() const { return critic_net_; }
  [[nodiscard]] int critic_action_dim() const { return critic_net_.action_dim(); }

  // Input blocks ("embed", "loc", "hg") for a batch of observations.
  [[nodiscard]] nn::Blocks<Scalar> blocks(const std::vector<const ObsRecord*>& obs,
                                          const std::vector<Point3>& goals,
                                          const M& embedding) const;
  [[nodiscard]] M stored_embeddings(const std::vector<const ObsRecord*>& obs) const;

 private:
  [[nodiscard]] M frames_matrix(const std::vector<const ObsRecord*>& obs) const;
  // Critic-side action for actor outputs; camera rows come from the policy
  // variant rules, `stored_camera` (2 x B) or uniform draws.
  [[nodiscard]] M critic_action(const M& actor_out, const M* stored_camera,
                                std::mt19937_64* rng) const;

  AgentConfig cfg_;
  CameraOverride camera_ = CameraOverride::kLearned;
  nn::Sequential encoder_net_;
  nn::ActorNet actor_net_;
  nn::CriticNet critic_net_;
  Params encoder_;
  Params encoder_target_;
  Params actor_;
  Params actor_target_;
  Params critic_;
  Params critic_target_;
  nn::AdamState<Scalar> actor_opt_;
  nn::AdamState<Scalar> critic_opt_;
  nn::AdamState<Scalar> encoder_opt_;
};

extern template class Agent<float>;
extern template class Agent<double>;

}  // namespace handeye::rl

#endif  // HANDEYE_RL_AGENT_HPP_
