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

#include "handeye/rl/agent.hpp"

#include <algorithm>
#include <stdexcept>
#include <type_traits>

namespace handeye::rl {
namespace {

constexpr int kHgDim = 6;

struct Wiring {
  std::vector<nn::TrunkSpec> trunks;
  std::vector<std::string> critic_inputs;
  int critic_action_dim = 4;
};

Wiring wiring_for(PolicyVariant v) {
  switch (v) {
    case PolicyVariant::kCamStatic:
      return {{{"gripper", {"embed", "loc"}, 2}}, {"embed", "loc"}, 2};
    case PolicyVariant::kCamStaticImage:
      return {{{"gripper", {"embed", "hg"}, 2}}, {"embed", "hg"}, 2};
    case PolicyVariant::kCamActiveFull:
      return {{{"gripper", {"embed", "loc"}, 2}, {"camera", {"embed", "loc"}, 2}},
              {"embed", "loc"},
              4};
    case PolicyVariant::kCamActiveAbstr:
      return {{{"gripper", {"loc"}, 2}, {"camera", {"embed", "loc"}, 2}}, {"embed", "loc"}, 4};
    case PolicyVariant::kCamRandom:
      return {{{"gripper", {"loc"}, 2}}, {"embed", "loc"}, 4};
  }
  throw std::invalid_argument("unhandled policy variant");
}

template <typename Scalar>
nn::AdamState<double> to_double(const nn::AdamState<Scalar>& s) {
  return {s.m.template cast<double>(), s.v.template cast<double>(), s.step};
}

template <typename Scalar>
nn::AdamState<Scalar> from_double(const nn::AdamState<double>& s) {
  return {s.m.template cast<Scalar>(), s.v.template cast<Scalar>(), s.step};
}

}  // namespace

void AgentConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be nonnegative");
  if (random_action_prob < 0.0 || random_action_prob > 1.0) {
    throw std::invalid_argument("random_action_prob must lie in [0, 1]");
  }
  if (polyak < 0.0 || polyak > 1.0) throw std::invalid_argument("polyak must lie in [0, 1]");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (action_l2 < 0.0) throw std::invalid_argument("action_l2 must be nonnegative");
  if (!(position_scale > 0.0)) throw std::invalid_argument("position_scale must be positive");
  if (visibility_bonus < 0.0) throw std::invalid_argument("visibility_bonus must be nonnegative");
  if (critic_mlp.hidden.empty()) throw std::invalid_argument("critic needs a hidden layer");
}

double td_target(double reward, double q_next, bool terminal, double gamma, double lo,
                 double hi) {
  const double y = terminal ? reward : reward + gamma * q_next;
  return std::clamp(y, lo, hi);
}

template <typename Scalar>
Agent<Scalar>::Agent(AgentConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const Wiring w = wiring_for(cfg_.variant);
  const std::map<std::string, int> dims = {{"embed", cfg_.cnn.embedding},
                                           {"loc", percept::location_dim(cfg_.layout)},
                                           {"hg", kHgDim}};
  encoder_net_ = nn::make_encoder("encoder", cfg_.cnn);
  actor_net_ = nn::ActorNet("actor", w.trunks, dims, cfg_.actor_mlp);
  critic_net_ = nn::CriticNet("critic", w.critic_inputs, dims, w.critic_action_dim,
                              cfg_.critic_mlp);

  std::mt19937_64 rng(seed);
  encoder_net_.init(encoder_, rng);
  actor_net_.init(actor_, rng);
  critic_net_.init(critic_, rng);
  encoder_target_ = encoder_;
  actor_target_ = actor_;
  critic_target_ = critic_;
  actor_opt_ = nn::AdamState<Scalar>::for_params(actor_);
  critic_opt_ = nn::AdamState<Scalar>::for_params(critic_);
  encoder_opt_ = nn::AdamState<Scalar>::for_params(encoder_);
}

template <typename Scalar>
Eigen::VectorXd Agent<Scalar>::embed(const std::vector<std::uint8_t>& rgb8) const {
  const Eigen::Index n = static_cast<Eigen::Index>(cfg_.cnn.image_size) * cfg_.cnn.image_size *
                         cfg_.cnn.in_channels;
  if (static_cast<Eigen::Index>(rgb8.size()) != n) {
    throw std::invalid_argument("embed: frame has the wrong size");
  }
  M x(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) x(i, 0) = Scalar(rgb8[static_cast<std::size_t>(i)]) / 255;
  const M f = encoder_net_.forward(encoder_, x, nn::Mode::kEval, nullptr);
  return f.col(0).template cast<double>();
}

template <typename Scalar>
void Agent<Scalar>::calibrate_encoder(const std::vector<std::vector<std::uint8_t>>& frames,
                                      int batch, int passes) {
  if (frames.empty() || batch < 2 || passes < 1) {
    throw std::invalid_argument("calibrate_encoder: need frames, batch >= 2 and passes >= 1");
  }
  std::vector<ObsRecord> holders(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) holders[i].frame = frames[i];
  for (int pass = 0; pass < passes; ++pass) {
    for (std::size_t start = 0; start + static_cast<std::size_t>(batch) <= frames.size();
         start += static_cast<std::size_t>(batch)) {
      std::vector<const ObsRecord*> chunk;
      for (int j = 0; j < batch; ++j) chunk.push_back(&holders[start + static_cast<std::size_t>(j)]);
      encoder_net_.forward(encoder_, frames_matrix(chunk), nn::Mode::kTrain, nullptr, &encoder_);
    }
  }
  encoder_target_ = encoder_;
}

template <typename Scalar>
typename Agent<Scalar>::M Agent<Scalar>::frames_matrix(
    const std::vector<const ObsRecord*>& obs) const {
  const Eigen::Index n = static_cast<Eigen::Index>(cfg_.cnn.image_size) * cfg_.cnn.image_size *
                         cfg_.cnn.in_channels;
  M x(n, static_cast<Eigen::Index>(obs.size()));
  for (std::size_t b = 0; b < obs.size(); ++b) {
    const std::vector<std::uint8_t>& f = obs[b]->frame;
    if (static_cast<Eigen::Index>(f.size()) != n) {
      throw std::invalid_argument("replay record has no frame of the expected size");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, static_cast<Eigen::Index>(b)) = Scalar(f[static_cast<std::size_t>(i)]) / 255;
    }
  }
  return x;
}

template <typename Scalar>
typename Agent<Scalar>::M Agent<Scalar>::stored_embeddings(
    const std::vector<const ObsRecord*>& obs) const {
  M e(cfg_.cnn.embedding, static_cast<Eigen::Index>(obs.size()));
  for (std::size_t b = 0; b < obs.size(); ++b) {
    if (obs[b]->embedding.size() != cfg_.cnn.embedding) {
      throw std::invalid_argument("observation embedding has the wrong size");
    }
    e.col(static_cast<Eigen::Index>(b)) = obs[b]->embedding.template cast<Scalar>();
  }
  return e;
}

template <typename Scalar>
nn::Blocks<Scalar> Agent<Scalar>::blocks(const std::vector<const ObsRecord*>& obs,
                                         const std::vector<Point3>& goals,
                                         const M& embedding) const {
  if (obs.size() != goals.size()) throw std::invalid_argument("blocks: obs/goal count mismatch");
  const auto B = static_cast<Eigen::Index>(obs.size());
  const int loc_dim = percept::location_dim(cfg_.layout);
  M loc(loc_dim, B);
  M hg(kHgDim, B);
  const Eigen::VectorXd none;
  for (Eigen::Index b = 0; b < B; ++b) {
    const ObsRecord& o = *obs[static_cast<std::size_t>(b)];
    const Point3& g = goals[static_cast<std::size_t>(b)];
    const percept::StateEncoding enc =
        percept::encode(none, o.object_estimate, o.gripper, g, cfg_.layout);
    loc.col(b) = (enc.locations() * cfg_.position_scale).template cast<Scalar>();
    Eigen::Matrix<double, kHgDim, 1> v;
    v << o.gripper, g;
    hg.col(b) = (v * cfg_.position_scale).template cast<Scalar>();
  }
  nn::Blocks<Scalar> out;
  out.emplace("embed", embedding);
  out.emplace("loc", std::move(loc));
  out.emplace("hg", std::move(hg));
  return out;
}

template <typename Scalar>
typename Agent<Scalar>::M Agent<Scalar>::critic_action(const M& actor_out,
                                                       const M* stored_camera,
                                                       std::mt19937_64* rng) const {
  const Eigen::Index B = actor_out.cols();
  M a = M::Zero(critic_net_.action_dim(), B);
  a.topRows(2) = actor_out.topRows(2);
  if (critic_net_.action_dim() == 2) return a;
  if (camera_learned()) {
    a.bottomRows(2) = actor_out.middleRows(2, 2);
  } else if (cfg_.variant == PolicyVariant::kCamRandom) {
    if (stored_camera) {
      a.bottomRows(2) = *stored_camera;
    } else {
      if (!rng) throw std::logic_error("critic_action: random camera needs an rng");
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (Eigen::Index b = 0; b < B; ++b) {
        a(2, b) = static_cast<Scalar>(u(*rng));
        a(3, b) = static_cast<Scalar>(u(*rng));
      }
    }
  }
  return a;
}

template <typename Scalar>
ActionVec Agent<Scalar>::act(const ObsRecord& obs, const Point3& goal, bool explore,
                             std::mt19937_64& rng) const {
  const std::vector<const ObsRecord*> o = {&obs};
  const nn::Blocks<Scalar> in = blocks(o, {goal}, stored_embeddings(o));
  const M out = actor_net_.forward(actor_, in, nn::Mode::kEval, nullptr);

  ActionVec a = ActionVec::Zero();
  a.head<2>() = out.col(0).head(2).template cast<double>();
  if (has_camera_trunk(cfg_.variant)) a.tail<2>() = out.col(0).segment(2, 2).template cast<double>();

  std::uniform_real_distribution<double> u(-1.0, 1.0);
  if (explore) {
    std::normal_distribution<double> n(0.0, cfg_.noise_sigma);
    for (int i = 0; i < 4; ++i) a[i] = std::clamp(a[i] + n(rng), -1.0, 1.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < cfg_.random_action_prob) {
      for (int i = 0; i < 4; ++i) a[i] = u(rng);
    }
  }
  if (cfg_.variant == PolicyVariant::kCamRandom) {
    a[2] = u(rng);
    a[3] = u(rng);
  } else if (!camera_learned()) {
    a.tail<2>().setZero();
  }
  return a;
}

template <typename Scalar>
double Agent<Scalar>::critic_loss(const std::vector<Transition>& batch, std::mt19937_64& rng,
                                  Params* critic_grad, Params* encoder_grad,
                                  std::vector<double>* targets) {
  if (batch.empty()) throw std::invalid_argument("critic_loss: empty batch");
  const auto B = static_cast<Eigen::Index>(batch.size());
  std::vector<const ObsRecord*> obs;
  std::vector<const ObsRecord*> next;
  std::vector<Point3> goals;
  M stored(critic_net_.action_dim(), B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Transition& t = batch[static_cast<std::size_t>(b)];
    obs.push_back(t.obs);
    next.push_back(t.next_obs);
    goals.push_back(t.goal);
    stored.col(b) = t.action.head(critic_net_.action_dim()).template cast<Scalar>();
  }

  nn::Tape<Scalar> enc_tape;
  M emb;
  M emb_next;
  if (cfg_.train_encoder) {
    emb = encoder_net_.forward(encoder_, frames_matrix(obs), nn::Mode::kTrain,
                               encoder_grad ? &enc_tape : nullptr,
                               encoder_grad ? &encoder_ : nullptr);
    emb_next = encoder_net_.forward(encoder_target_, frames_matrix(next), nn::Mode::kTrain,
                                    nullptr);
  } else {
    emb = stored_embeddings(obs);
    emb_next = stored_embeddings(next);
  }

  const nn::Blocks<Scalar> nb = blocks(next, goals, emb_next);
  const M a_next = critic_action(actor_net_.forward(actor_target_, nb, nn::Mode::kEval, nullptr),
                                 nullptr, &rng);
  const M q_next = critic_net_.forward(critic_target_, nb, a_next, nn::Mode::kEval, nullptr);

  const double lo = -1.0 / (1.0 - cfg_.gamma);
  const double hi = cfg_.visibility_bonus / (1.0 - cfg_.gamma);
  M y(1, B);
  if (targets) targets->resize(static_cast<std::size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b) {
    const Transition& t = batch[static_cast<std::size_t>(b)];
    const double v =
        td_target(t.reward, static_cast<double>(q_next(0, b)), t.terminal, cfg_.gamma, lo, hi);
    y(0, b) = static_cast<Scalar>(v);
    if (targets) (*targets)[static_cast<std::size_t>(b)] = v;
  }

  typename nn::CriticNet::Cache<Scalar> cache;
  const nn::Blocks<Scalar> sb = blocks(obs, goals, emb);
  const M q = critic_net_.forward(critic_, sb, stored, nn::Mode::kTrain, &cache);
  const M err = q - y;
  const double loss = static_cast<double>(err.squaredNorm()) / static_cast<double>(B);

  if (critic_grad) {
    const M dq = err * (Scalar(2) / Scalar(B));
    nn::Blocks<Scalar> dblocks;
    critic_net_.backward(critic_, cache, dq, *critic_grad, nullptr,
                         encoder_grad ? &dblocks : nullptr);
    if (encoder_grad && cfg_.train_encoder && dblocks.count("embed")) {
      encoder_net_.backward(encoder_, enc_tape, dblocks.at("embed"), *encoder_grad, false);
    }
  }
  return loss;
}

template <typename Scalar>
double Agent<Scalar>::actor_loss(const std::vector<Transition>& batch, Params* actor_grad,
                                 double* mean_q) {
  if (batch.empty()) throw std::invalid_argument("actor_loss: empty batch");
  const auto B = static_cast<Eigen::Index>(batch.size());
  std::vector<const ObsRecord*> obs;
  std::vector<Point3> goals;
  M stored_camera(2, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Transition& t = batch[static_cast<std::size_t>(b)];
    obs.push_back(t.obs);
    goals.push_back(t.goal);
    stored_camera.col(b) = t.action.tail<2>().template cast<Scalar>();
  }
  const M emb = cfg_.train_encoder
                    ? encoder_net_.forward(encoder_, frames_matrix(obs), nn::Mode::kTrain, nullptr)
                    : stored_embeddings(obs);
  const nn::Blocks<Scalar> in = blocks(obs, goals, emb);

  typename nn::ActorNet::Cache<Scalar> acache;
  const M a = actor_net_.forward(actor_, in, nn::Mode::kTrain, &acache);
  const M ca = critic_action(a, &stored_camera, nullptr);
  typename nn::CriticNet::Cache<Scalar> qcache;
  const M q = critic_net_.forward(critic_, in, ca, nn::Mode::kTrain, &qcache);

  const Eigen::Index used = camera_learned() ? 4 : 2;
  const double inv_b = 1.0 / static_cast<double>(B);
  const double q_mean = static_cast<double>(q.sum()) * inv_b;
  const double penalty =
      cfg_.action_l2 * static_cast<double>(a.topRows(used).squaredNorm()) * inv_b;
  if (mean_q) *mean_q = q_mean;

  if (actor_grad) {
    const M dq = M::Constant(1, B, static_cast<Scalar>(-inv_b));
    Params scratch = critic_.zeros_like();
    M daction;
    critic_net_.backward(critic_, qcache, dq, scratch, &daction, nullptr);
    M dy = M::Zero(a.rows(), B);
    const auto pen = static_cast<Scalar>(2.0 * cfg_.action_l2 * inv_b);
    dy.topRows(used) = daction.topRows(used) + pen * a.topRows(used);
    actor_net_.backward(actor_, acache, dy, *actor_grad, nullptr);
  }
  return -q_mean + penalty;
}

template <typename Scalar>
UpdateStats Agent<Scalar>::update(const ReplayBuffer& buffer, std::mt19937_64& rng) {
  const std::vector<Transition> batch =
      buffer.sample(static_cast<std::size_t>(cfg_.batch_size), rng);
  UpdateStats stats;

  Params gc = critic_.zeros_like();
  Params ge;
  if (cfg_.train_encoder) ge = encoder_.zeros_like();
  stats.critic_loss =
      critic_loss(batch, rng, &gc, cfg_.train_encoder ? &ge : nullptr, nullptr);
  nn::adam_step(critic_, gc, critic_opt_, cfg_.critic_optim);
  if (cfg_.train_encoder) nn::adam_step(encoder_, ge, encoder_opt_, cfg_.critic_optim);

  Params ga = actor_.zeros_like();
  stats.actor_loss = actor_loss(batch, &ga, &stats.mean_q);
  nn::adam_step(actor_, ga, actor_opt_, cfg_.actor_optim);

  nn::polyak_update(actor_target_, actor_, cfg_.polyak);
  nn::polyak_update(critic_target_, critic_, cfg_.polyak);
  if (cfg_.train_encoder) nn::polyak_update(encoder_target_, encoder_, cfg_.polyak);
  return stats;
}

template <typename Scalar>
nn::Checkpoint Agent<Scalar>::to_checkpoint() const {
  nn::Checkpoint c;
  c.metadata["variant"] = to_string(cfg_.variant);
  c.metadata["layout"] = percept::to_string(cfg_.layout);
  c.metadata["train_encoder"] = cfg_.train_encoder ? "true" : "false";
  c.metadata["scalar"] = std::is_same_v<Scalar, float> ? "float32" : "float64";
  c.nets.emplace("encoder", encoder_.template cast<double>());
  c.nets.emplace("actor", actor_.template cast<double>());
  c.nets.emplace("actor_target", actor_target_.template cast<double>());
  c.nets.emplace("critic", critic_.template cast<double>());
  c.nets.emplace("critic_target", critic_target_.template cast<double>());
  c.optimizers.emplace("actor", to_double(actor_opt_));
  c.optimizers.emplace("critic", to_double(critic_opt_));
  if (cfg_.train_encoder) {
    c.nets.emplace("encoder_target", encoder_target_.template cast<double>());
    c.optimizers.emplace("encoder", to_double(encoder_opt_));
  }
  return c;
}

template <typename Scalar>
void Agent<Scalar>::restore(const nn::Checkpoint& ckpt) {
  if (ckpt.schema_hash() != to_checkpoint().schema_hash()) {
    throw nn::CheckpointError("checkpoint schema does not match this agent (" +
                              to_string(cfg_.variant) + ")");
  }
  encoder_ = ckpt.nets.at("encoder").template cast<Scalar>();
  actor_ = ckpt.nets.at("actor").template cast<Scalar>();
  actor_target_ = ckpt.nets.at("actor_target").template cast<Scalar>();
  critic_ = ckpt.nets.at("critic").template cast<Scalar>();
  critic_target_ = ckpt.nets.at("critic_target").template cast<Scalar>();
  actor_opt_ = from_double<Scalar>(ckpt.optimizers.at("actor"));
  critic_opt_ = from_double<Scalar>(ckpt.optimizers.at("critic"));
  if (cfg_.train_encoder) {
    encoder_target_ = ckpt.nets.at("encoder_target").template cast<Scalar>();
    encoder_opt_ = from_double<Scalar>(ckpt.optimizers.at("encoder"));
  } else {
    encoder_target_ = encoder_;
  }
}

template <typename Scalar>
void Agent<Scalar>::load_weights(const nn::Checkpoint& ckpt) {
  const auto take = [&](Params& dst, const std::string& name, const std::string& fallback) {
    auto it = ckpt.nets.find(name);
    if (it == ckpt.nets.end()) it = ckpt.nets.find(fallback);
    if (it == ckpt.nets.end()) throw nn::CheckpointError("checkpoint has no network " + name);
    try {
      dst.load_subset_from(it->second.template cast<Scalar>());
    } catch (const std::invalid_argument& e) {
      throw nn::CheckpointError("cannot load " + name + ": " + e.what());
    }
  };
  take(encoder_, "encoder", "encoder");
  take(encoder_target_, "encoder_target", "encoder");
  take(actor_, "actor", "actor");
  take(actor_target_, "actor_target", "actor");
  take(critic_, "critic", "critic");
  take(critic_target_, "critic_target", "critic");
  // Moment estimates carry over for every tensor this agent shares with the
  // source; without them Adam's first steps move each weight by about lr
  // regardless of its gradient scale. Any mismatch falls back to fresh state.
  const auto moments = [&](nn::AdamState<Scalar>& dst, const Params& params,
                           const std::string& name) {
    dst = nn::AdamState<Scalar>::for_params(params);
    const auto it = ckpt.optimizers.find(name);
    if (it == ckpt.optimizers.end()) return;
    try {
      dst.m.load_subset_from(it->second.m.template cast<Scalar>());
      dst.v.load_subset_from(it->second.v.template cast<Scalar>());
      dst.step = it->second.step;
    } catch (const std::invalid_argument&) {
      dst = nn::AdamState<Scalar>::for_params(params);
    }
  };
  moments(actor_opt_, actor_, "actor");
  moments(critic_opt_, critic_, "critic");
  moments(encoder_opt_, encoder_, "encoder");
}

template class Agent<float>;
template class Agent<double>;

}  // namespace handeye::rl
