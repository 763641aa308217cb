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

#include "handeye/harness/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "handeye/geom/raster.hpp"
#include "handeye/percept/detector.hpp"

namespace handeye::harness {
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kEvalStream = 0x6576616cULL;    // "eval"
constexpr std::uint64_t kRenderStream = 0x726e6472ULL;  // "rndr"
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainRngStream = 2;
constexpr std::uint64_t kCalibrationStream = 3;
constexpr std::uint64_t kTrainEpisodeStream = 4;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

rl::ActionVec to_normalized_checked(const rl::ActionVec& a) {
  if (!a.allFinite()) throw std::runtime_error("policy produced a non-finite action");
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

std::string source_checkpoint(const RunConfig& cfg, const CurriculumStage& stage,
                              std::uint64_t seed) {
  switch (stage.weights.kind) {
    case WeightSource::Kind::kFresh:
      return "";
    case WeightSource::Kind::kStage:
      return checkpoint_path(cfg, stage.weights.ref, seed);
    case WeightSource::Kind::kPath:
      return stage.weights.ref;
  }
  return "";
}

template <typename Scalar>
void calibrate(rl::Agent<Scalar>& agent, const RunConfig& cfg, const env::EnvConfig& env_cfg,
               std::uint64_t seed, std::uint64_t tag) {
  std::mt19937_64 rng(derive_seed(seed, tag, kCalibrationStream));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Policy random_policy = [&](const rl::ObsRecord&, const rl::Point3&) {
    return rl::ActionVec(u(rng), u(rng), u(rng), u(rng));
  };
  std::vector<std::vector<std::uint8_t>> frames;
  RolloutOptions opts;
  opts.keep_rgb = true;
  for (int e = 0; e < cfg.train.calibration_episodes; ++e) {
    Rollout r = run_episode(env_cfg, cfg.detector,
                            derive_seed(seed, tag ^ kCalibrationStream, static_cast<std::uint64_t>(e)),
                            random_policy, {}, rng, opts);
    for (rl::ObsRecord& o : r.episode.obs) frames.push_back(std::move(o.frame));
  }
  std::shuffle(frames.begin(), frames.end(), rng);
  agent.calibrate_encoder(frames, cfg.train.calibration_batch, cfg.train.calibration_passes);
}

template <typename Scalar>
rl::Agent<Scalar> make_agent(const RunConfig& cfg, const CurriculumStage& stage,
                             std::uint64_t seed) {
  rl::Agent<Scalar> agent(cfg.agent_for(stage), derive_seed(seed, stage_tag(stage.name), kInitStream));
  agent.set_camera_override(stage.camera);
  return agent;
}

template <typename Scalar>
StageOutcome train_stage_impl(const RunConfig& cfg, const CurriculumStage& stage,
                              std::uint64_t seed, const LogFn& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const env::EnvConfig env_cfg = cfg.env_for(stage);
  const std::uint64_t tag = stage_tag(stage.name);

  // Fail fast on the weight source before any rollout.
  std::optional<nn::Checkpoint> source;
  const std::string src = source_checkpoint(cfg, stage, seed);
  if (!src.empty()) source = nn::load_checkpoint(src);

  rl::Agent<Scalar> agent = make_agent<Scalar>(cfg, stage, seed);
  if (source) {
    agent.load_weights(*source);
  } else {
    calibrate(agent, cfg, env_cfg, seed, tag);
  }

  std::mt19937_64 rng(derive_seed(seed, tag, kTrainRngStream));
  rl::ReplayBuffer buffer(cfg.train.replay_capacity);
  const rl::RelabelConfig relabel{cfg.train.relabel_k, stage.visibility_bonus};
  const rl::RewardFn reward = [&env_cfg](const rl::Point3& a, const rl::Point3& g) {
    return env::reward_fn(a, g, env_cfg);
  };

  fs::create_directories(cfg.output_dir);
  MetricsWriter metrics(metrics_path(cfg, seed));
  std::deque<bool> recent;
  std::int64_t steps = 0;
  std::int64_t updates = 0;
  std::int64_t next_eval = cfg.train.eval_every;
  std::uint64_t episode = 0;

  while (steps < stage.steps) {
    Rollout r = run_agent_episode(agent, env_cfg, cfg.detector,
                                  derive_seed(seed, tag ^ kTrainEpisodeStream, episode++), true,
                                  rng);
    steps += r.episode.length();
    recent.push_back(r.success);
    while (static_cast<int>(recent.size()) > cfg.train.train_success_window) recent.pop_front();
    buffer.store_episode(std::move(r.episode), relabel, reward, rng);

    if (steps > cfg.train.warmup_steps) {
      const std::int64_t due = (steps - cfg.train.warmup_steps) / cfg.train.env_steps_per_update;
      while (updates < due) {
        agent.update(buffer, rng);
        ++updates;
      }
    }
    while (steps >= next_eval) {
      const EvalSummary ev = evaluate_agent(agent, env_cfg, cfg.detector,
                                            cfg.train.eval_episodes, seed);
      MetricsRow row;
      row.stage = stage.name;
      row.seed = seed;
      row.steps = next_eval;
      row.train_success =
          static_cast<double>(std::count(recent.begin(), recent.end(), true)) /
          static_cast<double>(recent.size());
      row.eval_success = ev.success_rate;
      row.mean_visibility = ev.mean_visibility;
      row.wall_secs = seconds_since(t0);
      metrics.write(row);
      if (log) {
        std::ostringstream os;
        os << stage.name << " seed " << seed << " steps " << next_eval << " train "
           << std::fixed << std::setprecision(2) << row.train_success << " eval "
           << row.eval_success << " vis " << row.mean_visibility << " ("
           << std::setprecision(0) << row.wall_secs << " s)";
        log(os.str());
      }
      next_eval += cfg.train.eval_every;
    }
  }

  StageOutcome out;
  out.steps = steps;
  out.checkpoint = checkpoint_path(cfg, stage.name, seed);
  fs::create_directories(fs::path(out.checkpoint).parent_path());
  nn::Checkpoint ckpt = agent.to_checkpoint();
  ckpt.metadata["stage"] = stage.name;
  ckpt.metadata["seed"] = std::to_string(seed);
  ckpt.metadata["steps"] = std::to_string(steps);
  ckpt.metadata["camera"] = rl::to_string(stage.camera);
  ckpt.rng_state = rng_to_string(rng);
  nn::save_checkpoint(out.checkpoint, ckpt);

  out.final_eval = evaluate_agent(agent, env_cfg, cfg.detector, cfg.train.final_eval_episodes, seed);
  out.wall_secs = seconds_since(t0);
  write_eval_json(eval_path(cfg, stage.name, seed), stage.name, seed, out);
  if (log) {
    std::ostringstream os;
    os << stage.name << " seed " << seed << " final eval " << std::fixed << std::setprecision(3)
       << out.final_eval.success_rate << " over " << out.final_eval.episodes.size()
       << " episodes (" << std::setprecision(0) << out.wall_secs << " s)";
    log(os.str());
  }
  return out;
}

template <typename Scalar>
rl::Agent<Scalar> agent_from_checkpoint(const RunConfig& cfg, const CurriculumStage& stage,
                                        const std::string& checkpoint) {
  rl::Agent<Scalar> agent = make_agent<Scalar>(cfg, stage, 0);
  agent.restore(nn::load_checkpoint(checkpoint));
  return agent;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

std::uint64_t stage_tag(const std::string& stage_name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : stage_name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Rollout run_episode(const env::EnvConfig& env_cfg, const percept::DetectorParams& det,
                    std::uint64_t env_seed, const Policy& policy, const Embedder& embed,
                    std::mt19937_64& rng, const RolloutOptions& opts) {
  Rollout r;
  env::WorldState state = env::reset(env_cfg, env_seed);
  percept::Percept p = percept::perceive_initial(state, env_cfg, det, rng);

  const auto observe = [&](percept::Percept& pc, const env::WorldState& st) {
    rl::ObsRecord o;
    std::vector<std::uint8_t> rgb = pc.frame.to_rgb8();
    if (embed) o.embedding = embed(rgb);
    if (opts.keep_rgb) o.frame = std::move(rgb);
    o.object_estimate = pc.estimate;
    o.gripper = st.gripper_pos;
    o.camera = st.camera_pos;
    o.detected = pc.detection.detected;
    o.visibility = pc.visibility;
    if (opts.keep_frames) r.frames.push_back(pc.frame);
    r.states.push_back(st);
    return o;
  };

  r.episode.goal = state.goal;
  r.episode.obs.push_back(observe(p, state));
  double vis_sum = p.visibility;
  for (int t = 0; t < env_cfg.horizon; ++t) {
    const rl::ActionVec a = to_normalized_checked(policy(r.episode.obs.back(), state.goal));
    env::ActionFull full;
    full.gripper_delta = a.head<2>() * env_cfg.gripper_max_step;
    full.camera_delta = a.tail<2>() * env_cfg.camera_max_step;
    const env::StepResult sr = env::step(state, full, env_cfg);
    p = percept::perceive(sr.state, env_cfg, det, p.estimate, rng);
    r.episode.actions.push_back(a);
    r.episode.achieved.push_back(sr.achieved_goal);
    r.rewards.push_back(sr.reward);
    r.episode.obs.push_back(observe(p, sr.state));
    vis_sum += p.visibility;
    state = sr.state;
    if (sr.done) {
      r.success = sr.success;
      r.episode.timed_out = sr.timeout;
      break;
    }
  }
  r.mean_visibility = vis_sum / static_cast<double>(r.episode.obs.size());
  return r;
}

template <typename Scalar>
Rollout run_agent_episode(const rl::Agent<Scalar>& agent, const env::EnvConfig& env_cfg,
                          const percept::DetectorParams& det, std::uint64_t env_seed,
                          bool explore, std::mt19937_64& rng, const RolloutOptions& opts) {
  RolloutOptions o = opts;
  o.keep_rgb = o.keep_rgb || agent.stores_frames();
  const Policy policy = [&](const rl::ObsRecord& obs, const rl::Point3& goal) {
    return agent.act(obs, goal, explore, rng);
  };
  const Embedder embed = [&](const std::vector<std::uint8_t>& rgb) { return agent.embed(rgb); };
  return run_episode(env_cfg, det, env_seed, policy, embed, rng, o);
}

template <typename Scalar>
EvalSummary evaluate_agent(const rl::Agent<Scalar>& agent, const env::EnvConfig& env_cfg,
                           const percept::DetectorParams& det, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate: need at least one episode");
  std::mt19937_64 rng(derive_seed(seed, kEvalStream, 0));
  EvalSummary s;
  int wins = 0;
  double vis = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const Rollout r = run_agent_episode(
        agent, env_cfg, det, derive_seed(seed, kEvalStream, static_cast<std::uint64_t>(e) + 1),
        false, rng);
    EpisodeRecord rec;
    rec.seed = seed;
    rec.episode = e;
    rec.success = r.success;
    rec.steps = r.episode.length();
    rec.mean_visibility = r.mean_visibility;
    s.episodes.push_back(rec);
    wins += r.success ? 1 : 0;
    vis += r.mean_visibility;
  }
  s.success_rate = static_cast<double>(wins) / episodes;
  s.mean_visibility = vis / episodes;
  return s;
}

Aggregate aggregate(const std::vector<double>& seed_means) {
  Aggregate a;
  a.n = static_cast<int>(seed_means.size());
  if (a.n == 0) return a;
  a.mean = std::accumulate(seed_means.begin(), seed_means.end(), 0.0) / a.n;
  if (a.n > 1) {
    double ss = 0.0;
    for (double m : seed_means) ss += (m - a.mean) * (m - a.mean);
    a.stderr_ = std::sqrt(ss / (a.n - 1)) / std::sqrt(static_cast<double>(a.n));
  }
  return a;
}

MetricsWriter::MetricsWriter(const std::string& path) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  out_.open(path, std::ios::app);
  if (!out_) throw std::runtime_error("cannot open metrics file " + path);
  if (fresh) out_ << kMetricsHeader << '\n' << std::flush;
}

void MetricsWriter::write(const MetricsRow& row) {
  out_ << row.stage << ',' << row.seed << ',' << row.steps << ',' << std::setprecision(6)
       << row.train_success << ',' << row.eval_success << ',' << row.mean_visibility << ','
       << std::setprecision(8) << row.wall_secs << '\n'
       << std::flush;
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file " + path);
  std::vector<MetricsRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == kMetricsHeader) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) continue;  // a torn final row
    try {
      MetricsRow r;
      r.stage = f[0];
      r.seed = std::stoull(f[1]);
      r.steps = std::stoll(f[2]);
      r.train_success = std::stod(f[3]);
      r.eval_success = std::stod(f[4]);
      r.mean_visibility = std::stod(f[5]);
      r.wall_secs = std::stod(f[6]);
      rows.push_back(r);
    } catch (const std::exception&) {
      continue;
    }
  }
  return rows;
}

std::string checkpoint_path(const RunConfig& cfg, const std::string& stage, std::uint64_t seed) {
  return (fs::path(cfg.output_dir) / stage / ("seed" + std::to_string(seed) + ".ckpt")).string();
}

std::string eval_path(const RunConfig& cfg, const std::string& stage, std::uint64_t seed) {
  return (fs::path(cfg.output_dir) / stage / ("seed" + std::to_string(seed) + "_eval.json"))
      .string();
}

std::string metrics_path(const RunConfig& cfg, std::uint64_t seed) {
  return (fs::path(cfg.output_dir) / ("metrics_seed" + std::to_string(seed) + ".csv")).string();
}

StageOutcome train_stage(const RunConfig& cfg, const CurriculumStage& stage, std::uint64_t seed,
                         const LogFn& log, bool force) {
  if (!force && fs::exists(checkpoint_path(cfg, stage.name, seed)) &&
      fs::exists(eval_path(cfg, stage.name, seed))) {
    StageOutcome out;
    out.checkpoint = checkpoint_path(cfg, stage.name, seed);
    out.final_eval = read_eval_json(eval_path(cfg, stage.name, seed));
    out.skipped = true;
    if (log) log(stage.name + " seed " + std::to_string(seed) + " already complete, skipping");
    return out;
  }
  if (cfg.precision == Precision::kFloat32) return train_stage_impl<float>(cfg, stage, seed, log);
  return train_stage_impl<double>(cfg, stage, seed, log);
}

void train(const RunConfig& cfg, const std::optional<std::string>& only_stage,
           const std::optional<std::uint64_t>& only_seed, const LogFn& log) {
  cfg.validate();
  if (only_stage) (void)cfg.stage(*only_stage);
  for (const std::uint64_t seed : cfg.seeds) {
    if (only_seed && *only_seed != seed) continue;
    for (const CurriculumStage& stage : cfg.stages) {
      if (only_stage && *only_stage != stage.name) continue;
      train_stage(cfg, stage, seed, log);
    }
  }
}

EvalSummary evaluate_checkpoint(const RunConfig& cfg, const CurriculumStage& stage,
                                const std::string& checkpoint, int episodes,
                                std::uint64_t seed) {
  const env::EnvConfig env_cfg = cfg.env_for(stage);
  if (cfg.precision == Precision::kFloat32) {
    return evaluate_agent(agent_from_checkpoint<float>(cfg, stage, checkpoint), env_cfg,
                          cfg.detector, episodes, seed);
  }
  return evaluate_agent(agent_from_checkpoint<double>(cfg, stage, checkpoint), env_cfg,
                        cfg.detector, episodes, seed);
}

Rollout render_episode(const RunConfig& cfg, const CurriculumStage& stage,
                       const std::string& checkpoint, std::uint64_t seed,
                       const std::string& out_dir) {
  const env::EnvConfig env_cfg = cfg.env_for(stage);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw std::runtime_error("cannot create output directory " + out_dir);
  }
  std::mt19937_64 rng(derive_seed(seed, kRenderStream, 0));
  RolloutOptions opts;
  opts.keep_frames = true;
  const std::uint64_t env_seed = derive_seed(seed, kRenderStream, 1);
  Rollout r;
  if (cfg.precision == Precision::kFloat32) {
    r = run_agent_episode(agent_from_checkpoint<float>(cfg, stage, checkpoint), env_cfg,
                          cfg.detector, env_seed, false, rng, opts);
  } else {
    r = run_agent_episode(agent_from_checkpoint<double>(cfg, stage, checkpoint), env_cfg,
                          cfg.detector, env_seed, false, rng, opts);
  }

  std::ofstream side((fs::path(out_dir) / "episode.csv").string());
  if (!side) throw std::runtime_error("cannot write into " + out_dir);
  side << "step,gripper_dx,gripper_dy,camera_dx,camera_dy,detected,visibility,"
          "estimate_x,estimate_y,object_x,object_y,camera_x,camera_y,reward\n";
  side << std::setprecision(9);
  for (int t = 0; t < r.episode.length(); ++t) {
    const auto i = static_cast<std::size_t>(t);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03d.ppm", t);
    geom::write_ppm(r.frames[i], (fs::path(out_dir) / name).string());
    const rl::ObsRecord& o = r.episode.obs[i];
    const rl::ActionVec& a = r.episode.actions[i];
    const env::WorldState& s = r.states[i];
    side << t << ',' << a[0] << ',' << a[1] << ',' << a[2] << ',' << a[3] << ','
         << (o.detected ? 1 : 0) << ',' << o.visibility << ',' << o.object_estimate.x() << ','
         << o.object_estimate.y() << ',' << s.object_pos.x() << ',' << s.object_pos.y() << ','
         << s.camera_pos.x() << ',' << s.camera_pos.y() << ',' << r.rewards[i] << '\n';
  }
  if (!side) throw std::runtime_error("failed writing sidecar in " + out_dir);
  return r;
}

void write_eval_json(const std::string& path, const std::string& stage, std::uint64_t seed,
                     const StageOutcome& outcome) {
  nlohmann::json j;
  j["stage"] = stage;
  j["seed"] = seed;
  j["steps"] = outcome.steps;
  j["wall_secs"] = outcome.wall_secs;
  j["success_rate"] = outcome.final_eval.success_rate;
  j["mean_visibility"] = outcome.final_eval.mean_visibility;
  nlohmann::json eps = nlohmann::json::array();
  for (const EpisodeRecord& e : outcome.final_eval.episodes) {
    eps.push_back({{"episode", e.episode},
                   {"success", e.success},
                   {"steps", e.steps},
                   {"mean_visibility", e.mean_visibility}});
  }
  j["episodes"] = eps;
  fs::create_directories(fs::path(path).parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(1) << '\n';
  }
  fs::rename(tmp, path);
}

EvalSummary read_eval_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  EvalSummary s;
  s.success_rate = j.at("success_rate").get<double>();
  s.mean_visibility = j.at("mean_visibility").get<double>();
  const auto seed = j.at("seed").get<std::uint64_t>();
  for (const auto& e : j.at("episodes")) {
    EpisodeRecord r;
    r.seed = seed;
    r.episode = e.at("episode").get<int>();
    r.success = e.at("success").get<bool>();
    r.steps = e.at("steps").get<int>();
    r.mean_visibility = e.at("mean_visibility").get<double>();
    s.episodes.push_back(r);
  }
  return s;
}

template Rollout run_agent_episode<float>(const rl::Agent<float>&, const env::EnvConfig&,
                                          const percept::DetectorParams&, std::uint64_t, bool,
                                          std::mt19937_64&, const RolloutOptions&);
template Rollout run_agent_episode<double>(const rl::Agent<double>&, const env::EnvConfig&,
                                           const percept::DetectorParams&, std::uint64_t, bool,
                                           std::mt19937_64&, const RolloutOptions&);
template EvalSummary evaluate_agent<float>(const rl::Agent<float>&, const env::EnvConfig&,
                                           const percept::DetectorParams&, int, std::uint64_t);
template EvalSummary evaluate_agent<double>(const rl::Agent<double>&, const env::EnvConfig&,
                                            const percept::DetectorParams&, int, std::uint64_t);

}  // namespace handeye::harness
