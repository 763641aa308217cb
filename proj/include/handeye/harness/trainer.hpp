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

#ifndef HANDEYE_HARNESS_TRAINER_HPP_
#define HANDEYE_HARNESS_TRAINER_HPP_

#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "handeye/harness/config.hpp"
#include "handeye/rl/agent.hpp"

namespace handeye::harness {

// splitmix64 over a base seed and two stream tags.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);
std::uint64_t stage_tag(const std::string& stage_name);

// A finished episode plus what a renderer or test needs to audit it.
struct Rollout {
  rl::Episode episode;
  std::vector<env::WorldState> states;      // one per observation
  std::vector<geom::FrameBuffer> frames;    // filled when requested
  std::vector<double> rewards;              // environment reward per step
  bool success = false;
  double mean_visibility = 0.0;
};

// Chooses a normalized action from the current observation and goal.
using Policy = std::function<rl::ActionVec(const rl::ObsRecord&, const rl::Point3&)>;
// Maps an RGB8 frame to the encoder embedding; may be empty.
using Embedder = std::function<Eigen::VectorXd(const std::vector<std::uint8_t>&)>;

struct RolloutOptions {
  bool keep_frames = false;  // FrameBuffers in Rollout::frames
  bool keep_rgb = false;     // RGB8 bytes in each ObsRecord
};

Rollout run_episode(const env::EnvConfig& env_cfg, const percept::DetectorParams& det,
                    std::uint64_t env_seed, const Policy& policy, const Embedder& embed,
                    std::mt19937_64& rng, const RolloutOptions& opts = {});

template <typename Scalar>
Rollout run_agent_episode(const rl::Agent<Scalar>& agent, const env::EnvConfig& env_cfg,
                          const percept::DetectorParams& det, std::uint64_t env_seed,
                          bool explore, std::mt19937_64& rng, const RolloutOptions& opts = {});

struct EpisodeRecord {
  std::uint64_t seed = 0;
  int episode = 0;
  bool success = false;
  int steps = 0;
  double mean_visibility = 0.0;
};

struct EvalSummary {
  double success_rate = 0.0;
  double mean_visibility = 0.0;
  std::vector<EpisodeRecord> episodes;
};

// Noise-free episodes on the evaluation seed stream of `seed`.
template <typename Scalar>
EvalSummary evaluate_agent(const rl::Agent<Scalar>& agent, const env::EnvConfig& env_cfg,
                           const percept::DetectorParams& det, int episodes, std::uint64_t seed);

// Mean and standard error across per-seed means.
struct Aggregate {
  double mean = 0.0;
  double stderr_ = 0.0;
  int n = 0;
};
Aggregate aggregate(const std::vector<double>& seed_means);

struct MetricsRow {
  std::string stage;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  double train_success = 0.0;
  double eval_success = 0.0;
  double mean_visibility = 0.0;
  double wall_secs = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "stage,seed,steps,train_success,eval_success,mean_visibility,wall_secs";

// Append-only CSV; every row is flushed as soon as it is written.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void write(const MetricsRow& row);

 private:
  std::ofstream out_;
};

std::vector<MetricsRow> read_metrics(const std::string& path);

struct StageOutcome {
  std::string checkpoint;
  EvalSummary final_eval;
  std::int64_t steps = 0;
  double wall_secs = 0.0;
  bool skipped = false;  // results already on disk
};

std::string checkpoint_path(const RunConfig& cfg, const std::string& stage, std::uint64_t seed);
std::string eval_path(const RunConfig& cfg, const std::string& stage, std::uint64_t seed);
std::string metrics_path(const RunConfig& cfg, std::uint64_t seed);

// Progress lines go to `log` when given.
using LogFn = std::function<void(const std::string&)>;

// Trains one stage for one seed, writes its checkpoint, metrics rows and
// final evaluation. Completed stages are skipped unless `force`.
StageOutcome train_stage(const RunConfig& cfg, const CurriculumStage& stage, std::uint64_t seed,
                         const LogFn& log = {}, bool force = false);

// Runs every stage (or one) for every seed (or one), in order.
void train(const RunConfig& cfg, const std::optional<std::string>& only_stage,
           const std::optional<std::uint64_t>& only_seed, const LogFn& log = {});

// Fails fast on unreadable or mismatched checkpoints.
EvalSummary evaluate_checkpoint(const RunConfig& cfg, const CurriculumStage& stage,
                                const std::string& checkpoint, int episodes,
                                std::uint64_t seed);

// Writes frame_000.ppm ... plus episode.csv with actions, detections and
// visibility per step. Returns the rollout that was rendered.
Rollout render_episode(const RunConfig& cfg, const CurriculumStage& stage,
                       const std::string& checkpoint, std::uint64_t seed,
                       const std::string& out_dir);

// Final evaluation record as written next to each checkpoint.
void write_eval_json(const std::string& path, const std::string& stage, std::uint64_t seed,
                     const StageOutcome& outcome);
EvalSummary read_eval_json(const std::string& path);

}  // namespace handeye::harness

#endif  // HANDEYE_HARNESS_TRAINER_HPP_
