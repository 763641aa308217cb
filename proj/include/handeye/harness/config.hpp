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

#ifndef HANDEYE_HARNESS_CONFIG_HPP_
#define HANDEYE_HARNESS_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "handeye/env/pushing_env.hpp"
#include "handeye/percept/detector.hpp"
#include "handeye/rl/agent.hpp"

namespace handeye::harness {

// Where a stage's initial weights come from.
struct WeightSource {
  enum class Kind { kFresh, kStage, kPath };
  Kind kind = Kind::kFresh;
  std::string ref;  // stage name or checkpoint path

  static WeightSource parse(const std::string& text);
  [[nodiscard]] std::string describe() const;
};

struct CurriculumStage {
  std::string name;
  bool distractors = false;
  rl::PolicyVariant variant = rl::PolicyVariant::kCamStatic;
  percept::Layout layout = percept::Layout::kObjectCentric;
  WeightSource weights;
  rl::CameraOverride camera = rl::CameraOverride::kLearned;
  std::int64_t steps = 150000;
  double visibility_bonus = 0.0;
};

struct TrainSettings {
  std::int64_t warmup_steps = 2000;
  int env_steps_per_update = 2;
  std::size_t replay_capacity = 200000;
  int relabel_k = 4;
  std::int64_t eval_every = 5000;
  int eval_episodes = 20;
  int final_eval_episodes = 100;
  int train_success_window = 100;
  // Frames from random-action episodes used to settle the encoder's
  // batch-norm statistics when a stage starts from fresh weights.
  int calibration_episodes = 40;
  int calibration_batch = 32;
  int calibration_passes = 5;
};

enum class Precision { kFloat32, kFloat64 };

struct RunConfig {
  env::EnvConfig env;
  percept::DetectorParams detector;
  rl::AgentConfig agent;  // variant, layout and bonus are set per stage
  TrainSettings train;
  std::vector<CurriculumStage> stages;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir = "runs/default";
  Precision precision = Precision::kFloat32;

  // Throws std::invalid_argument describing the first problem found.
  void validate() const;
  [[nodiscard]] const CurriculumStage& stage(const std::string& name) const;
  [[nodiscard]] env::EnvConfig env_for(const CurriculumStage& stage) const;
  [[nodiscard]] rl::AgentConfig agent_for(const CurriculumStage& stage) const;
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& yaml_text);

}  // namespace handeye::harness

#endif  // HANDEYE_HARNESS_CONFIG_HPP_
