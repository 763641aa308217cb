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

#include "handeye/harness/config.hpp"

#include <set>
#include <stdexcept>

#include <yaml-cpp/yaml.h>

namespace handeye::harness {
namespace {

using env::Rect;
using env::Vec2;

// Rejects keys outside `allowed` so typos fail loudly.
void check_keys(const YAML::Node& node, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!node) return;
  if (!node.IsMap()) throw std::invalid_argument(where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (node && node[key]) out = node[key].as<T>();
}

void read_vec2(const YAML::Node& node, const char* key, Vec2& out) {
  if (!node || !node[key]) return;
  const auto v = node[key].as<std::vector<double>>();
  if (v.size() != 2) throw std::invalid_argument(std::string(key) + " needs two numbers");
  out = Vec2(v[0], v[1]);
}

// [x_min, y_min, x_max, y_max]
void read_rect(const YAML::Node& node, const char* key, Rect& out) {
  if (!node || !node[key]) return;
  const auto v = node[key].as<std::vector<double>>();
  if (v.size() != 4) throw std::invalid_argument(std::string(key) + " needs four numbers");
  out = Rect{Vec2(v[0], v[1]), Vec2(v[2], v[3])};
}

void read_env(const YAML::Node& n, env::EnvConfig& e) {
  check_keys(n, "env",
             {"object_region", "goal_region", "gripper_region", "gripper_start", "cube_side",
              "gripper_radius", "gripper_max_step", "substeps", "camera_range",
              "camera_max_step", "min_distractors", "max_distractors", "distractor_spread",
              "distractor_half_xy", "distractor_half_height", "max_placement_retries",
              "tolerance", "horizon"});
  read_rect(n, "object_region", e.object_region);
  read_rect(n, "goal_region", e.goal_region);
  read_rect(n, "gripper_region", e.gripper_region);
  read_vec2(n, "gripper_start", e.gripper_start);
  read(n, "cube_side", e.cube_side);
  read(n, "gripper_radius", e.gripper_radius);
  read(n, "gripper_max_step", e.gripper_max_step);
  read(n, "substeps", e.substeps);
  read(n, "camera_range", e.camera_range);
  read(n, "camera_max_step", e.camera_max_step);
  read(n, "min_distractors", e.min_distractors);
  read(n, "max_distractors", e.max_distractors);
  read_vec2(n, "distractor_spread", e.distractor_spread);
  read_vec2(n, "distractor_half_xy", e.distractor_half_xy);
  read_vec2(n, "distractor_half_height", e.distractor_half_height);
  read(n, "max_placement_retries", e.max_placement_retries);
  read(n, "tolerance", e.tolerance);
  read(n, "horizon", e.horizon);
}

void read_detector(const YAML::Node& n, percept::DetectorParams& d) {
  check_keys(n, "detector",
             {"box_noise_sigma", "curve", "oracle_initial_estimate", "max_initial_polls"});
  read(n, "box_noise_sigma", d.box_noise_sigma);
  if (n && n["curve"]) d.curve = percept::parse_curve(n["curve"].as<std::string>());
  read(n, "oracle_initial_estimate", d.oracle_initial_estimate);
  read(n, "max_initial_polls", d.max_initial_polls);
}

void read_her(const YAML::Node& n, rl::AgentConfig& a, TrainSettings& t) {
  check_keys(n, "her",
             {"k", "gamma", "noise_sigma", "random_action_prob", "batch_size", "polyak",
              "action_l2"});
  read(n, "k", t.relabel_k);
  read(n, "gamma", a.gamma);
  read(n, "noise_sigma", a.noise_sigma);
  read(n, "random_action_prob", a.random_action_prob);
  read(n, "batch_size", a.batch_size);
  read(n, "polyak", a.polyak);
  read(n, "action_l2", a.action_l2);
}

void read_networks(const YAML::Node& n, rl::AgentConfig& a) {
  check_keys(n, "networks",
             {"image_size", "conv_channels", "conv_strides", "conv_kernel", "embedding",
              "bn_momentum", "actor_hidden", "critic_hidden", "actor_lr", "critic_lr",
              "position_scale", "train_encoder"});
  read(n, "image_size", a.cnn.image_size);
  read(n, "conv_channels", a.cnn.channels);
  read(n, "conv_strides", a.cnn.strides);
  read(n, "conv_kernel", a.cnn.kernel);
  read(n, "embedding", a.cnn.embedding);
  read(n, "bn_momentum", a.cnn.bn_momentum);
  read(n, "actor_hidden", a.actor_mlp.hidden);
  read(n, "critic_hidden", a.critic_mlp.hidden);
  read(n, "actor_lr", a.actor_optim.lr);
  read(n, "critic_lr", a.critic_optim.lr);
  read(n, "position_scale", a.position_scale);
  read(n, "train_encoder", a.train_encoder);
}

void read_train(const YAML::Node& n, TrainSettings& t) {
  check_keys(n, "train",
             {"warmup_steps", "env_steps_per_update", "replay_capacity", "eval_every",
              "eval_episodes", "final_eval_episodes", "train_success_window",
              "calibration_episodes", "calibration_batch", "calibration_passes"});
  read(n, "warmup_steps", t.warmup_steps);
  read(n, "env_steps_per_update", t.env_steps_per_update);
  read(n, "replay_capacity", t.replay_capacity);
  read(n, "eval_every", t.eval_every);
  read(n, "eval_episodes", t.eval_episodes);
  read(n, "final_eval_episodes", t.final_eval_episodes);
  read(n, "train_success_window", t.train_success_window);
  read(n, "calibration_episodes", t.calibration_episodes);
  read(n, "calibration_batch", t.calibration_batch);
  read(n, "calibration_passes", t.calibration_passes);
}

CurriculumStage read_stage(const YAML::Node& n) {
  check_keys(n, "stage",
             {"name", "distractors", "variant", "layout", "weights", "camera", "steps",
              "visibility_bonus"});
  CurriculumStage s;
  if (!n["name"]) throw std::invalid_argument("every stage needs a name");
  s.name = n["name"].as<std::string>();
  read(n, "distractors", s.distractors);
  if (n["variant"]) s.variant = rl::parse_variant(n["variant"].as<std::string>());
  if (n["layout"]) s.layout = percept::parse_layout(n["layout"].as<std::string>());
  if (n["weights"]) s.weights = WeightSource::parse(n["weights"].as<std::string>());
  if (n["camera"]) s.camera = rl::parse_camera_override(n["camera"].as<std::string>());
  read(n, "steps", s.steps);
  read(n, "visibility_bonus", s.visibility_bonus);
  return s;
}

RunConfig from_node(const YAML::Node& root) {
  check_keys(root, "config",
             {"output_dir", "precision", "seeds", "env", "detector", "her", "networks", "train",
              "stages"});
  RunConfig c;
  read(root, "output_dir", c.output_dir);
  if (root["precision"]) {
    const auto p = root["precision"].as<std::string>();
    if (p == "float32") {
      c.precision = Precision::kFloat32;
    } else if (p == "float64") {
      c.precision = Precision::kFloat64;
    } else {
      throw std::invalid_argument("precision must be float32 or float64");
    }
  }
  read(root, "seeds", c.seeds);
  read_env(root["env"], c.env);
  read_detector(root["detector"], c.detector);
  read_her(root["her"], c.agent, c.train);
  read_networks(root["networks"], c.agent);
  read_train(root["train"], c.train);
  if (root["stages"]) {
    for (const auto& s : root["stages"]) c.stages.push_back(read_stage(s));
  }
  c.validate();
  return c;
}

}  // namespace

WeightSource WeightSource::parse(const std::string& text) {
  if (text.empty() || text == "fresh") return {Kind::kFresh, ""};
  if (text.rfind("stage:", 0) == 0) return {Kind::kStage, text.substr(6)};
  if (text.rfind("path:", 0) == 0) return {Kind::kPath, text.substr(5)};
  throw std::invalid_argument("weights must be 'fresh', 'stage:NAME' or 'path:FILE', got '" +
                              text + "'");
}

std::string WeightSource::describe() const {
  switch (kind) {
    case Kind::kFresh:
      return "fresh";
    case Kind::kStage:
      return "stage:" + ref;
    case Kind::kPath:
      return "path:" + ref;
  }
  return "fresh";
}

void RunConfig::validate() const {
  env.validate();
  agent.validate();
  if (detector.box_noise_sigma < 0.0) throw std::invalid_argument("box_noise_sigma must be >= 0");
  if (seeds.empty()) throw std::invalid_argument("seeds must be nonempty");
  if (train.relabel_k < 0) throw std::invalid_argument("her.k must be >= 0");
  if (train.env_steps_per_update < 1 || train.eval_every < 1 || train.eval_episodes < 1 ||
      train.final_eval_episodes < 1 || train.train_success_window < 1 ||
      train.warmup_steps < 0 || train.replay_capacity < static_cast<std::size_t>(env.horizon)) {
    throw std::invalid_argument("train settings out of range");
  }
  if (train.calibration_episodes < 1 || train.calibration_batch < 2 ||
      train.calibration_passes < 1) {
    throw std::invalid_argument("calibration settings out of range");
  }
  std::set<std::string> names;
  for (const CurriculumStage& s : stages) {
    if (s.steps <= 0) throw std::invalid_argument("stage " + s.name + " needs a positive budget");
    if (s.visibility_bonus < 0.0) {
      throw std::invalid_argument("stage " + s.name + " has a negative visibility bonus");
    }
    if (s.weights.kind == WeightSource::Kind::kStage && !names.count(s.weights.ref)) {
      throw std::invalid_argument("stage " + s.name + " loads from '" + s.weights.ref +
                                  "', which is not an earlier stage");
    }
    if (!names.insert(s.name).second) throw std::invalid_argument("duplicate stage " + s.name);
  }
}

const CurriculumStage& RunConfig::stage(const std::string& name) const {
  for (const CurriculumStage& s : stages) {
    if (s.name == name) return s;
  }
  throw std::invalid_argument("no stage named '" + name + "'");
}

env::EnvConfig RunConfig::env_for(const CurriculumStage& s) const {
  env::EnvConfig e = env;
  if (!s.distractors) {
    e.min_distractors = 0;
    e.max_distractors = 0;
  }
  return e;
}

rl::AgentConfig RunConfig::agent_for(const CurriculumStage& s) const {
  rl::AgentConfig a = agent;
  a.variant = s.variant;
  a.layout = s.layout;
  a.visibility_bonus = s.visibility_bonus;
  return a;
}

RunConfig load_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument("cannot read config " + path + ": " + e.what());
  }
  try {
    return from_node(root);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument("bad value in config " + path + ": " + e.what());
  }
}

RunConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("cannot parse config: ") + e.what());
  }
  try {
    return from_node(root);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("bad value in config: ") + e.what());
  }
}

}  // namespace handeye::harness
