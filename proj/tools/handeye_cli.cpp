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

// handeye: train, evaluate and inspect hand-eye pushing policies.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "handeye/harness/config.hpp"
#include "handeye/harness/oracles.hpp"
#include "handeye/harness/trainer.hpp"

namespace {

using handeye::harness::RunConfig;

void log_line(const std::string& msg) {
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%H:%M:%S", std::localtime(&now));
  std::cout << "[" << stamp << "] " << msg << std::endl;
}

RunConfig load(const std::string& path, const std::string& out) {
  RunConfig cfg = handeye::harness::load_config(path);
  if (!out.empty()) cfg.output_dir = out;
  return cfg;
}

int cmd_train(const RunConfig& cfg, const std::string& stage, std::optional<std::uint64_t> seed) {
  std::optional<std::string> only_stage;
  if (!stage.empty()) only_stage = stage;
  handeye::harness::train(cfg, only_stage, seed, log_line);
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& stage_name, const std::string& checkpoint,
             std::optional<std::uint64_t> seed, std::optional<int> episodes) {
  if (stage_name.empty()) throw std::invalid_argument("eval needs --stage");
  const auto& stage = cfg.stage(stage_name);
  const int n = episodes.value_or(cfg.train.final_eval_episodes);
  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (seed) seeds = {*seed};

  std::vector<double> means;
  std::vector<double> vis;
  for (std::uint64_t s : seeds) {
    const std::string ckpt =
        checkpoint.empty() ? handeye::harness::checkpoint_path(cfg, stage_name, s) : checkpoint;
    const auto summary = handeye::harness::evaluate_checkpoint(cfg, stage, ckpt, n, s);
    std::printf("%s seed %llu: success %.3f  visibility %.3f  (%zu episodes)\n",
                stage_name.c_str(), static_cast<unsigned long long>(s), summary.success_rate,
                summary.mean_visibility, summary.episodes.size());
    means.push_back(summary.success_rate);
    vis.push_back(summary.mean_visibility);
  }
  const auto agg = handeye::harness::aggregate(means);
  const auto agg_vis = handeye::harness::aggregate(vis);
  std::printf("%s: success %.3f +- %.3f over %d seeds, visibility %.3f\n", stage_name.c_str(),
              agg.mean, agg.stderr_, agg.n, agg_vis.mean);
  return 0;
}

int cmd_render(const RunConfig& cfg, const std::string& stage_name, const std::string& checkpoint,
               std::optional<std::uint64_t> seed, const std::string& out) {
  if (stage_name.empty()) throw std::invalid_argument("render needs --stage");
  const std::uint64_t s = seed.value_or(cfg.seeds.front());
  const std::string ckpt =
      checkpoint.empty() ? handeye::harness::checkpoint_path(cfg, stage_name, s) : checkpoint;
  const std::string dir = out.empty() ? cfg.output_dir + "/render/" + stage_name : out;
  const auto roll = handeye::harness::render_episode(cfg, cfg.stage(stage_name), ckpt, s, dir);
  std::printf("wrote %d frames to %s (success %s, mean visibility %.3f)\n",
              roll.episode.length(), dir.c_str(), roll.success ? "yes" : "no",
              roll.mean_visibility);
  return 0;
}

int cmd_detector_test(const RunConfig& cfg, std::optional<std::uint64_t> seed,
                      std::optional<int> episodes) {
  const int draws = episodes.value_or(20000);
  const auto curve = handeye::harness::detector_curve(cfg.detector, 11, draws, seed.value_or(1));
  std::printf("%10s %12s %12s\n", "visibility", "configured", "empirical");
  for (const auto& c : curve) {
    std::printf("%10.2f %12.4f %12.4f\n", c.visibility, c.configured, c.empirical);
  }
  return 0;
}

int cmd_geom_test(const RunConfig& cfg, std::optional<std::uint64_t> seed) {
  const std::uint64_t s = seed.value_or(1);
  const auto loc = handeye::harness::localization_oracle(cfg.env, 1000, s);
  std::printf("localization: %d/%d within 1 cm, max error %.5f m, mean %.5f m\n", loc.within,
              loc.trials, loc.max_error, loc.mean_error);
  const auto vis = handeye::harness::visibility_oracle(cfg.env, 100, s + 1);
  std::printf("visibility: max |diff| %.4f, mean %.4f over %d scenes (%d occluded)\n",
              vis.max_abs_diff, vis.mean_abs_diff, vis.scenes, vis.occluded);
  const bool ok = loc.within == loc.trials && vis.max_abs_diff <= 0.05;
  std::printf("%s\n", ok ? "geometry oracles pass" : "geometry oracles FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hand-eye pushing: training, evaluation and inspection"};
  app.require_subcommand(1);

  std::string config = "configs/campaign.yaml";
  std::string out;
  std::string stage;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "YAML run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Single seed instead of the configured list");
    sub->add_option("--out", out, "Output directory");
  };

  auto* train = app.add_subcommand("train", "Run curriculum stages for every seed");
  add_common(train);
  train->add_option("--stage", stage, "Run only this stage");

  auto* eval = app.add_subcommand("eval", "Evaluate a stage checkpoint without exploration noise");
  add_common(eval);
  eval->add_option("--stage", stage, "Stage whose settings to evaluate under")->required();
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file (default: the stage's own)");
  eval->add_option("--episodes", episodes, "Episodes per seed");

  auto* render = app.add_subcommand("render", "Write PPM frames and a CSV sidecar for one episode");
  add_common(render);
  render->add_option("--stage", stage, "Stage whose settings to render under")->required();
  render->add_option("--checkpoint", checkpoint, "Checkpoint file (default: the stage's own)");

  auto* det = app.add_subcommand("detector-test", "Empirical detection curve vs the configured one");
  add_common(det);
  det->add_option("--episodes", episodes, "Draws per visibility level");

  auto* geom = app.add_subcommand("geom-test", "Localization and visibility oracles");
  add_common(geom);

  CLI11_PARSE(app, argc, argv);

  try {
    // For render, --out names the frame directory rather than the run root.
    const RunConfig cfg = load(config, *render ? std::string() : out);
    if (*train) return cmd_train(cfg, stage, seed);
    if (*eval) return cmd_eval(cfg, stage, checkpoint, seed, episodes);
    if (*render) return cmd_render(cfg, stage, checkpoint, seed, out);
    if (*det) return cmd_detector_test(cfg, seed, episodes);
    if (*geom) return cmd_geom_test(cfg, seed);
  } catch (const std::exception& e) {
    std::cerr << "handeye: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
