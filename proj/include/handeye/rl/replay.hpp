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

#ifndef HANDEYE_RL_REPLAY_HPP_
#define HANDEYE_RL_REPLAY_HPP_

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace handeye::rl {

using Point3 = Eigen::Vector3d;
// Normalized [gripper dx, gripper dy, camera dx, camera dy], each in [-1, 1].
using ActionVec = Eigen::Vector4d;

// What the agent perceived at one step.
struct ObsRecord {
  Eigen::VectorXd embedding;         // f_t; empty when frames are stored
  std::vector<std::uint8_t> frame;   // RGB8 frame, kept only for a trained encoder
  Point3 object_estimate = Point3::Zero();
  Point3 gripper = Point3::Zero();
  Point3 camera = Point3::Zero();
  bool detected = false;
  double visibility = 0.0;
};

// A complete episode: obs has one more entry than actions.
struct Episode {
  Point3 goal = Point3::Zero();
  std::vector<ObsRecord> obs;
  std::vector<ActionVec> actions;
  std::vector<Point3> achieved;  // object position after each action
  bool timed_out = false;

  [[nodiscard]] int length() const { return static_cast<int>(actions.size()); }
  void validate() const;
};

// One replay record, original or relabeled.
struct StoredTransition {
  int t = 0;
  Point3 goal = Point3::Zero();
  double reward = 0.0;
  bool terminal = false;  // success under `goal`: no bootstrap
  bool timeout = false;   // last step of a timed-out episode (bootstrapped)
  bool relabeled = false;
  int goal_source = -1;   // achieved-goal index the relabeled goal came from
};

// View of one sampled transition.
struct Transition {
  const ObsRecord* obs = nullptr;
  const ObsRecord* next_obs = nullptr;
  ActionVec action = ActionVec::Zero();
  Point3 goal = Point3::Zero();
  Point3 achieved_goal = Point3::Zero();
  double reward = 0.0;
  bool terminal = false;
  bool timeout = false;
  bool relabeled = false;
};

struct RelabelConfig {
  int k = 4;                      // relabeled copies per transition ("future")
  double visibility_bonus = 0.0;  // added when the detector fires after the step
};

// reward_fn(achieved, goal) in {-1, 0}.
using RewardFn = std::function<double(const Point3&, const Point3&)>;

// Ring buffer of whole episodes with HER "future" relabeling at insertion.
// Capacity counts environment transitions; each carries its k relabeled
// copies. The oldest episodes are evicted whole.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  void store_episode(Episode episode, const RelabelConfig& cfg, const RewardFn& reward_fn,
                     std::mt19937_64& rng);

  // Environment transitions currently held.
  [[nodiscard]] std::size_t size() const { return size_; }
  // Stored records, original plus relabeled.
  [[nodiscard]] std::size_t record_count() const {
    return cumulative_.empty() ? 0 : cumulative_.back();
  }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] std::size_t episode_count() const { return slots_.size(); }

  [[nodiscard]] std::vector<Transition> sample(std::size_t batch, std::mt19937_64& rng) const;

  // Visits every stored transition with its episode.
  void for_each(const std::function<void(const Episode&, const StoredTransition&)>& visit) const;

 private:
  struct Slot {
    std::shared_ptr<const Episode> episode;
    std::vector<StoredTransition> transitions;
  };

  [[nodiscard]] Transition view(const Slot& slot, const StoredTransition& st) const;

  void rebuild_index();

  std::size_t capacity_;
  std::size_t size_ = 0;
  std::deque<Slot> slots_;
  std::vector<std::size_t> cumulative_;  // records up to and including each slot
};

// Consistency check over every stored record: rewards recomputed from the
// achieved goal, terminal flags, and relabeled goals drawn from the same or a
// later step of their own episode.
struct ReplayAudit {
  std::size_t records = 0;
  std::size_t relabeled = 0;
  std::size_t reward_mismatches = 0;
  std::size_t terminal_mismatches = 0;
  std::size_t goal_mismatches = 0;
  std::size_t past_goals = 0;  // relabeled from a step before t

  [[nodiscard]] bool clean() const {
    return reward_mismatches == 0 && terminal_mismatches == 0 && goal_mismatches == 0 &&
           past_goals == 0;
  }
};
ReplayAudit audit_replay(const ReplayBuffer& buffer, const RewardFn& reward_fn,
                         double visibility_bonus);

}  // namespace handeye::rl

#endif  // HANDEYE_RL_REPLAY_HPP_
