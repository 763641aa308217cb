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

#include "handeye/rl/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace handeye::rl {

void Episode::validate() const {
  if (actions.empty()) throw std::invalid_argument("episode has no steps");
  if (obs.size() != actions.size() + 1 || achieved.size() != actions.size()) {
    throw std::invalid_argument("episode arrays are inconsistent");
  }
}

void ReplayBuffer::store_episode(Episode episode, const RelabelConfig& cfg,
                                 const RewardFn& reward_fn, std::mt19937_64& rng) {
  episode.validate();
  if (cfg.k < 0) throw std::invalid_argument("relabel k must be nonnegative");
  const int T = episode.length();
  if (static_cast<std::size_t>(T) > capacity_) {
    throw std::invalid_argument("episode longer than replay capacity");
  }

  Slot slot;
  slot.transitions.reserve(static_cast<std::size_t>(T) * (1 + cfg.k));
  const auto bonus = [&](int t) {
    return episode.obs[static_cast<std::size_t>(t) + 1].detected ? cfg.visibility_bonus : 0.0;
  };
  const auto record = [&](int t, const Point3& goal, bool relabeled, int source) {
    StoredTransition st;
    st.t = t;
    st.goal = goal;
    const double base = reward_fn(episode.achieved[static_cast<std::size_t>(t)], goal);
    st.reward = base + bonus(t);
    st.terminal = base == 0.0;
    st.timeout = episode.timed_out && t == T - 1;
    st.relabeled = relabeled;
    st.goal_source = source;
    slot.transitions.push_back(st);
  };
  for (int t = 0; t < T; ++t) {
    record(t, episode.goal, false, -1);
    std::uniform_int_distribution<int> later(t, T - 1);
    for (int j = 0; j < cfg.k; ++j) {
      const int src = later(rng);
      record(t, episode.achieved[static_cast<std::size_t>(src)], true, src);
    }
  }
  slot.episode = std::make_shared<const Episode>(std::move(episode));

  size_ += static_cast<std::size_t>(T);
  slots_.push_back(std::move(slot));
  while (size_ > capacity_) {
    size_ -= static_cast<std::size_t>(slots_.front().episode->length());
    slots_.pop_front();
  }
  rebuild_index();
}

void ReplayBuffer::rebuild_index() {
  cumulative_.resize(slots_.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    total += slots_[i].transitions.size();
    cumulative_[i] = total;
  }
}

Transition ReplayBuffer::view(const Slot& slot, const StoredTransition& st) const {
  const Episode& ep = *slot.episode;
  const auto t = static_cast<std::size_t>(st.t);
  Transition out;
  out.obs = &ep.obs[t];
  out.next_obs = &ep.obs[t + 1];
  out.action = ep.actions[t];
  out.goal = st.goal;
  out.achieved_goal = ep.achieved[t];
  out.reward = st.reward;
  out.terminal = st.terminal;
  out.timeout = st.timeout;
  out.relabeled = st.relabeled;
  return out;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch, std::mt19937_64& rng) const {
  if (record_count() == 0) throw std::logic_error("sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, record_count() - 1);
  std::vector<Transition> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t r = pick(rng);
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
    const auto s = static_cast<std::size_t>(it - cumulative_.begin());
    const std::size_t before = s == 0 ? 0 : cumulative_[s - 1];
    out.push_back(view(slots_[s], slots_[s].transitions[r - before]));
  }
  return out;
}

void ReplayBuffer::for_each(
    const std::function<void(const Episode&, const StoredTransition&)>& visit) const {
  for (const Slot& slot : slots_) {
    for (const StoredTransition& st : slot.transitions) visit(*slot.episode, st);
  }
}

ReplayAudit audit_replay(const ReplayBuffer& buffer, const RewardFn& reward_fn,
                         double visibility_bonus) {
  ReplayAudit a;
  buffer.for_each([&](const Episode& ep, const StoredTransition& st) {
    ++a.records;
    const Point3& achieved = ep.achieved[static_cast<std::size_t>(st.t)];
    const double base = reward_fn(achieved, st.goal);
    const double bonus = ep.obs[static_cast<std::size_t>(st.t) + 1].detected ? visibility_bonus : 0.0;
    if (std::abs(st.reward - (base + bonus)) > 1e-12) ++a.reward_mismatches;
    if (st.terminal != (base == 0.0)) ++a.terminal_mismatches;
    if (st.relabeled) {
      ++a.relabeled;
      if (st.goal_source < st.t) ++a.past_goals;
      if (st.goal_source < 0 || st.goal_source >= ep.length() ||
          st.goal != ep.achieved[static_cast<std::size_t>(st.goal_source)]) {
        ++a.goal_mismatches;
      }
    } else if (st.goal != ep.goal) {
      ++a.goal_mismatches;
    }
  });
  return a;
}

}  // namespace handeye::rl
