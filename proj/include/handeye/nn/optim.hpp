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

#ifndef HANDEYE_NN_OPTIM_HPP_
#define HANDEYE_NN_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "handeye/nn/param_set.hpp"

namespace handeye::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  ParamSet<Scalar> m;
  ParamSet<Scalar> v;
  std::int64_t step = 0;

  static AdamState for_params(const ParamSet<Scalar>& p) {
    return AdamState{p.zeros_like(), p.zeros_like(), 0};
  }
};

// Bias-corrected adaptive-moment update of the trainable entries.
template <typename Scalar>
void adam_step(ParamSet<Scalar>& params, const ParamSet<Scalar>& grads,
               AdamState<Scalar>& state, const AdamConfig& cfg) {
  if (!params.same_schema(grads) || !params.same_schema(state.m)) {
    throw std::invalid_argument("adam_step: schema mismatch");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const Scalar step_size = static_cast<Scalar>(cfg.lr * std::sqrt(c2) / c1);
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar eps = static_cast<Scalar>(cfg.eps * std::sqrt(c2));
  auto g_it = grads.entries().begin();
  auto m_it = state.m.entries().begin();
  auto v_it = state.v.entries().begin();
  for (auto& [name, e] : params.entries()) {
    if (e.trainable) {
      const auto& g = g_it->second.value.array();
      auto m = m_it->second.value.array();
      auto v = v_it->second.value.array();
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.square();
      e.value.array() -= step_size * m / (v.sqrt() + eps);
    }
    ++g_it;
    ++m_it;
    ++v_it;
  }
}

// target <- tau * target + (1 - tau) * online, every entry.
template <typename Scalar>
void polyak_update(ParamSet<Scalar>& target, const ParamSet<Scalar>& online, double tau) {
  if (!target.same_schema(online)) {
    throw std::invalid_argument("polyak_update: schema mismatch");
  }
  const Scalar t = static_cast<Scalar>(tau);
  auto o_it = online.entries().begin();
  for (auto& [_, e] : target.entries()) {
    e.value = t * e.value + (Scalar(1) - t) * o_it->second.value;
    ++o_it;
  }
}

}  // namespace handeye::nn

#endif  // HANDEYE_NN_OPTIM_HPP_
