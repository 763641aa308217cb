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

#ifndef HANDEYE_NN_GRADCHECK_HPP_
#define HANDEYE_NN_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "handeye/nn/param_set.hpp"

namespace handeye::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "tensor[index]" of the worst entry
  int checked = 0;
  int kinks = 0;  // entries skipped because the difference straddled a kink

  void merge(const GradCheckResult& o) {
    if (o.max_rel_error > max_rel_error) {
      max_rel_error = o.max_rel_error;
      worst = o.worst;
    }
    checked += o.checked;
    kinks += o.kinks;
  }
};

// |a - n| / max(|a|, |n|, floor); the floor keeps vanishing gradients from
// turning round-off into large ratios.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of `loss(params)` against `analytic` for trainable
// entries. With `max_per_tensor` > 0 a random subset of each tensor is checked.
//
// With `skip_kinks`, each entry is also differenced at half the step. On a
// smooth loss the two estimates differ by O(step^2), about 1e-10 here, and
// the analytic gradient plays no part in that comparison. A gap above 1e-5
// therefore means a ReLU kink was crossed; the entry is counted in `kinks`
// instead of being scored.
template <typename LossFn>
GradCheckResult check_param_gradients(ParamSet<double>& params, const ParamSet<double>& analytic,
                                      LossFn&& loss, double step = 1e-5, int max_per_tensor = -1,
                                      std::uint64_t subset_seed = 0, double floor = 1e-6,
                                      bool skip_kinks = false) {
  GradCheckResult r;
  std::mt19937_64 rng(subset_seed);
  for (auto& [name, e] : params.entries()) {
    if (!e.trainable) continue;
    Mat<double>& w = e.value;
    const Mat<double>& g = analytic.at(name);
    const Eigen::Index n = w.size();
    const bool subset = max_per_tensor > 0 && n > max_per_tensor;
    const Eigen::Index count = subset ? max_per_tensor : n;
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (Eigen::Index k = 0; k < count; ++k) {
      const Eigen::Index i = subset ? pick(rng) : k;
      const double keep = w.data()[i];
      const auto central = [&](double h) {
        w.data()[i] = keep + h;
        const double up = loss(params);
        w.data()[i] = keep - h;
        const double down = loss(params);
        w.data()[i] = keep;
        return (up - down) / (2.0 * h);
      };
      const double numeric = central(step);
      const auto straddles = [&] {
        const double half = central(0.5 * step);
        // 1e-8 absolute covers round-off in the differences themselves.
        return std::abs(numeric - half) > 1e-5 * std::max(std::abs(numeric), std::abs(half)) + 1e-8;
      };
      if (skip_kinks && straddles()) {
        ++r.kinks;
        continue;
      }
      const double err = relative_error(g.data()[i], numeric, floor);
      ++r.checked;
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

// Same check for an input matrix.
template <typename LossFn>
GradCheckResult check_input_gradient(Mat<double> x, const Mat<double>& analytic, LossFn&& loss,
                                     double step = 1e-5, double floor = 1e-6) {
  GradCheckResult r;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + step;
    const double up = loss(x);
    x.data()[i] = keep - step;
    const double down = loss(x);
    x.data()[i] = keep;
    const double err = relative_error(analytic.data()[i], (up - down) / (2.0 * step), floor);
    ++r.checked;
    if (err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst = "input[" + std::to_string(i) + "]";
    }
  }
  return r;
}

}  // namespace handeye::nn

#endif  // HANDEYE_NN_GRADCHECK_HPP_
