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

#ifndef HANDEYE_NN_PARAM_SET_HPP_
#define HANDEYE_NN_PARAM_SET_HPP_

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace handeye::nn {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Named learnable tensors of one network. Names and shapes are frozen once
// added; non-trainable entries (normalization running statistics) ride
// along for checkpointing and target tracking but receive no updates.
template <typename Scalar>
class ParamSet {
 public:
  struct Entry {
    Mat<Scalar> value;
    bool trainable = true;
  };

  void add(const std::string& name, Mat<Scalar> value, bool trainable = true) {
    if (entries_.contains(name)) {
      throw std::invalid_argument("duplicate parameter " + name);
    }
    entries_.emplace(name, Entry{std::move(value), trainable});
  }

  [[nodiscard]] bool contains(const std::string& name) const {
    return entries_.contains(name);
  }

  [[nodiscard]] const Mat<Scalar>& at(const std::string& name) const {
    return entry(name).value;
  }
  Mat<Scalar>& at(const std::string& name) {
    return const_cast<Entry&>(std::as_const(*this).entry(name)).value;
  }
  [[nodiscard]] bool trainable(const std::string& name) const {
    return entry(name).trainable;
  }

  [[nodiscard]] const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }

  [[nodiscard]] Eigen::Index scalar_count() const {
    Eigen::Index n = 0;
    for (const auto& [_, e] : entries_) n += e.value.size();
    return n;
  }

  [[nodiscard]] ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& [name, e] : entries_) {
      out.add(name, Mat<Scalar>::Zero(e.value.rows(), e.value.cols()), e.trainable);
    }
    return out;
  }

  void set_zero() {
    for (auto& [_, e] : entries_) e.value.setZero();
  }

  [[nodiscard]] bool same_schema(const ParamSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    auto it = other.entries_.begin();
    for (const auto& [name, e] : entries_) {
      if (it->first != name || it->second.value.rows() != e.value.rows() ||
          it->second.value.cols() != e.value.cols() ||
          it->second.trainable != e.trainable) {
        return false;
      }
      ++it;
    }
    return true;
  }

  // FNV-1a over names, shapes and trainability.
  [[nodiscard]] std::uint64_t schema_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    const auto mix = [&h](const std::string& s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
      }
    };
    for (const auto& [name, e] : entries_) {
      mix(name + ":" + std::to_string(e.value.rows()) + "x" +
          std::to_string(e.value.cols()) + (e.trainable ? "t;" : "f;"));
    }
    return h;
  }

  template <typename Other>
  [[nodiscard]] ParamSet<Other> cast() const {
    ParamSet<Other> out;
    for (const auto& [name, e] : entries_) {
      out.add(name, e.value.template cast<Other>(), e.trainable);
    }
    return out;
  }

  // Copies every entry of `this` from `source`, which may hold extra
  // entries. Throws if any entry is missing or shaped differently.
  void load_subset_from(const ParamSet& source) {
    for (auto& [name, e] : entries_) {
      if (!source.contains(name)) {
        throw std::invalid_argument("load: source lacks parameter " + name);
      }
      const Mat<Scalar>& v = source.at(name);
      if (v.rows() != e.value.rows() || v.cols() != e.value.cols()) {
        throw std::invalid_argument("load: shape mismatch for " + name);
      }
      e.value = v;
    }
  }

  [[nodiscard]] bool all_finite() const {
    for (const auto& [_, e] : entries_) {
      if (!e.value.allFinite()) return false;
    }
    return true;
  }

 private:
  [[nodiscard]] const Entry& entry(const std::string& name) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("no parameter " + name);
    return it->second;
  }

  std::map<std::string, Entry> entries_;
};

}  // namespace handeye::nn

#endif  // HANDEYE_NN_PARAM_SET_HPP_
