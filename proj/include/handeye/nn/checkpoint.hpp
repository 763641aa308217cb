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

#ifndef HANDEYE_NN_CHECKPOINT_HPP_
#define HANDEYE_NN_CHECKPOINT_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "handeye/nn/optim.hpp"
#include "handeye/nn/param_set.hpp"

namespace handeye::nn {

// Binary container, host byte order:
//   "HNDEYECK" | u32 version | u64 schema hash | metadata | nets | optimizers | rng
// Strings are u32 length + bytes. Each tensor is name, u8 trainable,
// i64 rows, i64 cols, rows*cols f64 values in column-major order.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> metadata;
  std::map<std::string, ParamSet<double>> nets;
  std::map<std::string, AdamState<double>> optimizers;
  std::string rng_state;

  // Names and shapes of every network and optimizer slot.
  [[nodiscard]] std::uint64_t schema_hash() const;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

// Throws CheckpointError on unreadable files, bad magic/version, corrupted
// payloads, or when `expected_schema` is given and does not match.
Checkpoint load_checkpoint(const std::string& path,
                           std::optional<std::uint64_t> expected_schema = std::nullopt);

}  // namespace handeye::nn

#endif  // HANDEYE_NN_CHECKPOINT_HPP_
