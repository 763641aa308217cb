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

#include "handeye/rl/variant.hpp"

#include <array>
#include <stdexcept>
#include <utility>

namespace handeye::rl {
namespace {

constexpr std::array<std::pair<PolicyVariant, const char*>, 5> kNames = {{
    {PolicyVariant::kCamStatic, "cam-static"},
    {PolicyVariant::kCamStaticImage, "cam-static-image"},
    {PolicyVariant::kCamActiveFull, "cam-active-full"},
    {PolicyVariant::kCamActiveAbstr, "cam-active-abstr"},
    {PolicyVariant::kCamRandom, "cam-random"},
}};

}  // namespace

PolicyVariant parse_variant(const std::string& name) {
  for (const auto& [v, n] : kNames) {
    if (name == n) return v;
  }
  throw std::invalid_argument("unknown policy variant '" + name + "'");
}

std::string to_string(PolicyVariant v) {
  for (const auto& [k, n] : kNames) {
    if (k == v) return n;
  }
  return "unknown";
}

CameraOverride parse_camera_override(const std::string& name) {
  if (name == "learned") return CameraOverride::kLearned;
  if (name == "ignored") return CameraOverride::kIgnored;
  throw std::invalid_argument("unknown camera override '" + name + "'");
}

std::string to_string(CameraOverride o) {
  return o == CameraOverride::kLearned ? "learned" : "ignored";
}

}  // namespace handeye::rl
