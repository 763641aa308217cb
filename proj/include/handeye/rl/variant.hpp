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

#ifndef HANDEYE_RL_VARIANT_HPP_
#define HANDEYE_RL_VARIANT_HPP_

#include <string>

namespace handeye::rl {

enum class PolicyVariant {
  kCamStatic,       // gripper actor on [f; locations], camera fixed
  kCamStaticImage,  // gripper actor on [f; h, g], no object estimate
  kCamActiveFull,   // gripper and camera actors both on [f; locations]
  kCamActiveAbstr,  // gripper actor on locations only, camera actor on [f; locations]
  kCamRandom,       // abstracted gripper actor, camera uniform over its range
};

PolicyVariant parse_variant(const std::string& name);
std::string to_string(PolicyVariant v);

// Whether the actor owns a camera trunk.
inline bool has_camera_trunk(PolicyVariant v) {
  return v == PolicyVariant::kCamActiveFull || v == PolicyVariant::kCamActiveAbstr;
}
// Whether the critic sees camera actions.
inline bool critic_sees_camera(PolicyVariant v) {
  return v != PolicyVariant::kCamStatic && v != PolicyVariant::kCamStaticImage;
}

// Per-stage camera handling: `kIgnored` keeps the camera at its origin and
// trains the hand policy only.
enum class CameraOverride { kLearned, kIgnored };

CameraOverride parse_camera_override(const std::string& name);
std::string to_string(CameraOverride o);

}  // namespace handeye::rl

#endif  // HANDEYE_RL_VARIANT_HPP_
