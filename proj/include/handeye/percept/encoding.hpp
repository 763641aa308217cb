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

#ifndef HANDEYE_PERCEPT_ENCODING_HPP_
#define HANDEYE_PERCEPT_ENCODING_HPP_

#include <string>

#include <Eigen/Core>

namespace handeye::percept {

enum class Layout { kObjectCentric, kAbsolute };

Layout parse_layout(const std::string& name);
std::string to_string(Layout layout);

// (state, goal) pair fed to the actor and critic.
//   object-centric: ([f; h - o], g - o)
//   absolute:       ([f; o, h], g)
struct StateEncoding {
  Layout layout = Layout::kObjectCentric;
  Eigen::VectorXd image_embedding;
  Eigen::Vector3d relative_gripper = Eigen::Vector3d::Zero();
  Eigen::Vector3d relative_goal = Eigen::Vector3d::Zero();
  Eigen::Vector3d object = Eigen::Vector3d::Zero();
  Eigen::Vector3d gripper = Eigen::Vector3d::Zero();
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();

  // Location features without the embedding, state part then goal part.
  [[nodiscard]] Eigen::VectorXd locations() const;
  [[nodiscard]] Eigen::VectorXd state_vector() const;
  [[nodiscard]] Eigen::Vector3d goal_vector() const;
};

[[nodiscard]] inline int location_dim(Layout layout) {
  return layout == Layout::kObjectCentric ? 6 : 9;
}

// Throws std::invalid_argument on non-finite inputs.
StateEncoding encode(const Eigen::VectorXd& image_embedding, const Eigen::Vector3d& object_estimate,
                     const Eigen::Vector3d& gripper, const Eigen::Vector3d& goal, Layout layout);

}  // namespace handeye::percept

#endif  // HANDEYE_PERCEPT_ENCODING_HPP_
