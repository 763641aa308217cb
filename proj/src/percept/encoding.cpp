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

#include "handeye/percept/encoding.hpp"

#include <stdexcept>

namespace handeye::percept {

Layout parse_layout(const std::string& name) {
  if (name == "object_centric") return Layout::kObjectCentric;
  if (name == "absolute") return Layout::kAbsolute;
  throw std::invalid_argument("unknown encoding layout '" + name + "'");
}

std::string to_string(Layout layout) {
  return layout == Layout::kObjectCentric ? "object_centric" : "absolute";
}

Eigen::VectorXd StateEncoding::locations() const {
  Eigen::VectorXd out(location_dim(layout));
  if (layout == Layout::kObjectCentric) {
    out << relative_gripper, relative_goal;
  } else {
    out << object, gripper, goal;
  }
  return out;
}

Eigen::VectorXd StateEncoding::state_vector() const {
  Eigen::VectorXd out(image_embedding.size() + (layout == Layout::kObjectCentric ? 3 : 6));
  if (layout == Layout::kObjectCentric) {
    out << image_embedding, relative_gripper;
  } else {
    out << image_embedding, object, gripper;
  }
  return out;
}

Eigen::Vector3d StateEncoding::goal_vector() const {
  return layout == Layout::kObjectCentric ? relative_goal : goal;
}

StateEncoding encode(const Eigen::VectorXd& image_embedding, const Eigen::Vector3d& object_estimate,
                     const Eigen::Vector3d& gripper, const Eigen::Vector3d& goal, Layout layout) {
  if (!image_embedding.allFinite() || !object_estimate.allFinite() || !gripper.allFinite() ||
      !goal.allFinite()) {
    throw std::invalid_argument("encode: non-finite input");
  }
  StateEncoding e;
  e.layout = layout;
  e.image_embedding = image_embedding;
  if (layout == Layout::kObjectCentric) {
    e.relative_gripper = gripper - object_estimate;
    e.relative_goal = goal - object_estimate;
  } else {
    e.object = object_estimate;
    e.gripper = gripper;
    e.goal = goal;
  }
  return e;
}

}  // namespace handeye::percept
