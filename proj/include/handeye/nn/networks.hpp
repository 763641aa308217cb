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

#ifndef HANDEYE_NN_NETWORKS_HPP_
#define HANDEYE_NN_NETWORKS_HPP_

#include <map>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "handeye/nn/layers.hpp"
#include "handeye/nn/param_set.hpp"

namespace handeye::nn {

template <typename Scalar>
using Blocks = std::map<std::string, Mat<Scalar>>;

struct CNNSpec {
  int image_size = 64;
  int in_channels = 3;
  std::vector<int> channels = {16, 32, 64};
  std::vector<int> strides = {2, 2, 4};
  int kernel = 4;
  int embedding = 64;
  double bn_momentum = 0.99;
};

struct MLPSpec {
  std::vector<int> hidden = {64, 64};
};

// conv -> batch norm -> relu per stage, then global average pooling and a
// linear embedding. Stride-2 stages pad by 1, larger strides do not pad.
inline Sequential make_encoder(const std::string& prefix, const CNNSpec& spec) {
  if (spec.channels.size() != spec.strides.size() || spec.channels.empty()) {
    throw std::invalid_argument("encoder: channels and strides must pair up");
  }
  Sequential net;
  int size = spec.image_size;
  int in_c = spec.in_channels;
  for (std::size_t i = 0; i < spec.channels.size(); ++i) {
    Conv2d conv;
    conv.name = prefix + ".conv" + std::to_string(i);
    conv.in_channels = in_c;
    conv.out_channels = spec.channels[i];
    conv.in_height = size;
    conv.in_width = size;
    conv.kernel = spec.kernel;
    conv.stride = spec.strides[i];
    conv.pad = spec.strides[i] == 2 ? (spec.kernel - 2) / 2 : 0;
    conv.validate();
    size = conv.out_height();
    in_c = conv.out_channels;
    net.push(conv);
    net.push(BatchNorm2d{prefix + ".bn" + std::to_string(i), in_c, size * size,
                         spec.bn_momentum});
    net.push(Relu{});
  }
  net.push(GlobalAvgPool{in_c, size * size});
  net.push(Linear{prefix + ".embed", in_c, spec.embedding});
  return net;
}

// Hidden blocks are linear -> layer norm -> relu.
inline void push_hidden(Sequential& net, const std::string& prefix, int in,
                        const std::vector<int>& hidden, std::size_t first_index = 0) {
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    const std::string n = prefix + ".fc" + std::to_string(first_index + i);
    net.push(Linear{n, in, hidden[i]});
    net.push(LayerNorm{n + ".ln", hidden[i]});
    net.push(Relu{});
    in = hidden[i];
  }
}

template <typename Scalar>
Mat<Scalar> stack_blocks(const Blocks<Scalar>& blocks, const std::vector<std::string>& names) {
  Eigen::Index rows = 0;
  Eigen::Index cols = -1;
  for (const std::string& n : names) {
    const auto it = blocks.find(n);
    if (it == blocks.end()) throw std::invalid_argument("missing input block " + n);
    if (cols >= 0 && it->second.cols() != cols) {
      throw std::invalid_argument("input blocks disagree on batch size");
    }
    cols = it->second.cols();
    rows += it->second.rows();
  }
  Mat<Scalar> out(rows, cols < 0 ? 0 : cols);
  Eigen::Index r = 0;
  for (const std::string& n : names) {
    const Mat<Scalar>& b = blocks.at(n);
    out.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return out;
}

template <typename Scalar>
void scatter_blocks(const Mat<Scalar>& d, const std::vector<std::string>& names,
                    const std::map<std::string, int>& dims, Blocks<Scalar>& out) {
  Eigen::Index r = 0;
  for (const std::string& n : names) {
    const int rows = dims.at(n);
    auto it = out.find(n);
    if (it == out.end()) {
      out.emplace(n, d.middleRows(r, rows));
    } else {
      it->second += d.middleRows(r, rows);
    }
    r += rows;
  }
}

struct TrunkSpec {
  std::string name;
  std::vector<std::string> inputs;
  int out = 2;
};

// One or more tanh-headed trunks, each reading its own subset of named input
// blocks; outputs are stacked in trunk order.
class ActorNet {
 public:
  template <typename Scalar>
  struct Cache {
    std::vector<Tape<Scalar>> tapes;
  };

  ActorNet() = default;
  ActorNet(std::string prefix, std::vector<TrunkSpec> trunks,
           std::map<std::string, int> block_dims, const MLPSpec& mlp)
      : trunks_(std::move(trunks)), dims_(std::move(block_dims)) {
    for (const TrunkSpec& t : trunks_) {
      int in = 0;
      for (const std::string& b : t.inputs) in += dims_.at(b);
      Sequential net;
      push_hidden(net, prefix + "." + t.name, in, mlp.hidden);
      const int last = mlp.hidden.empty() ? in : mlp.hidden.back();
      net.push(Linear{prefix + "." + t.name + ".head", last, t.out});
      net.push(Tanh{});
      nets_.push_back(std::move(net));
      output_dim_ += t.out;
    }
  }

  [[nodiscard]] int output_dim() const { return output_dim_; }
  [[nodiscard]] const std::vector<TrunkSpec>& trunks() const { return trunks_; }

  template <typename Scalar, typename Rng>
  void init(ParamSet<Scalar>& p, Rng& rng) const {
    for (const Sequential& n : nets_) n.init(p, rng);
  }

  template <typename Scalar>
  Mat<Scalar> forward(const ParamSet<Scalar>& p, const Blocks<Scalar>& blocks, Mode mode,
                      std::type_identity_t<Cache<Scalar>>* cache) const {
    std::vector<Mat<Scalar>> outs;
    if (cache) cache->tapes.assign(nets_.size(), {});
    Eigen::Index batch = 0;
    for (std::size_t i = 0; i < nets_.size(); ++i) {
      const Mat<Scalar> x = stack_blocks(blocks, trunks_[i].inputs);
      outs.push_back(nets_[i].forward(p, x, mode, cache ? &cache->tapes[i] : nullptr));
      batch = x.cols();
    }
    Mat<Scalar> y(output_dim_, batch);
    Eigen::Index r = 0;
    for (const Mat<Scalar>& o : outs) {
      y.middleRows(r, o.rows()) = o;
      r += o.rows();
    }
    return y;
  }

  template <typename Scalar>
  void backward(const ParamSet<Scalar>& p, const Cache<Scalar>& cache, const Mat<Scalar>& dy,
                ParamSet<Scalar>& g,
                std::type_identity_t<Blocks<Scalar>>* dblocks = nullptr) const {
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < nets_.size(); ++i) {
      const int out = trunks_[i].out;
      const Mat<Scalar> dx =
          nets_[i].backward(p, cache.tapes[i], Mat<Scalar>(dy.middleRows(r, out)), g,
                            dblocks != nullptr);
      if (dblocks) scatter_blocks(dx, trunks_[i].inputs, dims_, *dblocks);
      r += out;
    }
  }

 private:
  std::vector<TrunkSpec> trunks_;
  std::map<std::string, int> dims_;
  std::vector<Sequential> nets_;
  int output_dim_ = 0;
};

// Scalar action-value: one hidden block on the state, then the action is
// concatenated and the rest of the hidden blocks feed a linear head.
class CriticNet {
 public:
  template <typename Scalar>
  struct Cache {
    Tape<Scalar> pre;
    Tape<Scalar> post;
    Eigen::Index pre_rows = 0;
  };

  CriticNet() = default;
  CriticNet(std::string prefix, std::vector<std::string> state_inputs,
            std::map<std::string, int> block_dims, int action_dim, const MLPSpec& mlp)
      : inputs_(std::move(state_inputs)), dims_(std::move(block_dims)), action_dim_(action_dim) {
    if (mlp.hidden.empty()) throw std::invalid_argument("critic needs a hidden layer");
    int in = 0;
    for (const std::string& b : inputs_) in += dims_.at(b);
    push_hidden(pre_, prefix, in, {mlp.hidden.front()});
    const std::vector<int> rest(mlp.hidden.begin() + 1, mlp.hidden.end());
    push_hidden(post_, prefix, mlp.hidden.front() + action_dim, rest, 1);
    const int last = rest.empty() ? mlp.hidden.front() + action_dim : rest.back();
    post_.push(Linear{prefix + ".head", last, 1});
  }

  [[nodiscard]] int action_dim() const { return action_dim_; }

  template <typename Scalar, typename Rng>
  void init(ParamSet<Scalar>& p, Rng& rng) const {
    pre_.init(p, rng);
    post_.init(p, rng);
  }

  template <typename Scalar>
  Mat<Scalar> forward(const ParamSet<Scalar>& p, const Blocks<Scalar>& blocks,
                      const Mat<Scalar>& action, Mode mode,
                      std::type_identity_t<Cache<Scalar>>* cache) const {
    if (action.rows() != action_dim_) {
      throw std::invalid_argument("critic: action has " + std::to_string(action.rows()) +
                                  " rows, expected " + std::to_string(action_dim_));
    }
    const Mat<Scalar> x = stack_blocks(blocks, inputs_);
    const Mat<Scalar> h = pre_.forward(p, x, mode, cache ? &cache->pre : nullptr);
    Mat<Scalar> z(h.rows() + action.rows(), h.cols());
    z << h, action;
    if (cache) cache->pre_rows = h.rows();
    return post_.forward(p, z, mode, cache ? &cache->post : nullptr);
  }

  // Parameter gradients accumulate into `g`; `daction` and `dblocks`, when
  // given, receive input gradients.
  template <typename Scalar>
  void backward(const ParamSet<Scalar>& p, const Cache<Scalar>& cache, const Mat<Scalar>& dq,
                ParamSet<Scalar>& g, std::type_identity_t<Mat<Scalar>>* daction = nullptr,
                std::type_identity_t<Blocks<Scalar>>* dblocks = nullptr) const {
    const Mat<Scalar> dz = post_.backward(p, cache.post, dq, g, true);
    if (daction) *daction = dz.bottomRows(action_dim_);
    const Mat<Scalar> dh = dz.topRows(cache.pre_rows);
    const Mat<Scalar> dx = pre_.backward(p, cache.pre, dh, g, dblocks != nullptr);
    if (dblocks) scatter_blocks(dx, inputs_, dims_, *dblocks);
  }

 private:
  std::vector<std::string> inputs_;
  std::map<std::string, int> dims_;
  int action_dim_ = 0;
  Sequential pre_;
  Sequential post_;
};

}  // namespace handeye::nn

#endif  // HANDEYE_NN_NETWORKS_HPP_
