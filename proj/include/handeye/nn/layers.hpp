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

// Layer set with hand-written reverse-mode rules.
//
// Activations are batched column-wise: a batch of B samples with n features
// is an n x B matrix. Images and feature maps use an HWC layout inside each
// column, so a C-channel map of P pixels views as a C x (P * B) matrix.

#ifndef HANDEYE_NN_LAYERS_HPP_
#define HANDEYE_NN_LAYERS_HPP_

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "handeye/nn/param_set.hpp"

namespace handeye::nn {

enum class Mode { kTrain, kEval };

// Per-layer values kept from the forward pass for backward.
template <typename Scalar>
struct LayerCache {
  Mat<Scalar> x;     // layer input (or im2col columns for conv)
  Mat<Scalar> y;     // layer output where the rule needs it
  Mat<Scalar> xhat;  // normalized activations
  Vec<Scalar> inv_std;
  Mode mode = Mode::kEval;
};

template <typename Scalar>
void shape_check(const Mat<Scalar>& x, Eigen::Index rows, const std::string& who) {
  if (x.rows() != rows) {
    throw std::invalid_argument(who + ": expected " + std::to_string(rows) +
                                " input rows, got " + std::to_string(x.rows()));
  }
}

template <typename Scalar, typename Rng>
Mat<Scalar> fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                           Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Mat<Scalar> w(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = static_cast<Scalar>(u(rng));
  }
  return w;
}

struct Linear {
  std::string name;
  int in = 0;
  int out = 0;

  template <typename Scalar, typename Rng>
  void init(ParamSet<Scalar>& p, Rng& rng) const {
    p.add(name + ".weight", fan_in_uniform<Scalar>(out, in, in, rng));
    p.add(name + ".bias", Mat<Scalar>::Zero(out, 1));
  }

  template <typename Scalar>
  Mat<Scalar> forward(const ParamSet<Scalar>& p, const Mat<Scalar>& x, Mode,
                      LayerCache<Scalar>* cache, ParamSet<Scalar>*) const {
    shape_check(x, in, name);
    if (cache) cache->x = x;
    Mat<Scalar> y = p.at(name + ".weight") * x;
    y.colwise() += p.at(name + ".bias").col(0);
    return y;
  }

  template <typename Scalar>
  Mat<Scalar> backward(const ParamSet<Scalar>& p, const LayerCache<Scalar>& c,
                       const Mat<Scalar>& dy, ParamSet<Scalar>& g, bool need_dx) const {
    g.at(name + ".weight").noalias() += dy * c.x.transpose();
    g.at(name + ".bias") += dy.rowwise().sum();
    if (!need_dx) return {};
    return p.at(name + ".weight").transpose() * dy;
  }
};

// Per-sample normalization over the feature axis, then elementwise affine.
struct LayerNorm {
  std::string name;
  int features = 0;
  double eps = 1e-5;

  template <typename Scalar, typename Rng>
  void init(ParamSet<Scalar>& p, Rng&) const {
    p.add(name + ".gain", Mat<Scalar>::Ones(features, 1));
    p.add(name + ".offset", Mat<Scalar>::Zero(features, 1));
  }

  template <typename Scalar>
  Mat<Scalar> forward(const ParamSet<Scalar>& p, const Mat<Scalar>& x, Mode,
                      LayerCache<Scalar>* cache, ParamSet<Scalar>*) const {
    shape_check(x, features, name);
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean = x.colwise().mean();
    Mat<Scalar> xc = x.rowwise() - mean;
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> var =
        xc.array().square().colwise().mean();
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> inv =
        (var.array() + static_cast<Scalar>(eps)).rsqrt();
    xc.array().rowwise() *= inv.array();
    Mat<Scalar> y = (xc.array().colwise() * p.at(name + ".gain").col(0).array()).matrix();
    y.colwise() += p.at(name + ".offset").col(0);
    if (cache) {
      cache->xhat = std::move(xc);
      cache->inv_std = inv.transpose();
    }
    return y;
  }

  template <typename Scalar>
  Mat<Scalar> backward(const ParamSet<Scalar>& p, const LayerCache<Scalar>& c,
                       const Mat<Scalar>& dy, ParamSet<Scalar>& g, bool need_dx) const {
    g.at(name + ".gain") += (dy.array() * c.xhat.array()).rowwise().sum().matrix();
    g.at(name + ".offset") += dy.rowwise().sum();
    if (!need_dx) return {};
    const Mat<Scalar> dxhat =
        (dy.array().colwise() * p.at(name + ".gain").col(0).array()).matrix();
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> m1 = dxhat.colwise().mean();
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> m2 =
        (dxhat.array() * c.xhat.array()).colwise().mean();
    Mat<Scalar> dx = dxhat.rowwise() - m1;
    dx.array() -= c.xhat.array().rowwise() * m2.array();
    dx.array().rowwise() *= c.inv_std.transpose().array();
    return dx;
  }
};

struct Relu {
  template <typename Scalar, typename Rng>
  void init(ParamSet<Scalar>&, Rng&) const {}

  template <typename Scalar>
  Mat<Scalar> forward(const ParamSet<Scalar>&, const Mat<Scalar>& x, Mode,
                      LayerCache<Scalar>* cache, ParamSet<Scalar>*) const {
    Mat<Scalar> y = x.cwiseMax(Scalar(0));
    if (cache) cache->y = y;
    return y;
  }

  template <typename Scalar>
  Mat<Scalar> backward(const ParamSet<Scalar>&, const LayerCache<Scalar>& c,
                       const Mat<Scalar>& dy, ParamSet<Scalar>&, bool) const {
    return (c.y.array() > Scalar(0)).select(dy, Mat<Scalar>::Zero(dy.rows(), dy.cols()));
  }
};

struct Tanh {
  template <typename Scalar, typename Rng>
  void init(ParamSet<Scalar>&, Rng&) const {}

  template <typename Scalar>
  Mat<Scalar> forward(const ParamSet<Scalar>&, const Mat<Scalar>& x, Mode,
                      LayerCache<Scalar>* cache, ParamSet<Scalar>*) const {
    Mat<Scalar> y = x.array().tanh().matrix();
    if (cache) cache->y = y;
    return y;
  }

  template <typename Scalar>
  Mat<Scalar> backward(const ParamSet<Scalar>&, const LayerCache<Scalar>& c,
                       const Mat<Scalar>& dy, ParamSet<Scalar>&, bool) const {
    return (dy.array() * (Scalar(1) - c.y.array().square())).matrix();
  }
};

// 2D convolution by im2col + GEMM over HWC feature maps.
struct Conv2d {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int in_height = 0;
  int in_width = 0;
  int kernel = 4;
  int stride = 1;
  int pad = 0;

  [[nodiscard]] int out_height() const { return (in_height + 2 * pad - kernel) / stride + 1; }
  [[nodiscard]] int out_width() const { return (in_width + 2 * pad - kernel) / stride + 1; }
  [[nodiscard]] int in_size() const { return in_channels * in_height * in_width; }
  [[nodiscard]] int out_size() const { return out_channels * out_height() * out_width(); }
  [[nodiscard]] int patch() const { return kernel * kernel * in_channels; }

  void validate() const {
    if ((in_height + 2 * pad - kernel) % stride != 0 ||
        (in_width + 2 * pad - kernel) % stride != 0 || out_height() <= 0 ||
        out_width() <= 0) {
      throw std::invalid_argument(name + ": stride does not tile the padded input");
    }
  }

  template <typename Scalar, typename Rng>
  void init(ParamSet<Scalar>& p, Rng& rng) const {
    validate();
    p.add(name + ".weight", fan_in_uniform<Scalar>(out_channels, patch(), patch(), rng));
    p.add(name + ".bias", Mat<Scalar>::Zero(out_channels, 1));
  }

  template <typename Scalar>
  Mat<Scalar> im2col(const Mat<Scalar>& x) const {
    const int ho = out_height();
    const int wo = out_width();
    const Eigen::Index batch = x.cols();
    Mat<Scalar> cols = Mat<Scalar>::Zero(patch(), static_cast<Eigen::Index>(ho) * wo * batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Scalar* src = x.col(b).data();
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          Scalar* dst = cols.col((b * ho + oy) * wo + ox).data();
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= in_height) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= in_width) continue;
              const Scalar* s = src + (static_cast<Eigen::Index>(iy) * in_width + ix) * in_channels;
              Scalar* d = dst + (ky * kernel + kx) * in_channels;
              for (int c = 0; c < in_channels; ++c) d[c] = s[c];
            }
          }
        }
      }
    }
    return cols;
  }

  template <typename Scalar>
  Mat<Scalar> col2im(const Mat<Scalar>& dcols, Eigen::Index batch) const {
    const int ho = out_height();
    const int wo = out_width();
    Mat<Scalar> dx = Mat<Scalar>::Zero(in_size(), batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      Scalar* dst = dx.col(b).data();
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          const Scalar* src = dcols.col((b * ho + oy) * wo + ox).data();
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= in_height) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= in_width) continue;
              Scalar* d = dst + (static_cast<Eigen::Index>(iy) * in_width + ix) * in_channels;
              const Scalar* s = src + (ky * kernel + kx) * in_channels;
              for (int c = 0; c < in_channels; ++c) d[c] += s[c];
            }
          }
        }
      }
    }
    return dx;
  }

  template <typename Scalar>
  Mat<Scalar> forward(const ParamSet<Scalar>& p, const Mat<Scalar>& x, Mode,
                      LayerCache<Scalar>* cache, ParamSet<Scalar>*) const {
    shape_check(x, in_size(), name);
    Mat<Scalar> cols = im2col(x);
    Mat<Scalar> y = p.at(name + ".weight") * cols;
    y.colwise() += p.at(name + ".bias").col(0);
    if (cache) cache->x = std::move(cols);
    return Eigen::Map<Mat<Scalar>>(y.data(), out_size(), x.cols());
  }

  template <typename Scalar>
  Mat<Scalar> backward(const ParamSet<Scalar>& p, const LayerCache<Scalar>& c,
                       const Mat<Scalar>& dy, ParamSet<Scalar>& g, bool need_dx) const {
    const Eigen::Index batch = dy.cols();
    const Eigen::Map<const Mat<Scalar>> dmap(
        dy.data(), out_channels, static_cast<Eigen::Index>(out_height()) * out_width() * batch);
    g.at(name + ".weight").noalias() += dmap * c.x.transpose();
    g.at(name + ".bias") += dmap.rowwise().sum();
    if (!need_dx) return {};
    const Mat<Scalar> dcols = p.at(name + ".weight").transpose() * dmap;
    return col2im(dcols, batch);
  }
};

// Per-channel normalization over batch and spatial positions. Train mode
// uses batch statistics and, when a sink is given, folds them into the
// running statistics; eval mode uses the running statistics.
struct BatchNorm2d {
  std::string name;
  int channels = 0;
  int spatial = 1;  // pixels per channel
  double momentum = 0.99;
  double eps = 1e-5;

  template <typename Scalar, typename Rng>
  void init(ParamSet<Scalar>& p, Rng&) const {
    p.add(name + ".gain", Mat<Scalar>::Ones(channels, 1));
    p.add(name + ".offset", Mat<Scalar>::Zero(channels, 1));
    p.add(name + ".running_mean", Mat<Scalar>::Zero(channels, 1), false);
    p.add(name + ".running_var", Mat<Scalar>::Ones(channels, 1), false);
  }

  template <typename Scalar>
  Mat<Scalar> forward(const ParamSet<Scalar>& p, const Mat<Scalar>& x, Mode mode,
                      LayerCache<Scalar>* cache, ParamSet<Scalar>* stats_sink) const {
    shape_check(x, static_cast<Eigen::Index>(channels) * spatial, name);
    const Eigen::Index n = static_cast<Eigen::Index>(spatial) * x.cols();
    const Eigen::Map<const Mat<Scalar>> xm(x.data(), channels, n);
    Vec<Scalar> mean;
    Vec<Scalar> var;
    if (mode == Mode::kTrain) {
      mean = xm.rowwise().mean();
      var = (xm.colwise() - mean).array().square().rowwise().mean().matrix();
      if (stats_sink) {
        const Scalar m = static_cast<Scalar>(momentum);
        const Scalar unbias = n > 1 ? Scalar(n) / Scalar(n - 1) : Scalar(1);
        Mat<Scalar>& rm = stats_sink->at(name + ".running_mean");
        Mat<Scalar>& rv = stats_sink->at(name + ".running_var");
        rm = m * rm + (Scalar(1) - m) * mean;
        rv = m * rv + (Scalar(1) - m) * unbias * var;
      }
    } else {
      mean = p.at(name + ".running_mean").col(0);
      var = p.at(name + ".running_var").col(0);
    }
    const Vec<Scalar> inv = (var.array() + static_cast<Scalar>(eps)).rsqrt().matrix();
    Mat<Scalar> xhat = ((xm.colwise() - mean).array().colwise() * inv.array()).matrix();
    Mat<Scalar> y =
        (xhat.array().colwise() * p.at(name + ".gain").col(0).array()).matrix();
    y.colwise() += p.at(name + ".offset").col(0);
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = inv;
      cache->mode = mode;
    }
    return Eigen::Map<Mat<Scalar>>(y.data(), x.rows(), x.cols());
  }

  template <typename Scalar>
  Mat<Scalar> backward(const ParamSet<Scalar>& p, const LayerCache<Scalar>& c,
                       const Mat<Scalar>& dy, ParamSet<Scalar>& g, bool need_dx) const {
    const Eigen::Index n = static_cast<Eigen::Index>(spatial) * dy.cols();
    const Eigen::Map<const Mat<Scalar>> dm(dy.data(), channels, n);
    g.at(name + ".gain") += (dm.array() * c.xhat.array()).rowwise().sum().matrix();
    g.at(name + ".offset") += dm.rowwise().sum();
    if (!need_dx) return {};
    const Mat<Scalar> dxhat =
        (dm.array().colwise() * p.at(name + ".gain").col(0).array()).matrix();
    Mat<Scalar> dx;
    if (c.mode == Mode::kTrain) {
      const Vec<Scalar> m1 = dxhat.rowwise().mean();
      const Vec<Scalar> m2 = (dxhat.array() * c.xhat.array()).rowwise().mean().matrix();
      dx = dxhat.colwise() - m1;
      dx.array() -= c.xhat.array().colwise() * m2.array();
      dx.array().colwise() *= c.inv_std.array();
    } else {
      dx = (dxhat.array().colwise() * c.inv_std.array()).matrix();
    }
    return Eigen::Map<Mat<Scalar>>(dx.data(), dy.rows(), dy.cols());
  }
};

struct GlobalAvgPool {
  int channels = 0;
  int spatial = 1;

  template <typename Scalar, typename Rng>
  void init(ParamSet<Scalar>&, Rng&) const {}

  template <typename Scalar>
  Mat<Scalar> forward(const ParamSet<Scalar>&, const Mat<Scalar>& x, Mode,
                      LayerCache<Scalar>*, ParamSet<Scalar>*) const {
    shape_check(x, static_cast<Eigen::Index>(channels) * spatial, "global_avg_pool");
    Mat<Scalar> y(channels, x.cols());
    for (Eigen::Index b = 0; b < x.cols(); ++b) {
      const Eigen::Map<const Mat<Scalar>> m(x.col(b).data(), channels, spatial);
      y.col(b) = m.rowwise().mean();
    }
    return y;
  }

  template <typename Scalar>
  Mat<Scalar> backward(const ParamSet<Scalar>&, const LayerCache<Scalar>&,
                       const Mat<Scalar>& dy, ParamSet<Scalar>&, bool) const {
    Mat<Scalar> dx(static_cast<Eigen::Index>(channels) * spatial, dy.cols());
    const Scalar scale = Scalar(1) / Scalar(spatial);
    for (Eigen::Index b = 0; b < dy.cols(); ++b) {
      Eigen::Map<Mat<Scalar>> m(dx.col(b).data(), channels, spatial);
      m = (dy.col(b) * scale).replicate(1, spatial);
    }
    return dx;
  }
};

using Layer = std::variant<Linear, LayerNorm, Relu, Tanh, Conv2d, BatchNorm2d, GlobalAvgPool>;

template <typename Scalar>
using Tape = std::vector<LayerCache<Scalar>>;

// Chain of layers sharing one ParamSet.
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<Layer> layers) : layers_(std::move(layers)) {}

  void push(Layer layer) { layers_.push_back(std::move(layer)); }
  [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }

  template <typename Scalar, typename Rng>
  void init(ParamSet<Scalar>& p, Rng& rng) const {
    for (const Layer& l : layers_) {
      std::visit([&](const auto& layer) { layer.init(p, rng); }, l);
    }
  }

  // `tape` may be null for inference; `stats_sink` receives batch-norm
  // running-statistic updates in train mode.
  template <typename Scalar>
  Mat<Scalar> forward(const ParamSet<Scalar>& p, const Mat<Scalar>& x, Mode mode,
                      std::type_identity_t<Tape<Scalar>>* tape,
                      std::type_identity_t<ParamSet<Scalar>>* stats_sink = nullptr) const {
    if (tape) tape->assign(layers_.size(), LayerCache<Scalar>{});
    Mat<Scalar> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      LayerCache<Scalar>* c = tape ? &(*tape)[i] : nullptr;
      h = std::visit(
          [&](const auto& layer) { return layer.forward(p, h, mode, c, stats_sink); },
          layers_[i]);
    }
    return h;
  }

  // Accumulates parameter gradients into `g`; returns d(input) when asked.
  template <typename Scalar>
  Mat<Scalar> backward(const ParamSet<Scalar>& p, const Tape<Scalar>& tape,
                       const Mat<Scalar>& dy, ParamSet<Scalar>& g,
                       bool need_input_grad = true) const {
    if (tape.size() != layers_.size()) {
      throw std::invalid_argument("backward: tape does not match this network");
    }
    Mat<Scalar> d = dy;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const bool need_dx = k > 0 || need_input_grad;
      d = std::visit(
          [&](const auto& layer) { return layer.backward(p, tape[k], d, g, need_dx); },
          layers_[k]);
    }
    return d;
  }

 private:
  std::vector<Layer> layers_;
};

}  // namespace handeye::nn

#endif  // HANDEYE_NN_LAYERS_HPP_
