// pae/nnet.h

// Copyright 2026  The paeattr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Small fully-connected networks: dense layers with ReLU hidden units and a
// softmax head, mean cross-entropy, and Adam. Everything is templated on the
// scalar type; extractors run in float, gradient checks in double.

#ifndef PAE_NNET_H_
#define PAE_NNET_H_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pae/error.h"
#include "pae/util.h"

namespace pae {

enum class Activation { kLinear = 0, kRelu = 1, kSoftmax = 2 };

/// Probabilities are clamped to this floor before taking logs.
inline constexpr double kLogFloor = 1e-12;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Column-wise softmax with max subtraction.
template <typename Derived>
typename Derived::PlainObject Softmax(const Eigen::MatrixBase<Derived> &logits) {
  typename Derived::PlainObject out = logits;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    auto col = out.col(c);
    col.array() -= col.maxCoeff();
    col = col.array().exp().matrix();
    col /= col.sum();
  }
  return out;
}

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weights;  // out x in
  VectorX<Scalar> bias;
  Activation activation = Activation::kLinear;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

/// Per-parameter tensors with the shapes of an Mlp's layers.
template <typename Scalar>
struct MlpTensors {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> bias;
};

template <typename Scalar>
class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(std::vector<DenseLayer<Scalar>> layers)
      : layers_(std::move(layers)) {
    if (layers_.empty()) {
      Fail(ErrorCode::kInvalidArgument, "network needs at least one layer");
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].bias.size() != layers_[i].out_dim()) {
        Fail(ErrorCode::kDimensionMismatch, "bias length != layer width");
      }
      if (i > 0 && layers_[i].in_dim() != layers_[i - 1].out_dim()) {
        Fail(ErrorCode::kDimensionMismatch,
             "layer " + std::to_string(i) + " input does not chain");
      }
      if (layers_[i].activation == Activation::kSoftmax &&
          i + 1 != layers_.size()) {
        Fail(ErrorCode::kInvalidArgument, "softmax is only allowed last");
      }
    }
  }

  /// ReLU hidden layers of the given widths and a softmax head, He-uniform
  /// weights drawn from `rng`, zero biases.
  static Mlp Build(int input_dim, std::span<const int> hidden, int output_dim,
                   Rng &rng) {
    std::vector<int> dims{input_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(output_dim);
    std::vector<DenseLayer<Scalar>> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      DenseLayer<Scalar> layer;
      const double limit = std::sqrt(6.0 / dims[i]);
      std::uniform_real_distribution<double> dist(-limit, limit);
      layer.weights.resize(dims[i + 1], dims[i]);
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
          layer.weights(r, c) = static_cast<Scalar>(dist(rng));
        }
      }
      layer.bias = VectorX<Scalar>::Zero(dims[i + 1]);
      layer.activation =
          i + 2 == dims.size() ? Activation::kSoftmax : Activation::kRelu;
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
  }

  Eigen::Index input_dim() const { return layers_.front().in_dim(); }
  Eigen::Index output_dim() const { return layers_.back().out_dim(); }
  const std::vector<DenseLayer<Scalar>> &layers() const { return layers_; }
  std::vector<DenseLayer<Scalar>> &mutable_layers() { return layers_; }
  bool has_softmax_head() const {
    return layers_.back().activation == Activation::kSoftmax;
  }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto &l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  /// Forward pass on a batch stored one sample per column.
  MatrixX<Scalar> ForwardBatch(const MatrixX<Scalar> &inputs) const {
    if (inputs.rows() != input_dim()) {
      Fail(ErrorCode::kDimensionMismatch,
           "input has dim " + std::to_string(inputs.rows()) + ", network expects " +
               std::to_string(input_dim()));
    }
    MatrixX<Scalar> a = inputs;
    for (const auto &layer : layers_) {
      MatrixX<Scalar> z = layer.weights * a;
      z.colwise() += layer.bias;
      a = Activate(z, layer.activation);
    }
    if (!a.allFinite()) {
      Fail(ErrorCode::kNonFiniteActivation, "non-finite network output");
    }
    return a;
  }

  VectorX<Scalar> Forward(const VectorX<Scalar> &x) const {
    if (!x.allFinite()) {
      Fail(ErrorCode::kNonFiniteValue, "non-finite network input");
    }
    return ForwardBatch(x);
  }

  template <typename Other>
  Mlp<Other> Cast() const {
    std::vector<DenseLayer<Other>> layers;
    for (const auto &l : layers_) {
      layers.push_back({l.weights.template cast<Other>(),
                        l.bias.template cast<Other>(), l.activation});
    }
    return Mlp<Other>(std::move(layers));
  }

  MlpTensors<Scalar> ZerosLike() const {
    MlpTensors<Scalar> t;
    for (const auto &l : layers_) {
      t.weights.push_back(MatrixX<Scalar>::Zero(l.weights.rows(), l.weights.cols()));
      t.bias.push_back(VectorX<Scalar>::Zero(l.bias.size()));
    }
    return t;
  }

  bool operator==(const Mlp &other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto &a = layers_[i];
      const auto &b = other.layers_[i];
      if (a.activation != b.activation || a.weights.rows() != b.weights.rows() ||
          a.weights.cols() != b.weights.cols() || a.weights != b.weights ||
          a.bias != b.bias) {
        return false;
      }
    }
    return true;
  }

  static MatrixX<Scalar> Activate(const MatrixX<Scalar> &z, Activation act) {
    switch (act) {
      case Activation::kRelu: return z.cwiseMax(Scalar(0));
      case Activation::kSoftmax: return Softmax(z);
      case Activation::kLinear: break;
    }
    return z;
  }

 private:
  std::vector<DenseLayer<Scalar>> layers_;
};

/// -log(pred[t]) where t is the hot index of `target`; pred is clamped at
/// kLogFloor so a zero probability gives a large finite loss.
template <typename Scalar>
Scalar CrossEntropy(const VectorX<Scalar> &pred, const VectorX<Scalar> &target) {
  if (pred.size() != target.size()) {
    Fail(ErrorCode::kDimensionMismatch, "prediction and target lengths differ");
  }
  Eigen::Index hot = -1;
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    if (target(i) == Scalar(1) && hot < 0) {
      hot = i;
    } else if (target(i) != Scalar(0)) {
      Fail(ErrorCode::kInvalidArgument, "target is not one-hot");
    }
  }
  if (hot < 0) Fail(ErrorCode::kInvalidArgument, "target is not one-hot");
  return -std::log(std::max(pred(hot), static_cast<Scalar>(kLogFloor)));
}

/// Converts a one-hot matrix (one target per row) to class indices.
std::vector<int> OneHotToIndices(const Eigen::MatrixXf &one_hot);

/// Mean cross-entropy of a softmax-headed network on a batch (one sample
/// per column) and, if `grad` is non-null, its exact gradient. The gradient
/// is that of the unclamped loss, i.e. the usual (softmax - onehot) form.
template <typename Scalar>
Scalar LossAndGradient(const Mlp<Scalar> &model, const MatrixX<Scalar> &inputs,
                       std::span<const int> targets, MlpTensors<Scalar> *grad) {
  const auto &layers = model.layers();
  const Eigen::Index batch = inputs.cols();
  if (!model.has_softmax_head()) {
    Fail(ErrorCode::kInvalidArgument, "training requires a softmax head");
  }
  if (static_cast<std::size_t>(batch) != targets.size()) {
    Fail(ErrorCode::kDimensionMismatch, "targets do not match batch size");
  }
  std::vector<MatrixX<Scalar>> pre;   // z_l
  std::vector<MatrixX<Scalar>> post;  // a_l, post[0] = inputs
  post.push_back(inputs);
  for (const auto &layer : layers) {
    MatrixX<Scalar> z = layer.weights * post.back();
    z.colwise() += layer.bias;
    post.push_back(Mlp<Scalar>::Activate(z, layer.activation));
    pre.push_back(std::move(z));
  }
  const MatrixX<Scalar> &probs = post.back();
  Scalar loss = 0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int t = targets[b];
    if (t < 0 || t >= probs.rows()) {
      Fail(ErrorCode::kInvalidArgument, "target index out of range");
    }
    loss -= std::log(std::max(probs(t, b), static_cast<Scalar>(kLogFloor)));
  }
  loss /= static_cast<Scalar>(batch);
  if (grad == nullptr) return loss;

  *grad = model.ZerosLike();
  MatrixX<Scalar> delta = probs;
  for (Eigen::Index b = 0; b < batch; ++b) delta(targets[b], b) -= Scalar(1);
  delta /= static_cast<Scalar>(batch);
  for (std::size_t i = layers.size(); i-- > 0;) {
    grad->weights[i].noalias() = delta * post[i].transpose();
    grad->bias[i] = delta.rowwise().sum();
    if (i == 0) break;
    MatrixX<Scalar> back = layers[i].weights.transpose() * delta;
    if (layers[i - 1].activation == Activation::kRelu) {
      back.array() *= (pre[i - 1].array() > Scalar(0)).template cast<Scalar>();
    }
    delta = std::move(back);
  }
  return loss;
}

template <typename Scalar>
struct AdamConfig {
  Scalar lr = Scalar(1e-4);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
};

template <typename Scalar>
class AdamState {
 public:
  AdamState(const Mlp<Scalar> &model, AdamConfig<Scalar> config)
      : config_(config), m_(model.ZerosLike()), v_(model.ZerosLike()) {}

  const AdamConfig<Scalar> &config() const { return config_; }
  long step() const { return step_; }

  void Apply(const MlpTensors<Scalar> &grad, Mlp<Scalar> *model) {
    ++step_;
    const Scalar c1 = Scalar(1) - std::pow(config_.beta1, Scalar(step_));
    const Scalar c2 = Scalar(1) - std::pow(config_.beta2, Scalar(step_));
    auto &layers = model->mutable_layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      Update(grad.weights[i], &m_.weights[i], &v_.weights[i],
             &layers[i].weights, c1, c2);
      Update(grad.bias[i], &m_.bias[i], &v_.bias[i], &layers[i].bias, c1, c2);
    }
  }

 private:
  template <typename T>
  void Update(const T &g, T *m, T *v, T *param, Scalar c1, Scalar c2) const {
    *m = config_.beta1 * *m + (Scalar(1) - config_.beta1) * g;
    *v = config_.beta2 * *v + (Scalar(1) - config_.beta2) * g.cwiseAbs2();
    param->array() -= config_.lr * (m->array() / c1) /
                      ((v->array() / c2).sqrt() + config_.eps);
  }

  AdamConfig<Scalar> config_;
  MlpTensors<Scalar> m_, v_;
  long step_ = 0;
};

struct TrainOptions {
  int epochs = 100;
  int batch_size = 256;
  bool keep_snapshots = true;
};

template <typename Scalar>
struct TrainResult {
  Mlp<Scalar> model;
  std::vector<Mlp<Scalar>> snapshots;  // snapshots[k] = parameters after epoch k+1
  std::vector<double> epoch_loss;      // mean training cross-entropy per epoch
};

/// Mini-batch training with per-epoch reshuffling drawn from `rng`.
/// `inputs` holds one sample per column.
template <typename Scalar>
TrainResult<Scalar> Train(Mlp<Scalar> model, const MatrixX<Scalar> &inputs,
                          std::span<const int> targets, AdamState<Scalar> *opt,
                          const TrainOptions &options, Rng &rng) {
  const Eigen::Index n = inputs.cols();
  if (n == 0) Fail(ErrorCode::kEmptyDataset, "no training samples");
  if (options.batch_size < 1) {
    Fail(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  }
  if (static_cast<std::size_t>(n) != targets.size()) {
    Fail(ErrorCode::kDimensionMismatch, "targets do not match sample count");
  }
  TrainResult<Scalar> result;
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  MatrixX<Scalar> batch;
  std::vector<int> batch_targets;
  MlpTensors<Scalar> grad;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (Eigen::Index start = 0; start < n; start += options.batch_size) {
      const Eigen::Index size = std::min<Eigen::Index>(options.batch_size, n - start);
      batch.resize(inputs.rows(), size);
      batch_targets.resize(size);
      for (Eigen::Index k = 0; k < size; ++k) {
        batch.col(k) = inputs.col(order[start + k]);
        batch_targets[k] = targets[order[start + k]];
      }
      const Scalar loss = LossAndGradient(model, batch, batch_targets, &grad);
      if (!std::isfinite(static_cast<double>(loss))) {
        Fail(ErrorCode::kNonFiniteLoss,
             "non-finite loss at epoch " + std::to_string(epoch) +
                 ", batch starting at " + std::to_string(start));
      }
      loss_sum += static_cast<double>(loss) * static_cast<double>(size);
      opt->Apply(grad, &model);
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(n));
    if (options.keep_snapshots) result.snapshots.push_back(model);
  }
  result.model = std::move(model);
  return result;
}

/// Checkpoint: "PAEM", u32 version, u32 layer count, u32 input dim, then per
/// layer (u32 out dim, u32 activation), then all weights (row-major) and
/// biases as little-endian f32, layer by layer.
std::string SerializeMlp(const Mlp<float> &model);
Mlp<float> ParseMlp(std::string_view bytes);
void SaveMlp(const Mlp<float> &model, const std::filesystem::path &path);
Mlp<float> LoadMlp(const std::filesystem::path &path);

}  // namespace pae

#endif  // PAE_NNET_H_
