// Copyright 2026 The p2pfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "p2pfl/dataset.hpp"
#include "p2pfl/errors.hpp"
#include "p2pfl/param_vector.hpp"
#include "p2pfl/privacy.hpp"
#include "p2pfl/seed.hpp"

namespace p2pfl {

enum class Activation { kRelu, kTanh };

struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 0;
  Activation activation = Activation::kRelu;

  void validate() const {
    if (input_dim == 0) throw InvalidArgument("MlpSpec: input_dim must be > 0");
    if (output_dim < 2) throw InvalidArgument("MlpSpec: output_dim must be >= 2");
    for (std::size_t h : hidden_dims) {
      if (h == 0) throw InvalidArgument("MlpSpec: hidden layer of width 0");
    }
  }

  // Widths from input to output.
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w{input_dim};
    w.insert(w.end(), hidden_dims.begin(), hidden_dims.end());
    w.push_back(output_dim);
    return w;
  }

  // dense{l}.weight (out x in, row-major) then dense{l}.bias, per layer.
  Layout layout() const {
    validate();
    const auto w = widths();
    Layout layout;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      layout.push_back({"dense" + std::to_string(l) + ".weight", w[l + 1], w[l]});
      layout.push_back({"dense" + std::to_string(l) + ".bias", w[l + 1], 1});
    }
    return layout;
  }

  std::size_t param_count() const { return layout_size(layout()); }
};

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 64;
  std::size_t local_epochs = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw InvalidArgument("train.learning_rate must be finite and >= 0");
    }
    if (batch_size == 0) throw InvalidArgument("train.batch_size must be >= 1");
    if (local_epochs == 0) throw InvalidArgument("train.local_epochs must be >= 1");
  }
};

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Batch {
  RowMatrix features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

inline Batch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  Batch b;
  b.features.resize(static_cast<Eigen::Index>(indices.size()),
                    static_cast<Eigen::Index>(data.dims));
  b.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto row = data.row(indices[r]);
    for (std::size_t j = 0; j < data.dims; ++j) {
      b.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = row[j];
    }
    b.labels.push_back(data.labels[indices[r]]);
  }
  return b;
}

struct LossAndLogits {
  double loss = 0.0;
  RowMatrix logits;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

// DP-SGD settings for one client's local training.
struct StepPrivacy {
  double clip_norm = 1.0;
  double noise_multiplier = 0.0;
  std::uint64_t noise_seed = 0;
};

struct PrivateTrainResult {
  ParamVector params;
  std::size_t noisy_steps = 0;
};

// Fully connected classifier with softmax cross-entropy loss. Stateless: the
// parameters always travel separately as a ParamVector.
class Mlp {
 public:
  explicit Mlp(MlpSpec spec) : spec_(std::move(spec)), layout_(spec_.layout()) {}

  const MlpSpec& spec() const { return spec_; }
  const Layout& layout() const { return layout_; }
  std::size_t layer_count() const { return layout_.size() / 2; }

  // Fan-in scaled uniform weights (He for ReLU, LeCun for tanh), zero biases.
  ParamVector init_params(std::uint64_t seed) const {
    ParamVector p(layout_);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < layer_count(); ++l) {
      const double fan_in = static_cast<double>(layout_[2 * l].cols);
      const double bound = spec_.activation == Activation::kRelu
                               ? std::sqrt(6.0 / fan_in)
                               : std::sqrt(3.0 / fan_in);
      std::uniform_real_distribution<double> u(-bound, bound);
      for (double& w : p.tensor(2 * l)) w = u(rng);
    }
    return p;
  }

  LossAndLogits forward_loss(const ParamVector& params, const Batch& batch) const {
    check(params, batch);
    Trace t = forward(params, batch.features);
    LossAndLogits out;
    out.logits = std::move(t.pre.back());
    out.loss = mean_cross_entropy(out.logits, batch.labels);
    return out;
  }

  // Gradient of the mean batch loss.
  ParamVector backward(const ParamVector& params, const Batch& batch) const {
    check(params, batch);
    Trace t = forward(params, batch.features);
    const auto deltas = output_to_input_deltas(params, t, batch.labels);
    ParamVector grad(layout_);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (std::size_t l = 0; l < layer_count(); ++l) {
      accumulate_layer_grad(grad, l, deltas[l], input_of(t, batch.features, l),
                            inv_b);
    }
    return grad;
  }

  // Per-example gradient L2 norms of the (unaveraged) per-example loss.
  // A dense layer's per-example weight gradient is an outer product, so its
  // squared norm is |delta|^2 * |input|^2; the bias adds |delta|^2.
  std::vector<double> per_example_grad_norms(const ParamVector& params,
                                             const Batch& batch) const {
    check(params, batch);
    Trace t = forward(params, batch.features);
    const auto deltas = output_to_input_deltas(params, t, batch.labels);
    return per_example_norms(t, batch.features, deltas);
  }

  // Sum over the batch of per-example gradients clipped to `clip_norm`.
  ParamVector clipped_grad_sum(const ParamVector& params, const Batch& batch,
                               double clip_norm) const {
    check(params, batch);
    Trace t = forward(params, batch.features);
    auto deltas = output_to_input_deltas(params, t, batch.labels);
    const auto norms = per_example_norms(t, batch.features, deltas);
    Eigen::VectorXd scale(static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      scale(static_cast<Eigen::Index>(i)) = clip_scale(norms[i], clip_norm);
    }
    ParamVector grad(layout_);
    for (std::size_t l = 0; l < layer_count(); ++l) {
      deltas[l] = scale.asDiagonal() * deltas[l];
      accumulate_layer_grad(grad, l, deltas[l], input_of(t, batch.features, l),
                            1.0);
    }
    return grad;
  }

  // Mini-batch SGD over `shard` for cfg.local_epochs epochs. The shard is
  // reshuffled every epoch with seed cfg.seed ^ epoch.
  ParamVector local_train(ParamVector params, const Shard& shard,
                          const TrainConfig& cfg) const {
    return train_impl(std::move(params), shard, cfg, nullptr).params;
  }

  // local_train with DP-SGD steps: per-example clipping, Gaussian noise of
  // standard deviation z * C on the summed gradient, then averaging.
  PrivateTrainResult private_local_train(ParamVector params, const Shard& shard,
                                         const TrainConfig& cfg,
                                         const StepPrivacy& dp) const {
    if (!(dp.clip_norm > 0.0)) {
      throw InvalidArgument("private_local_train: clip_norm must be > 0");
    }
    return train_impl(std::move(params), shard, cfg, &dp);
  }

  Evaluation evaluate(const ParamVector& params, const Dataset& data,
                      std::size_t chunk = 1000) const {
    if (data.size() == 0) throw InvalidArgument("evaluate: empty test set");
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return evaluate(params, data, idx, chunk);
  }

  Evaluation evaluate(const ParamVector& params, const Dataset& data,
                      std::span<const std::size_t> indices,
                      std::size_t chunk = 1000) const {
    if (indices.empty()) throw InvalidArgument("evaluate: empty test set");
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < indices.size(); start += chunk) {
      const auto part =
          indices.subspan(start, std::min(chunk, indices.size() - start));
      Batch b = make_batch(data, part);
      LossAndLogits r = forward_loss(params, b);
      loss_sum += r.loss * static_cast<double>(b.size());
      for (Eigen::Index i = 0; i < r.logits.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < r.logits.cols(); ++c) {
          if (r.logits(i, c) > r.logits(i, best)) best = c;
        }
        if (best == b.labels[static_cast<std::size_t>(i)]) ++correct;
      }
    }
    const double n = static_cast<double>(indices.size());
    return {loss_sum / n, static_cast<double>(correct) / n};
  }

 private:
  // Pre-activations of every layer and post-activations of hidden layers.
  struct Trace {
    std::vector<RowMatrix> pre;
    std::vector<RowMatrix> post;
  };

  void check(const ParamVector& params, const Batch& batch) const {
    if (params.layout() != layout_) {
      throw InvalidArgument("Mlp: parameter layout does not match the model");
    }
    if (static_cast<std::size_t>(batch.features.cols()) != spec_.input_dim) {
      throw InvalidArgument("Mlp: batch has " +
                            std::to_string(batch.features.cols()) +
                            " features, model expects " +
                            std::to_string(spec_.input_dim));
    }
    if (static_cast<std::size_t>(batch.features.rows()) != batch.size() ||
        batch.size() == 0) {
      throw InvalidArgument("Mlp: empty or inconsistent batch");
    }
    for (int y : batch.labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= spec_.output_dim) {
        throw InvalidArgument("Mlp: label " + std::to_string(y) +
                              " outside [0, " + std::to_string(spec_.output_dim) +
                              ")");
      }
    }
  }

  Eigen::Map<const RowMatrix> weight(const ParamVector& p, std::size_t l) const {
    const auto& s = layout_[2 * l];
    return {p.tensor(2 * l).data(), static_cast<Eigen::Index>(s.rows),
            static_cast<Eigen::Index>(s.cols)};
  }

  Eigen::Map<const Eigen::RowVectorXd> bias(const ParamVector& p,
                                            std::size_t l) const {
    return {p.tensor(2 * l + 1).data(),
            static_cast<Eigen::Index>(layout_[2 * l + 1].rows)};
  }

  const RowMatrix& input_of(const Trace& t, const RowMatrix& x,
                            std::size_t l) const {
    return l == 0 ? x : t.post[l - 1];
  }

  Trace forward(const ParamVector& params, const RowMatrix& x) const {
    Trace t;
    const std::size_t layers = layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
      const RowMatrix& in = input_of(t, x, l);
      RowMatrix z = in * weight(params, l).transpose();
      z.rowwise() += bias(params, l);
      if (l + 1 < layers) {
        RowMatrix a = spec_.activation == Activation::kRelu
                          ? RowMatrix(z.cwiseMax(0.0))
                          : RowMatrix(z.array().tanh().matrix());
        t.post.push_back(std::move(a));
      }
      t.pre.push_back(std::move(z));
    }
    return t;
  }

  static double mean_cross_entropy(const RowMatrix& logits,
                                   const std::vector<int>& labels) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double m = logits.row(i).maxCoeff();
      const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
      total += lse - logits(i, labels[static_cast<std::size_t>(i)]);
    }
    return total / static_cast<double>(logits.rows());
  }

  // Per-example error signals dL_i/dz for every layer, unaveraged.
  std::vector<RowMatrix> output_to_input_deltas(const ParamVector& params,
                                                const Trace& t,
                                                const std::vector<int>& labels) const {
    const std::size_t layers = layer_count();
    std::vector<RowMatrix> deltas(layers);
    RowMatrix g = t.pre.back();
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double m = g.row(i).maxCoeff();
      g.row(i) = (g.row(i).array() - m).exp().matrix();
      g.row(i) /= g.row(i).sum();
      g(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    }
    for (std::size_t l = layers; l-- > 0;) {
      if (l + 1 < layers) {
        RowMatrix back = deltas[l + 1] * weight(params, l + 1);
        if (spec_.activation == Activation::kRelu) {
          g = (t.pre[l].array() > 0.0).select(back, 0.0);
        } else {
          g = back.array() * (1.0 - t.post[l].array().square());
        }
      }
      deltas[l] = g;
    }
    return deltas;
  }

  std::vector<double> per_example_norms(const Trace& t, const RowMatrix& x,
                                        const std::vector<RowMatrix>& deltas) const {
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(x.rows());
    for (std::size_t l = 0; l < layer_count(); ++l) {
      const RowMatrix& in = input_of(t, x, l);
      sq.array() += deltas[l].rowwise().squaredNorm().array() *
                    (in.rowwise().squaredNorm().array() + 1.0);
    }
    std::vector<double> out(static_cast<std::size_t>(sq.size()));
    for (Eigen::Index i = 0; i < sq.size(); ++i) {
      out[static_cast<std::size_t>(i)] = std::sqrt(sq(i));
    }
    return out;
  }

  void accumulate_layer_grad(ParamVector& grad, std::size_t l,
                             const RowMatrix& delta, const RowMatrix& in,
                             double scale) const {
    const auto& s = layout_[2 * l];
    Eigen::Map<RowMatrix> gw(grad.tensor(2 * l).data(),
                             static_cast<Eigen::Index>(s.rows),
                             static_cast<Eigen::Index>(s.cols));
    Eigen::Map<Eigen::RowVectorXd> gb(grad.tensor(2 * l + 1).data(),
                                      static_cast<Eigen::Index>(s.rows));
    gw.noalias() += scale * (delta.transpose() * in);
    gb += scale * delta.colwise().sum();
  }

  PrivateTrainResult train_impl(ParamVector params, const Shard& shard,
                                const TrainConfig& cfg,
                                const StepPrivacy* dp) const {
    cfg.validate();
    if (shard.empty()) throw EmptyShardError("local_train: empty shard");
    if (params.layout() != layout_) {
      throw InvalidArgument("local_train: parameter layout does not match the model");
    }
    std::vector<std::size_t> order(shard.indices().begin(), shard.indices().end());
    std::size_t steps = 0;
    for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
      std::mt19937_64 rng(cfg.seed ^ static_cast<std::uint64_t>(epoch));
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::span<const std::size_t> part(
            order.data() + start, std::min(cfg.batch_size, order.size() - start));
        Batch b = make_batch(shard.data(), part);
        ParamVector grad;
        if (dp == nullptr) {
          grad = backward(params, b);
        } else {
          grad = add_noise(clipped_grad_sum(params, b, dp->clip_norm),
                           dp->clip_norm, dp->noise_multiplier,
                           derive_seed(dp->noise_seed, {epoch, start}));
          grad *= 1.0 / static_cast<double>(b.size());
        }
        auto p = params.values();
        const auto g = grad.values();
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= cfg.learning_rate * g[i];
        ++steps;
      }
    }
    if (!params.all_finite()) {
      throw Error("local_train: parameters diverged to non-finite values");
    }
    return {std::move(params), steps};
  }

  MlpSpec spec_;
  Layout layout_;
};

}  // namespace p2pfl
