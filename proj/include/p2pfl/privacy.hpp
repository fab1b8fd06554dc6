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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "p2pfl/errors.hpp"
#include "p2pfl/net_graph.hpp"
#include "p2pfl/param_vector.hpp"

namespace p2pfl {

enum class ClipStrategy { kModelClip, kDifferenceClip };
enum class NoiseOrder { kClipThenNoise, kNoiseThenClip };
enum class Accountant { kGaussianClosedForm, kBasicComposition };

// Where the Gaussian mechanism is applied: once to the whole local update
// before upload, or to every mini-batch gradient during local training
// (per-example clipping, noise on the summed batch gradient).
enum class DpGranularity { kUpdate, kStep };

struct DpConfig {
  double clip_norm = 1.0;
  double noise_multiplier = 0.5;
  double delta = 1e-5;
  ClipStrategy clip_strategy = ClipStrategy::kDifferenceClip;
  NoiseOrder order = NoiseOrder::kClipThenNoise;
  Accountant accountant = Accountant::kGaussianClosedForm;
  DpGranularity granularity = DpGranularity::kUpdate;

  double sigma() const { return noise_multiplier * clip_norm; }

  void validate() const {
    if (!(clip_norm > 0.0) || !std::isfinite(clip_norm)) {
      throw InvalidArgument("dp.clip_norm must be a positive finite number");
    }
    if (!(noise_multiplier >= 0.0) || !std::isfinite(noise_multiplier)) {
      throw InvalidArgument("dp.noise_multiplier must be >= 0");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
      throw InvalidArgument("dp.delta must lie in (0, 1)");
    }
    if (granularity == DpGranularity::kStep &&
        order == NoiseOrder::kNoiseThenClip) {
      throw InvalidArgument(
          "dp.order = noise_then_clip is only defined for granularity = update");
    }
  }
};

// Scale factor that brings a vector of norm `norm` into the ball of radius
// `clip_norm`. Norms within a relative 1e-12 of the radius count as inside,
// which makes clipping exactly idempotent.
inline double clip_scale(double norm, double clip_norm) {
  if (norm <= clip_norm * (1.0 + 1e-12)) return 1.0;
  return clip_norm / norm;
}

inline ParamVector clip(const ParamVector& update, double clip_norm) {
  if (!(clip_norm > 0.0)) throw InvalidArgument("clip: clip_norm must be > 0");
  if (!update.all_finite()) {
    throw InvalidArgument("clip: update has non-finite entries");
  }
  const double scale = clip_scale(update.norm(), clip_norm);
  if (scale == 1.0) return update;
  return update * scale;
}

// What a client transmits before clipping: the model delta or the model.
inline ParamVector compute_update(const ParamVector& initial,
                                  const ParamVector& trained,
                                  ClipStrategy strategy) {
  initial.require_same_layout(trained, "compute_update");
  if (strategy == ClipStrategy::kModelClip) return trained;
  return trained - initial;
}

// Adds i.i.d. N(0, (noise_multiplier * clip_norm)^2) to every coordinate.
inline ParamVector add_noise(const ParamVector& update, double clip_norm,
                             double noise_multiplier, std::uint64_t rng_seed) {
  if (!(clip_norm > 0.0)) throw InvalidArgument("add_noise: clip_norm must be > 0");
  if (!(noise_multiplier >= 0.0)) {
    throw InvalidArgument("add_noise: noise_multiplier must be >= 0");
  }
  if (noise_multiplier == 0.0) return update;
  ParamVector out = update;
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, noise_multiplier * clip_norm);
  for (double& v : out.values()) v += gauss(rng);
  return out;
}

// compute_update followed by clipping and noising in the configured order.
inline ParamVector privatize(const ParamVector& initial,
                             const ParamVector& trained, const DpConfig& cfg,
                             std::uint64_t seed) {
  cfg.validate();
  ParamVector u = compute_update(initial, trained, cfg.clip_strategy);
  if (cfg.order == NoiseOrder::kClipThenNoise) {
    return add_noise(clip(u, cfg.clip_norm), cfg.clip_norm,
                     cfg.noise_multiplier, seed);
  }
  return clip(add_noise(u, cfg.clip_norm, cfg.noise_multiplier, seed),
              cfg.clip_norm);
}

struct Release {
  double noise_multiplier = 0.0;
  double clip_norm = 0.0;
  std::size_t round_index = 0;
};

// Result of accounting. `epsilon` is +infinity for nodes that never add noise
// or released anything with zero noise. `classic_bound_loose` marks values
// where the closed-form Gaussian bound is outside its epsilon < 1 regime.
struct PrivacySpend {
  double epsilon = 0.0;
  double delta = 0.0;
  bool classic_bound_loose = false;

  bool unbounded() const { return std::isinf(epsilon); }
};

inline constexpr double kUnboundedEpsilon =
    std::numeric_limits<double>::infinity();

// Per-node record of noisy releases. Single writer (the round engine).
class PrivacyLedger {
 public:
  PrivacyLedger() = default;
  explicit PrivacyLedger(std::vector<bool> dp_flags)
      : dp_flags_(std::move(dp_flags)), releases_(dp_flags_.size()) {}

  std::size_t node_count() const { return dp_flags_.size(); }

  bool dp_enabled(NodeId node) const {
    check(node);
    return dp_flags_[node];
  }

  void record(NodeId node, const Release& release) {
    check(node);
    if (!dp_flags_[node]) {
      throw InvalidArgument("PrivacyLedger: node " + std::to_string(node) +
                            " does not apply DP");
    }
    releases_[node].push_back(release);
  }

  const std::vector<Release>& releases(NodeId node) const {
    check(node);
    return releases_[node];
  }

 private:
  void check(NodeId node) const {
    if (node >= dp_flags_.size()) {
      throw InvalidArgument("PrivacyLedger: node id " + std::to_string(node) +
                            " out of range");
    }
  }

  std::vector<bool> dp_flags_;
  std::vector<std::vector<Release>> releases_;
};

// epsilon of one Gaussian release with sensitivity / sigma ratio `ratio`.
inline double gaussian_epsilon(double ratio, double delta) {
  return ratio * std::sqrt(2.0 * std::log(1.25 / delta));
}

// Privacy spent by `node` at the configured delta.
//
// kGaussianClosedForm composes the node's releases exactly as Gaussian
// mechanisms (sensitivity/sigma ratios add in quadrature) and applies the
// classic bound eps = ratio * sqrt(2 ln(1.25 / delta)); for a single release
// this is (C / sigma) * sqrt(2 ln(1.25 / delta)). kBasicComposition sums the
// per-release epsilons and deltas.
inline PrivacySpend account(const PrivacyLedger& ledger, NodeId node,
                            const DpConfig& cfg) {
  if (!ledger.dp_enabled(node)) {
    return {kUnboundedEpsilon, cfg.delta, true};
  }
  const auto& rel = ledger.releases(node);
  if (rel.empty()) return {0.0, 0.0, false};

  PrivacySpend spend;
  double sum_sq = 0.0;
  double sum_eps = 0.0;
  for (const Release& r : rel) {
    if (r.noise_multiplier == 0.0) return {kUnboundedEpsilon, cfg.delta, true};
    // Sensitivity is the clip norm and sigma = z * C, so the ratio is 1 / z.
    const double ratio = r.clip_norm / (r.noise_multiplier * r.clip_norm);
    sum_sq += ratio * ratio;
    sum_eps += gaussian_epsilon(ratio, cfg.delta);
  }
  if (cfg.accountant == Accountant::kGaussianClosedForm) {
    spend.epsilon = gaussian_epsilon(std::sqrt(sum_sq), cfg.delta);
    spend.delta = cfg.delta;
  } else {
    spend.epsilon = sum_eps;
    spend.delta = cfg.delta * static_cast<double>(rel.size());
  }
  spend.classic_bound_loose = spend.epsilon >= 1.0;
  return spend;
}

}  // namespace p2pfl
