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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "p2pfl/dataset.hpp"
#include "p2pfl/errors.hpp"
#include "p2pfl/learner.hpp"
#include "p2pfl/net_graph.hpp"
#include "p2pfl/param_vector.hpp"
#include "p2pfl/privacy.hpp"
#include "p2pfl/seed.hpp"

namespace p2pfl {

// Centralized pins the aggregator to one node for every round; peer-to-peer
// re-elects it each round from the graph.
enum class FederationMode { kCentralized, kPeerToPeer };

enum class Role { kAggregator, kProvider, kDnp };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::kAggregator:
      return "aggregator";
    case Role::kProvider:
      return "provider";
    case Role::kDnp:
      return "dnp";
  }
  return "?";
}

struct ClientState {
  NodeId node_id = 0;
  Shard shard;
  ParamVector model;
  bool dp_enabled = false;

  std::size_t shard_size() const { return shard.size(); }
};

// One node's view of one round. DNP rows carry no metrics.
struct RoundRecord {
  std::size_t round_index = 0;
  NodeId node_id = 0;
  Role role = Role::kDnp;
  std::optional<double> loss;
  std::optional<double> accuracy;
  double epsilon = kUnboundedEpsilon;

  bool operator==(const RoundRecord&) const = default;
};

struct Contribution {
  ParamVector params;
  std::size_t shard_size = 0;
};

// Weighted average sum_i p_i w_i with p_i = n_i / sum_j n_j, summed in the
// order given.
inline ParamVector fedavg(std::span<const Contribution> contributions) {
  if (contributions.empty()) throw InvalidArgument("fedavg: no contributions");
  std::size_t total = 0;
  for (const auto& c : contributions) {
    if (c.shard_size == 0) throw InvalidArgument("fedavg: zero shard size");
    contributions.front().params.require_same_layout(c.params, "fedavg");
    total += c.shard_size;
  }
  ParamVector out(contributions.front().params.layout());
  auto acc = out.values();
  for (const auto& c : contributions) {
    const double p = static_cast<double>(c.shard_size) / static_cast<double>(total);
    const auto w = c.params.values();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += p * w[i];
  }
  return out;
}

// Everything run_round needs besides the client states.
struct RoundContext {
  const Mlp* model = nullptr;
  const Dataset* test_set = nullptr;
  TrainConfig train;
  std::optional<DpConfig> dp;
  std::uint64_t master_seed = 0;
  bool aggregator_trains = true;
  bool parallel = false;
};

struct RoundResult {
  ParamVector new_global;
  std::vector<RoundRecord> records;
  Evaluation global_eval;
};

inline double node_epsilon(const PrivacyLedger& ledger, NodeId node,
                           const std::optional<DpConfig>& dp) {
  return account(ledger, node, dp.value_or(DpConfig{})).epsilon;
}

// One round: broadcast, local training, optional privatization, FedAvg at the
// aggregator, adoption by all participants, evaluation of the new model.
inline RoundResult run_round(std::vector<ClientState>& clients,
                             const ParamVector& global_model,
                             const RoundPlan& plan, const RoundContext& ctx,
                             PrivacyLedger& ledger) {
  if (ctx.model == nullptr || ctx.test_set == nullptr) {
    throw InvalidArgument("run_round: context is missing the model or test set");
  }
  if (global_model.layout() != ctx.model->layout()) {
    throw InvalidArgument("run_round: global model layout does not match the MLP");
  }
  if (plan.aggregator >= clients.size()) {
    throw InvalidArgument("run_round: aggregator id out of range");
  }
  if (ctx.dp) ctx.dp->validate();

  std::vector<NodeId> participants = plan.providers;
  if (ctx.aggregator_trains) participants.push_back(plan.aggregator);
  std::sort(participants.begin(), participants.end());
  if (participants.empty()) {
    throw RoundAborted("round " + std::to_string(plan.round_index + 1) +
                       ": aggregator " + std::to_string(plan.aggregator) +
                       " has no participants");
  }

  const bool step_dp = ctx.dp && ctx.dp->granularity == DpGranularity::kStep;
  auto train_one = [&](NodeId node) -> PrivateTrainResult {
    const ClientState& c = clients.at(node);
    TrainConfig cfg = ctx.train;
    cfg.seed = derive_seed(ctx.master_seed, {seed_tag::kTrain, plan.round_index, node});
    if (c.dp_enabled && step_dp) {
      StepPrivacy sp{ctx.dp->clip_norm, ctx.dp->noise_multiplier,
                     derive_seed(ctx.master_seed,
                                 {seed_tag::kNoise, plan.round_index, node})};
      return ctx.model->private_local_train(global_model, c.shard, cfg, sp);
    }
    return {ctx.model->local_train(global_model, c.shard, cfg), 0};
  };

  std::vector<PrivateTrainResult> trained(participants.size());
  if (ctx.parallel) {
    std::vector<std::future<PrivateTrainResult>> jobs;
    for (NodeId n : participants) {
      jobs.push_back(std::async(std::launch::async, train_one, n));
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) trained[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < participants.size(); ++i) {
      trained[i] = train_one(participants[i]);
    }
  }

  // Contributions in ascending node order so the floating-point sum does not
  // depend on scheduling.
  const bool deltas =
      ctx.dp && ctx.dp->clip_strategy == ClipStrategy::kDifferenceClip;
  std::vector<Contribution> contributions;
  contributions.reserve(participants.size());
  for (std::size_t i = 0; i < participants.size(); ++i) {
    const NodeId node = participants[i];
    const ClientState& c = clients[node];
    ParamVector sent;
    if (c.dp_enabled && ctx.dp && !step_dp) {
      sent = privatize(global_model, trained[i].params, *ctx.dp,
                       derive_seed(ctx.master_seed,
                                   {seed_tag::kNoise, plan.round_index, node}));
      ledger.record(node, {ctx.dp->noise_multiplier, ctx.dp->clip_norm,
                           plan.round_index});
    } else {
      if (c.dp_enabled && step_dp) {
        for (std::size_t s = 0; s < trained[i].noisy_steps; ++s) {
          ledger.record(node, {ctx.dp->noise_multiplier, ctx.dp->clip_norm,
                               plan.round_index});
        }
      }
      sent = deltas ? trained[i].params - global_model
                    : std::move(trained[i].params);
    }
    contributions.push_back({std::move(sent), c.shard_size()});
  }

  RoundResult result;
  result.new_global = fedavg(contributions);
  if (deltas) result.new_global += global_model;
  if (!result.new_global.all_finite()) {
    throw RoundAborted("round " + std::to_string(plan.round_index + 1) +
                       ": aggregated model has non-finite values");
  }

  clients[plan.aggregator].model = result.new_global;
  for (NodeId n : plan.providers) clients.at(n).model = result.new_global;

  result.global_eval = ctx.model->evaluate(result.new_global, *ctx.test_set);

  std::vector<Role> roles(clients.size(), Role::kDnp);
  roles[plan.aggregator] = Role::kAggregator;
  for (NodeId n : plan.providers) roles[n] = Role::kProvider;
  for (NodeId n = 0; n < clients.size(); ++n) {
    RoundRecord r;
    r.round_index = plan.round_index;
    r.node_id = n;
    r.role = roles[n];
    if (r.role != Role::kDnp) {
      r.loss = result.global_eval.loss;
      r.accuracy = result.global_eval.accuracy;
    }
    r.epsilon = node_epsilon(ledger, n, ctx.dp);
    result.records.push_back(r);
  }
  return result;
}

struct Experiment {
  FederationMode mode = FederationMode::kPeerToPeer;
  DpGraph graph;
  std::size_t rounds = 5;
  MlpSpec model;
  TrainConfig train;
  std::optional<DpConfig> dp;
  std::uint64_t master_seed = 0;
  bool aggregator_trains = true;
  // Centralized mode only; defaults to the round-0 election winner.
  std::optional<NodeId> centralized_aggregator;
  bool parallel = false;
  double subsample = 1.0;
  std::shared_ptr<const Dataset> train_set;
  std::shared_ptr<const Dataset> test_set;
  // Called after every round with the round index and the aggregated model.
  std::function<void(std::size_t, const ParamVector&)> on_round;
};

struct ExperimentResult {
  std::vector<RoundRecord> records;
  std::vector<RoundPlan> plans;
  std::vector<Evaluation> global_evals;
  ParamVector initial_model;
  std::vector<ParamVector> final_models;
};

// Partitions the training set, initializes every node with the same model and
// runs `rounds` rounds, threading the aggregator history and the ledger.
inline ExperimentResult run_experiment(const Experiment& ex) {
  if (!ex.train_set || !ex.test_set) {
    throw InvalidArgument("run_experiment: datasets not loaded");
  }
  const std::size_t k = ex.graph.node_count();
  const bool any_dp = std::any_of(ex.graph.dp_flags().begin(),
                                  ex.graph.dp_flags().end(),
                                  [](bool f) { return f; });
  if (any_dp && !ex.dp) {
    throw InvalidArgument("run_experiment: DP nodes present but no DP config");
  }
  if (ex.model.input_dim != ex.train_set->dims ||
      ex.model.output_dim != ex.train_set->classes) {
    throw InvalidArgument("run_experiment: model shape does not fit the dataset");
  }
  const Mlp mlp(ex.model);

  ExperimentResult out;
  out.initial_model = mlp.init_params(derive_seed(ex.master_seed, {seed_tag::kInit}));

  const Partition part = partition_iid(
      *ex.train_set, k, derive_seed(ex.master_seed, {seed_tag::kPartition}));
  std::vector<ClientState> clients(k);
  for (NodeId n = 0; n < k; ++n) {
    clients[n].node_id = n;
    clients[n].dp_enabled = ex.graph.dp_flag(n);
    clients[n].model = out.initial_model;
    clients[n].shard = Shard(
        ex.train_set,
        subsample(part.client_shards[n], ex.subsample,
                  derive_seed(ex.master_seed, {seed_tag::kSubsample, n})));
  }

  PrivacyLedger ledger(ex.graph.dp_flags());
  RoundContext ctx{&mlp, ex.test_set.get(), ex.train, ex.dp, ex.master_seed,
                   ex.aggregator_trains, ex.parallel};

  std::optional<NodeId> pinned = ex.centralized_aggregator;
  if (ex.mode == FederationMode::kCentralized && !pinned && ex.rounds > 0) {
    pinned = elect_aggregator(ex.graph, 0, {});
  }

  std::vector<NodeId> history;
  std::vector<double> last_eps(k, 0.0);
  for (std::size_t t = 0; t < ex.rounds; ++t) {
    RoundPlan plan;
    try {
      plan = ex.mode == FederationMode::kCentralized
                 ? plan_with_aggregator(ex.graph, t, *pinned)
                 : plan_round(ex.graph, t, history);
      RoundResult r =
          run_round(clients, clients[plan.aggregator].model, plan, ctx, ledger);
      for (const RoundRecord& rec : r.records) {
        if (rec.epsilon < last_eps[rec.node_id]) {
          throw Error("privacy ledger: epsilon of node " +
                      std::to_string(rec.node_id) + " decreased");
        }
        last_eps[rec.node_id] = rec.epsilon;
      }
      out.records.insert(out.records.end(), r.records.begin(), r.records.end());
      out.global_evals.push_back(r.global_eval);
      if (ex.on_round) ex.on_round(t, r.new_global);
    } catch (const Error& e) {
      throw RoundAborted("experiment aborted in round " + std::to_string(t + 1) +
                         ": " + e.what());
    }
    out.plans.push_back(std::move(plan));
  }
  for (auto& c : clients) out.final_models.push_back(std::move(c.model));
  return out;
}

}  // namespace p2pfl
