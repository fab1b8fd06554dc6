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


// p2pfl: command-line driver for the peer-to-peer federated learning
// simulator.
//
//   p2pfl run <config> [--out DIR] [--seed N] [--subsample F] [--wide]
//   p2pfl validate <config>
//   p2pfl compare <runA.csv> <runB.csv> [--out FILE]
//   p2pfl plot <table.csv> [--out FILE.svg]
//
// Exit codes: 0 success, 1 usage, 2 configuration, 3 data, 4 runtime.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "p2pfl/p2pfl.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

void print_summary(const p2pfl::RunConfig& cfg, const p2pfl::RunOutputs& out) {
  std::cout << "mode=" << (cfg.mode == p2pfl::FederationMode::kCentralized ? "centralized"
                                                                          : "peer_to_peer")
            << " dataset=" << p2pfl::dataset_name(cfg.dataset) << " rounds=" << cfg.rounds
            << " nodes=" << cfg.graph.node_count() << "\n";
  for (std::size_t t = 0; t < out.result.plans.size(); ++t) {
    const auto& plan = out.result.plans[t];
    const auto& ev = out.result.global_evals[t];
    std::cout << "round " << t + 1 << ": aggregator " << plan.aggregator << ", "
              << plan.providers.size() << " providers, " << plan.non_participants.size()
              << " dnp, accuracy " << p2pfl::format_g6(ev.accuracy) << ", loss "
              << p2pfl::format_g6(ev.loss) << "\n";
  }
  std::cout << "wrote " << out.client_csv.string() << " and " << out.server_csv.string()
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Peer-to-peer federated learning with differential privacy"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> subsample;
  bool wide = false;

  auto* run = app.add_subcommand("run", "execute a run config and write metrics tables");
  run->add_option("config,--config", config_path, "run config file")->required();
  run->add_option("--out", out_path, "output directory (overrides output_dir)");
  run->add_option("--seed", seed, "master seed (overrides master_seed)");
  run->add_option("--subsample", subsample, "keep this fraction of every shard")
      ->check(CLI::Range(0.0, 1.0));
  run->add_flag("--wide", wide, "also write the per-node pivot table");

  auto* validate = app.add_subcommand("validate", "parse and check a run config");
  validate->add_option("config,--config", config_path, "run config file")->required();

  std::string table_a;
  std::string table_b;
  auto* compare = app.add_subcommand("compare", "per-round accuracy deltas (b - a)");
  compare->add_option("a", table_a, "baseline metrics CSV")->required();
  compare->add_option("b", table_b, "comparison metrics CSV")->required();
  compare->add_option("--out", out_path, "write the comparison here instead of stdout");

  auto* plot = app.add_subcommand("plot", "SVG line chart of a metrics CSV");
  plot->add_option("table", table_a, "metrics CSV")->required();
  plot->add_option("--out", out_path, "SVG output path (default: next to the CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run || *validate) {
      p2pfl::RunConfig cfg = p2pfl::parse_config(std::filesystem::path(config_path));
      if (*validate) {
        std::cout << config_path << ": ok (" << cfg.graph.node_count() << " nodes, "
                  << cfg.graph.edge_count() << " edges, " << cfg.rounds << " rounds)\n";
        return 0;
      }
      if (out_path) cfg.output_dir = *out_path;
      if (seed) cfg.master_seed = *seed;
      if (subsample) {
        if (!(*subsample > 0.0)) throw p2pfl::ConfigError("--subsample must be > 0");
        cfg.subsample = *subsample;
      }
      print_summary(cfg, p2pfl::execute(cfg, wide));
      return 0;
    }
    if (*compare) {
      const auto deltas = p2pfl::compare_tables(p2pfl::read_metrics_table(table_a),
                                                p2pfl::read_metrics_table(table_b));
      if (out_path) {
        std::ofstream f(*out_path, std::ios::binary);
        if (!f) throw p2pfl::Error("cannot write " + *out_path);
        p2pfl::emit_comparison(deltas, f);
      } else {
        p2pfl::emit_comparison(deltas, std::cout);
      }
      return 0;
    }
    if (*plot) {
      const auto table = p2pfl::read_metrics_table(table_a);
      const std::filesystem::path svg =
          out_path ? std::filesystem::path(*out_path)
                   : std::filesystem::path(table_a).replace_extension(".svg");
      std::ofstream f(svg, std::ios::binary);
      if (!f) throw p2pfl::Error("cannot write " + svg.string());
      p2pfl::emit_plot_svg(table, f, std::filesystem::path(table_a).filename().string());
      std::cout << "wrote " << svg.string() << "\n";
      return 0;
    }
  } catch (const p2pfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const p2pfl::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
