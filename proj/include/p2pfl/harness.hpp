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
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "p2pfl/config.hpp"
#include "p2pfl/dataset.hpp"
#include "p2pfl/errors.hpp"
#include "p2pfl/federation.hpp"

namespace p2pfl {

// Metrics tables. Rounds are 1-based in every file; floats use six
// significant digits; a node that never adds noise has an empty epsilon cell.

inline std::string format_g6(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string format_opt(const std::optional<double>& v) {
  return v ? format_g6(*v) : std::string();
}

inline std::string format_epsilon(double eps) {
  return std::isinf(eps) ? std::string() : format_g6(eps);
}

inline constexpr const char* kClientHeader = "round,node_id,role,loss,accuracy,epsilon";
inline constexpr const char* kServerHeader = "round,aggregator_id,accuracy,loss";

inline std::vector<RoundRecord> sorted_records(std::span<const RoundRecord> records) {
  std::vector<RoundRecord> out(records.begin(), records.end());
  std::stable_sort(out.begin(), out.end(), [](const RoundRecord& a, const RoundRecord& b) {
    return a.round_index != b.round_index ? a.round_index < b.round_index
                                          : a.node_id < b.node_id;
  });
  return out;
}

inline void emit_client_table(std::span<const RoundRecord> records, std::ostream& out) {
  out << kClientHeader << '\n';
  for (const RoundRecord& r : sorted_records(records)) {
    out << r.round_index + 1 << ',' << r.node_id << ',' << role_name(r.role) << ','
        << format_opt(r.loss) << ',' << format_opt(r.accuracy) << ','
        << format_epsilon(r.epsilon) << '\n';
  }
}

// One row per round: the aggregator's view of the freshly aggregated model.
inline void emit_server_table(std::span<const RoundRecord> records, std::ostream& out) {
  out << kServerHeader << '\n';
  for (const RoundRecord& r : sorted_records(records)) {
    if (r.role != Role::kAggregator) continue;
    out << r.round_index + 1 << ',' << r.node_id << ',' << format_opt(r.accuracy) << ','
        << format_opt(r.loss) << '\n';
  }
}

// Pivot table: one row per round, loss/accuracy column pair per node,
// `DNP` for non-participants and a trailing `*` on the aggregator's cells.
inline void emit_wide_client_table(std::span<const RoundRecord> records,
                                   std::size_t node_count, std::ostream& out) {
  out << "round";
  for (std::size_t n = 0; n < node_count; ++n) {
    out << ",node" << n << "_loss,node" << n << "_accuracy";
  }
  out << '\n';
  std::map<std::size_t, std::vector<const RoundRecord*>> by_round;
  const auto sorted = sorted_records(records);
  for (const RoundRecord& r : sorted) {
    auto& row = by_round[r.round_index];
    row.resize(node_count, nullptr);
    if (r.node_id < node_count) row[r.node_id] = &r;
  }
  for (const auto& [round, row] : by_round) {
    out << round + 1;
    for (const RoundRecord* r : row) {
      if (r == nullptr || r->role == Role::kDnp) {
        out << ",DNP,DNP";
        continue;
      }
      const char* mark = r->role == Role::kAggregator ? "*" : "";
      out << ',' << format_opt(r->loss) << mark << ',' << format_opt(r->accuracy) << mark;
    }
    out << '\n';
  }
}

struct ClientRow {
  std::size_t round = 0;
  NodeId node_id = 0;
  std::string role;
  std::optional<double> loss;
  std::optional<double> accuracy;
  std::optional<double> epsilon;
};

struct ServerRow {
  std::size_t round = 0;
  NodeId aggregator_id = 0;
  double accuracy = 0.0;
  double loss = 0.0;
};

struct MetricsTable {
  enum class Kind { kClient, kServer };
  Kind kind = Kind::kClient;
  std::vector<ClientRow> clients;
  std::vector<ServerRow> servers;
};

namespace harness_detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double to_double(const std::string& s, const std::string& where) {
  if (s == "inf") return kUnboundedEpsilon;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw DataError(where + ": expected a number, got `" + s + "`");
  }
  return v;
}

inline std::size_t to_index(const std::string& s, const std::string& where) {
  const double v = to_double(s, where);
  if (v < 0 || v != std::floor(v)) throw DataError(where + ": expected an integer, got `" + s + "`");
  return static_cast<std::size_t>(v);
}

inline std::optional<double> to_opt(const std::string& s, const std::string& where) {
  if (s.empty()) return std::nullopt;
  return to_double(s, where);
}

}  // namespace harness_detail

// Parses a table written by emit_client_table or emit_server_table.
inline MetricsTable read_metrics_table(std::istream& in, const std::string& name = "table") {
  using namespace harness_detail;
  std::string line;
  if (!std::getline(in, line)) throw DataError(name + ": empty file");
  MetricsTable t;
  if (line == kClientHeader) {
    t.kind = MetricsTable::Kind::kClient;
  } else if (line == kServerHeader) {
    t.kind = MetricsTable::Kind::kServer;
  } else {
    throw DataError(name + ": unrecognised header `" + line + "`");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    const auto c = split_csv(line);
    if (t.kind == MetricsTable::Kind::kClient) {
      if (c.size() != 6) throw DataError(where + ": expected 6 fields");
      t.clients.push_back({to_index(c[0], where), to_index(c[1], where), c[2],
                           to_opt(c[3], where), to_opt(c[4], where), to_opt(c[5], where)});
    } else {
      if (c.size() != 4) throw DataError(where + ": expected 4 fields");
      t.servers.push_back({to_index(c[0], where), to_index(c[1], where),
                           to_double(c[2], where), to_double(c[3], where)});
    }
  }
  return t;
}

inline MetricsTable read_metrics_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_metrics_table(in, path.string());
}

// Accuracy per round: the server row, or the mean over participating nodes
// of a client table.
inline std::map<std::size_t, double> round_accuracy(const MetricsTable& t) {
  std::map<std::size_t, double> acc;
  if (t.kind == MetricsTable::Kind::kServer) {
    for (const auto& r : t.servers) acc[r.round] = r.accuracy;
    return acc;
  }
  std::map<std::size_t, std::pair<double, std::size_t>> sums;
  for (const auto& r : t.clients) {
    if (!r.accuracy) continue;
    sums[r.round].first += *r.accuracy;
    sums[r.round].second += 1;
  }
  for (const auto& [round, s] : sums) acc[round] = s.first / static_cast<double>(s.second);
  return acc;
}

struct AccuracyDelta {
  std::size_t round = 0;
  double accuracy_a = 0.0;
  double accuracy_b = 0.0;
  double delta = 0.0;  // b - a
};

inline std::vector<AccuracyDelta> compare_tables(const MetricsTable& a, const MetricsTable& b) {
  const auto acc_a = round_accuracy(a);
  const auto acc_b = round_accuracy(b);
  if (acc_a.size() != acc_b.size()) {
    throw DataError("compare: tables cover different numbers of rounds (" +
                    std::to_string(acc_a.size()) + " vs " + std::to_string(acc_b.size()) + ")");
  }
  std::vector<AccuracyDelta> out;
  for (const auto& [round, va] : acc_a) {
    auto it = acc_b.find(round);
    if (it == acc_b.end()) throw DataError("compare: round " + std::to_string(round) + " missing");
    out.push_back({round, va, it->second, it->second - va});
  }
  return out;
}

inline void emit_comparison(std::span<const AccuracyDelta> deltas, std::ostream& out) {
  out << "round,accuracy_a,accuracy_b,delta\n";
  for (const auto& d : deltas) {
    out << d.round << ',' << format_g6(d.accuracy_a) << ',' << format_g6(d.accuracy_b) << ','
        << format_g6(d.delta) << '\n';
  }
}

// Line chart (SVG) of accuracy and loss against round.
inline void emit_plot_svg(const MetricsTable& t, std::ostream& out,
                          const std::string& title = "metrics") {
  struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
    bool loss = false;
  };
  std::vector<Series> series;
  if (t.kind == MetricsTable::Kind::kServer) {
    Series acc{"accuracy", {}, false};
    Series loss{"loss", {}, true};
    for (const auto& r : t.servers) {
      acc.points.emplace_back(static_cast<double>(r.round), r.accuracy);
      loss.points.emplace_back(static_cast<double>(r.round), r.loss);
    }
    series = {acc, loss};
  } else {
    std::map<NodeId, Series> by_node;
    for (const auto& r : t.clients) {
      if (!r.accuracy) continue;
      auto& s = by_node[r.node_id];
      s.label = "node " + std::to_string(r.node_id) + " accuracy";
      s.points.emplace_back(static_cast<double>(r.round), *r.accuracy);
    }
    for (auto& [n, s] : by_node) series.push_back(std::move(s));
  }

  double max_round = 1.0;
  double max_loss = 1e-9;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      max_round = std::max(max_round, x);
      if (s.loss) max_loss = std::max(max_loss, y);
    }
  }
  const double w = 640, h = 400, left = 60, right = 20, top = 40, bottom = 50;
  auto px = [&](double x) { return left + (x - 1.0) / std::max(max_round - 1.0, 1.0) * (w - left - right); };
  auto py = [&](double y, bool loss) {
    const double v = loss ? y / max_loss : y;
    return h - bottom - std::clamp(v, 0.0, 1.0) * (h - top - bottom);
  };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\">"
      << title << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\""
      << h - bottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << h - bottom << "\" stroke=\"black\"/>\n";
  for (int r = 1; r <= static_cast<int>(max_round); ++r) {
    out << "<text x=\"" << px(r) << "\" y=\"" << h - bottom + 18
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << r << "</text>\n";
  }
  out << "<text x=\"" << w / 2 << "\" y=\"" << h - 10
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">round</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % 8];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\""
        << (s.loss ? " stroke-dasharray=\"6 3\"" : "") << " points=\"";
    for (const auto& [x, y] : s.points) out << px(x) << ',' << py(y, s.loss) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << left + 10 << "\" y=\"" << top + 14 * (i + 1) << "\" fill=\"" << color
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << s.label
        << (s.loss ? " (scaled to max " + format_g6(max_loss) + ")" : "") << "</text>\n";
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Running a configuration end to end.

struct LoadedData {
  std::shared_ptr<const Dataset> train;
  std::shared_ptr<const Dataset> test;
};

inline std::filesystem::path resolve_data_dir(const RunConfig& cfg) {
  if (cfg.data_dir) return *cfg.data_dir;
  if (const char* env = std::getenv("P2PFL_DATA_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return "data";
}

inline LoadedData load_datasets(const RunConfig& cfg) {
  if (cfg.dataset == DatasetKind::kSynth) {
    // Train and test blobs share their class means; only the noise differs.
    const auto& s = cfg.synth;
    Dataset all = synth_blobs(s.train_samples + s.test_samples, s.dims, s.classes,
                              derive_seed(cfg.master_seed, {seed_tag::kPartition, 99}),
                              s.separation);
    auto train = std::make_shared<Dataset>();
    auto test = std::make_shared<Dataset>();
    for (Dataset* d : {train.get(), test.get()}) {
      d->dims = all.dims;
      d->classes = all.classes;
    }
    train->name = "synth-train";
    test->name = "synth-test";
    for (std::size_t i = 0; i < all.size(); ++i) {
      Dataset& d = i < s.train_samples ? *train : *test;
      d.labels.push_back(all.labels[i]);
      const auto row = all.row(i);
      d.features.insert(d.features.end(), row.begin(), row.end());
    }
    return {train, test};
  }

  const std::filesystem::path root = resolve_data_dir(cfg);
  TrainTest tt;
  try {
    if (cfg.dataset == DatasetKind::kMnist) {
      tt = load_mnist(std::filesystem::exists(root / "mnist") ? root / "mnist" : root);
    } else {
      tt = load_cifar10(std::filesystem::exists(root / "cifar10") ? root / "cifar10" : root);
    }
  } catch (const DataError& e) {
    const bool mnist = cfg.dataset == DatasetKind::kMnist;
    throw DataError(std::string(e.what()) + "\n" +
                    (mnist ? "Place train-images-idx3-ubyte, train-labels-idx1-ubyte, "
                             "t10k-images-idx3-ubyte and t10k-labels-idx1-ubyte"
                           : "Place data_batch_1.bin .. data_batch_5.bin and test_batch.bin "
                             "(the CIFAR-10 binary version)") +
                    " under " + root.string() + (mnist ? "/mnist" : "/cifar10") +
                    ", or point P2PFL_DATA_DIR / data_dir at them.");
  }
  return {std::make_shared<const Dataset>(std::move(tt.train)),
          std::make_shared<const Dataset>(std::move(tt.test))};
}

inline Experiment make_experiment(const RunConfig& cfg, const LoadedData& data) {
  Experiment ex;
  ex.mode = cfg.mode;
  ex.graph = cfg.graph;
  ex.rounds = cfg.rounds;
  ex.model = cfg.model;
  ex.train = cfg.train;
  ex.dp = cfg.dp;
  ex.master_seed = cfg.master_seed;
  ex.aggregator_trains = cfg.aggregator_trains;
  ex.centralized_aggregator = cfg.centralized_aggregator;
  ex.parallel = cfg.parallel;
  ex.subsample = cfg.subsample.value_or(1.0);
  ex.train_set = data.train;
  ex.test_set = data.test;
  return ex;
}

struct RunOutputs {
  std::filesystem::path client_csv;
  std::filesystem::path server_csv;
  std::optional<std::filesystem::path> wide_csv;
  ExperimentResult result;
};

// Runs the experiment and writes clients.csv and server.csv (and
// clients_wide.csv with `wide`) into cfg.output_dir.
inline RunOutputs execute(const RunConfig& cfg, bool wide = false,
                          const LoadedData* preloaded = nullptr) {
  const LoadedData data = preloaded ? *preloaded : load_datasets(cfg);
  RunOutputs out;
  out.result = run_experiment(make_experiment(cfg, data));
  std::filesystem::create_directories(cfg.output_dir);
  out.client_csv = cfg.output_dir / "clients.csv";
  out.server_csv = cfg.output_dir / "server.csv";
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    return f;
  };
  {
    auto f = open(out.client_csv);
    emit_client_table(out.result.records, f);
  }
  {
    auto f = open(out.server_csv);
    emit_server_table(out.result.records, f);
  }
  if (wide) {
    out.wide_csv = cfg.output_dir / "clients_wide.csv";
    auto f = open(*out.wide_csv);
    emit_wide_client_table(out.result.records, cfg.graph.node_count(), f);
  }
  return out;
}

}  // namespace p2pfl
