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
#include <cctype>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "p2pfl/errors.hpp"
#include "p2pfl/federation.hpp"
#include "p2pfl/learner.hpp"
#include "p2pfl/net_graph.hpp"
#include "p2pfl/privacy.hpp"

namespace p2pfl {

// Run configuration grammar (keys are listed in README.md):
//
//   file    := { line }
//   line    := blank | comment | section | entry
//   comment := ('#' | ';') text
//   section := '[' name ']'
//   entry   := key '=' value [ ws ('#' | ';') text ]
//
// Entries before the first section belong to the top level. Keys and
// sections are case-sensitive; unknown or repeated ones are errors.
struct IniValue {
  std::string text;
  std::size_t line = 0;
  std::size_t column = 0;
};

struct IniSection {
  std::size_t line = 0;
  std::map<std::string, IniValue> entries;
};

using IniDocument = std::map<std::string, IniSection>;

inline IniDocument parse_ini(std::istream& in) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  IniDocument doc;
  doc[""].line = 1;
  std::string current;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::size_t b = 0;
    while (b < raw.size() && is_space(raw[b])) ++b;
    std::size_t e = raw.size();
    while (e > b && is_space(raw[e - 1])) --e;
    if (b == e || raw[b] == '#' || raw[b] == ';') continue;
    if (raw[b] == '[') {
      if (raw[e - 1] != ']') throw ConfigError("unterminated section header", line_no, e);
      std::string name = raw.substr(b + 1, e - b - 2);
      if (name.empty()) throw ConfigError("empty section name", line_no, b + 1);
      if (doc.count(name) != 0) {
        throw ConfigError("duplicate section [" + name + "]", line_no, b + 1);
      }
      current = name;
      doc[current].line = line_no;
      continue;
    }
    const std::size_t eq = raw.find('=', b);
    if (eq == std::string::npos || eq >= e) {
      throw ConfigError("expected `key = value`", line_no, b + 1);
    }
    std::size_t ke = eq;
    while (ke > b && is_space(raw[ke - 1])) --ke;
    if (ke == b) throw ConfigError("missing key before `=`", line_no, b + 1);
    std::string key = raw.substr(b, ke - b);
    std::size_t vb = eq + 1;
    while (vb < e && is_space(raw[vb])) ++vb;
    // Trailing comment: '#' or ';' preceded by whitespace.
    std::size_t ve = e;
    for (std::size_t i = vb; i < e; ++i) {
      if ((raw[i] == '#' || raw[i] == ';') && i > vb && is_space(raw[i - 1])) {
        ve = i;
        break;
      }
    }
    while (ve > vb && is_space(raw[ve - 1])) --ve;
    auto& section = doc[current];
    if (section.entries.count(key) != 0) {
      throw ConfigError("duplicate key `" + key + "`", line_no, b + 1);
    }
    section.entries[key] = {raw.substr(vb, ve - vb), line_no, vb + 1};
  }
  return doc;
}

enum class DatasetKind { kMnist, kCifar10, kSynth };

inline const char* dataset_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::kMnist:
      return "mnist";
    case DatasetKind::kCifar10:
      return "cifar10";
    case DatasetKind::kSynth:
      return "synth";
  }
  return "?";
}

struct SynthConfig {
  std::size_t train_samples = 2000;
  std::size_t test_samples = 500;
  std::size_t dims = 16;
  std::size_t classes = 4;
  double separation = 6.0;
};

struct RunConfig {
  FederationMode mode = FederationMode::kPeerToPeer;
  DatasetKind dataset = DatasetKind::kSynth;
  std::size_t rounds = 5;
  std::uint64_t master_seed = 1;
  std::filesystem::path output_dir = "out";
  std::optional<double> subsample;
  std::optional<std::filesystem::path> data_dir;
  bool aggregator_trains = true;
  std::optional<NodeId> centralized_aggregator;
  bool parallel = false;
  DpGraph graph;
  MlpSpec model;
  TrainConfig train;
  std::optional<DpConfig> dp;
  SynthConfig synth;
};

namespace config_detail {

// Reads typed values out of one section and remembers which keys were used.
class SectionReader {
 public:
  SectionReader(const IniSection* section, std::string prefix)
      : section_(section), prefix_(std::move(prefix)) {}

  bool present() const { return section_ != nullptr; }

  const IniValue* find(const std::string& key) {
    if (section_ == nullptr) return nullptr;
    auto it = section_->entries.find(key);
    if (it == section_->entries.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  std::string field(const std::string& key) const { return prefix_ + key; }

  [[noreturn]] void fail(const IniValue& v, const std::string& key,
                         const std::string& what) const {
    throw ConfigError(field(key) + ": " + what, v.line, v.column);
  }

  template <typename T>
  void number(const std::string& key, T& out) {
    const IniValue* v = find(key);
    if (v == nullptr) return;
    T parsed{};
    const char* first = v->text.data();
    const char* last = first + v->text.size();
    auto [p, ec] = std::from_chars(first, last, parsed);
    if (ec != std::errc() || p != last) fail(*v, key, "expected a number, got `" + v->text + "`");
    out = parsed;
  }

  void boolean(const std::string& key, bool& out) {
    const IniValue* v = find(key);
    if (v == nullptr) return;
    if (v->text == "true" || v->text == "1") {
      out = true;
    } else if (v->text == "false" || v->text == "0") {
      out = false;
    } else {
      fail(*v, key, "expected true or false, got `" + v->text + "`");
    }
  }

  template <typename E>
  void choice(const std::string& key, E& out,
              std::initializer_list<std::pair<const char*, E>> options) {
    const IniValue* v = find(key);
    if (v == nullptr) return;
    std::string names;
    for (const auto& [name, value] : options) {
      if (v->text == name) {
        out = value;
        return;
      }
      names += names.empty() ? name : std::string(", ") + name;
    }
    fail(*v, key, "unknown value `" + v->text + "` (expected one of " + names + ")");
  }

  void reject_unknown() const {
    if (section_ == nullptr) return;
    for (const auto& [key, v] : section_->entries) {
      if (used_.count(key) == 0) {
        throw ConfigError("unknown key `" + field(key) + "`", v.line, v.column);
      }
    }
  }

 private:
  const IniSection* section_;
  std::string prefix_;
  std::set<std::string> used_;
};

inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss{std::string(text)};
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

inline std::size_t parse_index(const std::string& s, SectionReader& r,
                               const IniValue& v, const std::string& key) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
    r.fail(v, key, "bad node id `" + s + "`");
  }
  return out;
}

}  // namespace config_detail

// Parses and validates a run configuration. Lexical errors carry line and
// column; semantic errors name the offending field.
inline RunConfig parse_config(std::istream& in) {
  using config_detail::SectionReader;
  const IniDocument doc = parse_ini(in);
  for (const auto& [name, section] : doc) {
    static const std::set<std::string> known{"", "model", "train", "graph", "dp", "synth"};
    if (known.count(name) == 0) {
      throw ConfigError("unknown section [" + name + "]", section.line, 1);
    }
  }
  auto section = [&](const char* name) -> const IniSection* {
    auto it = doc.find(name);
    return it == doc.end() ? nullptr : &it->second;
  };

  RunConfig cfg;
  SectionReader top(section(""), "");
  top.choice("mode", cfg.mode,
             {{"centralized", FederationMode::kCentralized},
              {"peer_to_peer", FederationMode::kPeerToPeer}});
  top.choice("dataset", cfg.dataset,
             {{"mnist", DatasetKind::kMnist},
              {"cifar10", DatasetKind::kCifar10},
              {"synth", DatasetKind::kSynth}});
  top.number("rounds", cfg.rounds);
  top.number("master_seed", cfg.master_seed);
  if (const IniValue* v = top.find("output_dir")) cfg.output_dir = v->text;
  if (const IniValue* v = top.find("data_dir")) cfg.data_dir = v->text;
  if (top.find("subsample") != nullptr) {
    double f = 1.0;
    top.number("subsample", f);
    if (!(f > 0.0 && f <= 1.0)) top.fail(*top.find("subsample"), "subsample", "must lie in (0, 1]");
    cfg.subsample = f;
  }
  top.boolean("aggregator_trains", cfg.aggregator_trains);
  top.boolean("parallel", cfg.parallel);
  if (top.find("centralized_aggregator") != nullptr) {
    NodeId n = 0;
    top.number("centralized_aggregator", n);
    cfg.centralized_aggregator = n;
  }
  top.reject_unknown();

  SectionReader synth(section("synth"), "synth.");
  synth.number("train_samples", cfg.synth.train_samples);
  synth.number("test_samples", cfg.synth.test_samples);
  synth.number("dims", cfg.synth.dims);
  synth.number("classes", cfg.synth.classes);
  synth.number("separation", cfg.synth.separation);
  synth.reject_unknown();

  switch (cfg.dataset) {
    case DatasetKind::kMnist:
      cfg.model = {784, {128}, 10, Activation::kRelu};
      break;
    case DatasetKind::kCifar10:
      cfg.model = {3072, {256}, 10, Activation::kRelu};
      break;
    case DatasetKind::kSynth:
      cfg.model = {cfg.synth.dims, {16}, cfg.synth.classes, Activation::kRelu};
      break;
  }
  SectionReader model(section("model"), "model.");
  if (const IniValue* v = model.find("hidden")) {
    cfg.model.hidden_dims.clear();
    for (const auto& item : config_detail::split_list(v->text)) {
      std::size_t w = 0;
      auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), w);
      if (item.empty() || ec != std::errc() || p != item.data() + item.size() || w == 0) {
        model.fail(*v, "hidden", "expected a comma-separated list of positive widths");
      }
      cfg.model.hidden_dims.push_back(w);
    }
  }
  model.choice("activation", cfg.model.activation,
               {{"relu", Activation::kRelu}, {"tanh", Activation::kTanh}});
  model.reject_unknown();

  SectionReader train(section("train"), "train.");
  train.number("learning_rate", cfg.train.learning_rate);
  train.number("batch_size", cfg.train.batch_size);
  train.number("local_epochs", cfg.train.local_epochs);
  train.reject_unknown();
  if (!(cfg.train.learning_rate > 0.0)) throw ConfigError("train.learning_rate: must be > 0");
  if (cfg.train.batch_size == 0) throw ConfigError("train.batch_size: must be >= 1");
  if (cfg.train.local_epochs == 0) throw ConfigError("train.local_epochs: must be >= 1");

  SectionReader dp(section("dp"), "dp.");
  if (dp.present()) {
    DpConfig d;
    dp.number("clip_norm", d.clip_norm);
    dp.number("noise_multiplier", d.noise_multiplier);
    dp.number("delta", d.delta);
    dp.choice("clip_strategy", d.clip_strategy,
              {{"model_clip", ClipStrategy::kModelClip},
               {"difference_clip", ClipStrategy::kDifferenceClip}});
    dp.choice("order", d.order,
              {{"clip_then_noise", NoiseOrder::kClipThenNoise},
               {"noise_then_clip", NoiseOrder::kNoiseThenClip}});
    dp.choice("accountant", d.accountant,
              {{"gaussian_closed_form", Accountant::kGaussianClosedForm},
               {"basic_composition", Accountant::kBasicComposition}});
    dp.choice("granularity", d.granularity,
              {{"update", DpGranularity::kUpdate}, {"step", DpGranularity::kStep}});
    dp.reject_unknown();
    try {
      d.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    cfg.dp = d;
  }

  SectionReader graph(section("graph"), "graph.");
  if (!graph.present()) throw ConfigError("missing [graph] section");
  const IniValue* nodes_v = graph.find("nodes");
  if (nodes_v == nullptr) throw ConfigError("graph.nodes: required");
  std::size_t nodes = 0;
  graph.number("nodes", nodes);
  if (nodes == 0) graph.fail(*nodes_v, "nodes", "must be >= 1");

  std::vector<Edge> edges;
  const IniValue* topo = graph.find("topology");
  const IniValue* edges_v = graph.find("edges");
  if ((topo == nullptr) == (edges_v == nullptr)) {
    throw ConfigError("graph: give exactly one of `topology` or `edges`");
  }
  if (topo != nullptr) {
    DpGraph shape;
    if (topo->text == "complete") {
      shape = DpGraph::complete(nodes);
    } else if (topo->text == "path") {
      shape = DpGraph::path(nodes);
    } else if (topo->text == "star") {
      shape = DpGraph::star(nodes);
    } else {
      graph.fail(*topo, "topology", "unknown topology `" + topo->text +
                                        "` (expected complete, path or star)");
    }
    edges = shape.edges();
  } else {
    for (const auto& item : config_detail::split_list(edges_v->text)) {
      const auto dash = item.find('-');
      if (dash == std::string::npos) {
        graph.fail(*edges_v, "edges", "expected `a-b` pairs, got `" + item + "`");
      }
      const NodeId a = config_detail::parse_index(item.substr(0, dash), graph, *edges_v, "edges");
      const NodeId b = config_detail::parse_index(item.substr(dash + 1), graph, *edges_v, "edges");
      if (a >= nodes || b >= nodes) {
        graph.fail(*edges_v, "edges", "edge `" + item + "` names a node outside [0, " +
                                          std::to_string(nodes) + ")");
      }
      if (a == b) graph.fail(*edges_v, "edges", "self-loop `" + item + "`");
      edges.push_back({a, b});
    }
  }

  std::vector<bool> flags(nodes, false);
  if (const IniValue* v = graph.find("dp")) {
    if (v->text == "all") {
      flags.assign(nodes, true);
    } else if (v->text != "none") {
      const auto items = config_detail::split_list(v->text);
      if (items.size() != nodes) {
        graph.fail(*v, "dp", "expected " + std::to_string(nodes) +
                                 " per-node flags (or `all` / `none`), got " +
                                 std::to_string(items.size()));
      }
      for (std::size_t i = 0; i < nodes; ++i) {
        if (items[i] == "1" || items[i] == "true") {
          flags[i] = true;
        } else if (items[i] != "0" && items[i] != "false") {
          graph.fail(*v, "dp", "flag for node " + std::to_string(i) +
                                   " must be true/false/1/0");
        }
      }
    }
  }
  graph.reject_unknown();
  for (std::size_t i = 0; i < nodes; ++i) {
    if (flags[i] && !cfg.dp) {
      throw ConfigError("graph.dp: node " + std::to_string(i) +
                        " applies DP but the [dp] section is missing");
    }
  }
  cfg.graph = DpGraph(nodes, edges, flags);

  if (cfg.centralized_aggregator && *cfg.centralized_aggregator >= nodes) {
    throw ConfigError("centralized_aggregator: node " +
                      std::to_string(*cfg.centralized_aggregator) +
                      " is not in the graph");
  }
  if (cfg.rounds > 0 && cfg.graph.edge_count() == 0) {
    throw ConfigError("graph: at least one edge is needed to elect an aggregator");
  }
  if (cfg.dataset == DatasetKind::kSynth &&
      (cfg.synth.classes < 2 || cfg.synth.dims == 0 ||
       cfg.synth.train_samples < nodes || cfg.synth.test_samples == 0)) {
    throw ConfigError("synth: need classes >= 2, dims >= 1, train_samples >= nodes, test_samples >= 1");
  }
  return cfg;
}

inline RunConfig parse_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  try {
    return parse_config(in);
  } catch (const ConfigError& e) {
    throw e.in_context(file.string());
  }
}

}  // namespace p2pfl
