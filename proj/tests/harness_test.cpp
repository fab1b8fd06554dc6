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


#include "p2pfl/harness.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace p2pfl {
namespace {

namespace fs = std::filesystem;

RunConfig Parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

const char* kMinimal =
    "dataset = synth\n"
    "[graph]\n"
    "nodes = 3\n"
    "topology = complete\n";

std::vector<std::string> Lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(ConfigTest, Defaults) {
  const RunConfig c = Parse(kMinimal);
  EXPECT_EQ(c.mode, FederationMode::kPeerToPeer);
  EXPECT_EQ(c.rounds, 5u);
  EXPECT_EQ(c.graph.node_count(), 3u);
  EXPECT_EQ(c.graph.edge_count(), 3u);
  EXPECT_FALSE(c.dp.has_value());
  EXPECT_EQ(c.model.input_dim, 16u);
  EXPECT_EQ(c.model.output_dim, 4u);
  EXPECT_EQ(c.train.batch_size, 64u);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 0.05);
}

TEST(ConfigTest, DatasetDefaultsModelShape) {
  const RunConfig c = Parse("dataset = mnist\n[graph]\nnodes = 2\ntopology = path\n");
  EXPECT_EQ(c.model.param_count(), 101770u);
  const RunConfig d = Parse("dataset = cifar10\n[graph]\nnodes = 2\ntopology = path\n");
  EXPECT_EQ(d.model.input_dim, 3072u);
}

TEST(ConfigTest, FullDpSection) {
  const RunConfig c = Parse(
      "mode = centralized\nrounds = 0\n"
      "[graph]\nnodes = 4\nedges = 0-1, 1-2 ; comment\ndp = 1, 0, 1, 0\n"
      "[dp]\nclip_norm = 2\nnoise_multiplier = 1.5\norder = noise_then_clip\n"
      "accountant = basic_composition\nclip_strategy = model_clip\n");
  EXPECT_EQ(c.rounds, 0u);
  EXPECT_EQ(c.graph.dp_flags(), (std::vector<bool>{true, false, true, false}));
  ASSERT_TRUE(c.dp.has_value());
  EXPECT_EQ(c.dp->clip_norm, 2.0);
  EXPECT_EQ(c.dp->noise_multiplier, 1.5);
  EXPECT_EQ(c.dp->order, NoiseOrder::kNoiseThenClip);
  EXPECT_EQ(c.dp->accountant, Accountant::kBasicComposition);
  EXPECT_EQ(c.dp->clip_strategy, ClipStrategy::kModelClip);
  EXPECT_TRUE(c.graph.adjacent(1, 2));
  EXPECT_FALSE(c.graph.adjacent(2, 3));
}

void ExpectConfigError(const std::string& text, std::size_t line, const std::string& needle) {
  try {
    Parse(text);
    ADD_FAILURE() << "accepted:\n" << text;
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(ConfigTest, ErrorsCarryLineNumbers) {
  ExpectConfigError(std::string(kMinimal) + "colour = blue\n", 5, "colour");
  ExpectConfigError("rounds = five\n[graph]\nnodes = 2\ntopology = path\n", 1, "rounds");
  ExpectConfigError("[graph]\nnodes = 2\ntopology = ring\n", 3, "topology");
  ExpectConfigError("[graph]\nnodes = 2\nnodes = 3\ntopology = path\n", 3, "nodes");
  ExpectConfigError("[graph\n", 1, "");
  ExpectConfigError("[bogus]\nx = 1\n", 1, "bogus");
  ExpectConfigError("[graph]\nnodes = 3\nedges = 0-5\n", 3, "edges");
  ExpectConfigError("[graph]\nnodes = 3\nedges = 0-0\n", 3, "edges");
}

TEST(ConfigTest, DpNodesNeedADpSection) {
  try {
    Parse("[graph]\nnodes = 2\ntopology = path\ndp = all\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("[dp] section is missing"), std::string::npos);
  }
  EXPECT_THROW(Parse("[graph]\nnodes = 2\ntopology = path\ndp = 1, 0, 1\n"), ConfigError);
}

TEST(ConfigTest, ShippedConfigsParse) {
  const char* dir = std::getenv("P2PFL_CONFIG_DIR");
  if (dir == nullptr) GTEST_SKIP();
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".ini") continue;
    EXPECT_NO_THROW(parse_config(entry.path())) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 12u);
}

std::vector<RoundRecord> SampleRecords() {
  std::vector<RoundRecord> r;
  r.push_back({2, 3, Role::kDnp, std::nullopt, std::nullopt, 0.0});
  r.push_back({0, 0, Role::kAggregator, 1.25, 0.5, kUnboundedEpsilon});
  r.push_back({0, 1, Role::kProvider, 1.25, 0.5, 2.5908});
  r.push_back({2, 1, Role::kAggregator, 0.123456789, 0.9, 3.0});
  return r;
}

TEST(TablesTest, ClientTableFormat) {
  std::ostringstream out;
  emit_client_table(SampleRecords(), out);
  EXPECT_EQ(Lines(out.str()), (std::vector<std::string>{
                                  "round,node_id,role,loss,accuracy,epsilon",
                                  "1,0,aggregator,1.25,0.5,",
                                  "1,1,provider,1.25,0.5,2.5908",
                                  "3,1,aggregator,0.123457,0.9,3",
                                  "3,3,dnp,,,0",
                              }));
}

TEST(TablesTest, ServerAndWideTables) {
  std::ostringstream server;
  emit_server_table(SampleRecords(), server);
  EXPECT_EQ(Lines(server.str()), (std::vector<std::string>{"round,aggregator_id,accuracy,loss",
                                                           "1,0,0.5,1.25", "3,1,0.9,0.123457"}));
  std::ostringstream wide;
  emit_wide_client_table(SampleRecords(), 4, wide);
  const auto lines = Lines(wide.str());
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[1], "1,1.25*,0.5*,1.25,0.5,DNP,DNP,DNP,DNP");
  EXPECT_EQ(lines[2], "3,DNP,DNP,0.123457*,0.9*,DNP,DNP,DNP,DNP");
}

TEST(TablesTest, ReadBackAndCompare) {
  std::stringstream client;
  emit_client_table(SampleRecords(), client);
  const MetricsTable t = read_metrics_table(client);
  ASSERT_EQ(t.kind, MetricsTable::Kind::kClient);
  ASSERT_EQ(t.clients.size(), 4u);
  EXPECT_FALSE(t.clients[0].epsilon.has_value());
  EXPECT_FALSE(t.clients[3].accuracy.has_value());
  const auto acc = round_accuracy(t);
  EXPECT_DOUBLE_EQ(acc.at(1), 0.5);
  EXPECT_DOUBLE_EQ(acc.at(3), 0.9);
  for (const auto& d : compare_tables(t, t)) EXPECT_EQ(d.delta, 0.0);

  std::stringstream server;
  emit_server_table(SampleRecords(), server);
  const MetricsTable s = read_metrics_table(server);
  EXPECT_EQ(s.kind, MetricsTable::Kind::kServer);
  ASSERT_EQ(s.servers.size(), 2u);
  EXPECT_EQ(s.servers[1].aggregator_id, 1u);

  std::stringstream junk("foo,bar\n1,2\n");
  EXPECT_THROW(read_metrics_table(junk), Error);
  std::stringstream bad_row(std::string(kClientHeader) + "\n1,0,aggregator,x,0.5,\n");
  EXPECT_THROW(read_metrics_table(bad_row), Error);
}

TEST(TablesTest, PlotIsAnSvgDocument) {
  std::stringstream server;
  emit_server_table(SampleRecords(), server);
  std::ostringstream svg;
  emit_plot_svg(read_metrics_table(server), svg);
  EXPECT_EQ(svg.str().rfind("<svg", 0), 0u);
  EXPECT_NE(svg.str().find("</svg>"), std::string::npos);
}

TEST(ExecuteTest, P2pSynthRunWritesBothTables) {
  RunConfig c = Parse(std::string(kMinimal));
  c.graph = DpGraph::path(5);
  c.output_dir = fs::temp_directory_path() / "p2pfl_execute_test";
  fs::remove_all(c.output_dir);
  const RunOutputs o = execute(c, true);
  const auto client = Lines(Slurp(o.client_csv));
  ASSERT_EQ(client.size(), 26u);
  for (std::size_t i = 1; i < client.size(); ++i) {
    const auto cells = harness_detail::split_csv(client[i]);
    ASSERT_EQ(cells.size(), 6u) << client[i];
    if (cells[2] == "dnp") EXPECT_EQ(client[i], cells[0] + "," + cells[1] + ",dnp,,,");
  }
  const auto server = Lines(Slurp(o.server_csv));
  ASSERT_EQ(server.size(), 6u);
  EXPECT_TRUE(o.wide_csv && fs::exists(*o.wide_csv));
  fs::remove_all(c.output_dir);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const char* cli = std::getenv("P2PFL_CLI");
    const char* configs = std::getenv("P2PFL_CONFIG_DIR");
    if (cli == nullptr || configs == nullptr) GTEST_SKIP() << "CLI location not provided";
    cli_ = cli;
    configs_ = configs;
    tmp_ = fs::temp_directory_path() / ("p2pfl_cli_" + std::string(
        ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(tmp_);
    fs::create_directories(tmp_);
  }
  void TearDown() override {
    if (!tmp_.empty()) fs::remove_all(tmp_);
  }

  int Run(const std::string& args) const {
    const std::string cmd = "\"" + cli_ + "\" " + args + " > \"" + (tmp_ / "log").string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path Write(const std::string& name, const std::string& text) const {
    std::ofstream(tmp_ / name) << text;
    return tmp_ / name;
  }

  std::string cli_;
  fs::path configs_;
  fs::path tmp_;
};

TEST_F(CliTest, ValidateShippedDefault) {
  EXPECT_EQ(Run("validate \"" + (configs_ / "default.ini").string() + "\""), 0) << Slurp(tmp_ / "log");
}

TEST_F(CliTest, RunComparePlot) {
  const fs::path good = Write("good.ini", "rounds = 2\ndataset = synth\n[graph]\nnodes = 3\ntopology = path\n");
  ASSERT_EQ(Run("run \"" + good.string() + "\" --out \"" + (tmp_ / "a").string() + "\""), 0)
      << Slurp(tmp_ / "log");
  EXPECT_TRUE(fs::exists(tmp_ / "a" / "clients.csv"));
  EXPECT_TRUE(fs::exists(tmp_ / "a" / "server.csv"));
  EXPECT_EQ(Lines(Slurp(tmp_ / "a" / "server.csv")).size(), 3u);
  ASSERT_EQ(Run("run \"" + good.string() + "\" --seed 9 --out \"" + (tmp_ / "b").string() + "\""), 0);
  EXPECT_EQ(Run("compare \"" + (tmp_ / "a" / "server.csv").string() + "\" \"" +
                (tmp_ / "b" / "server.csv").string() + "\" --out \"" + (tmp_ / "cmp.csv").string() + "\""),
            0);
  EXPECT_EQ(Lines(Slurp(tmp_ / "cmp.csv")).size(), 3u);
  EXPECT_EQ(Run("plot \"" + (tmp_ / "a" / "clients.csv").string() + "\" --out \"" +
                (tmp_ / "p.svg").string() + "\""),
            0);
  EXPECT_TRUE(fs::exists(tmp_ / "p.svg"));
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(Run(""), 1);
  EXPECT_EQ(Run("run"), 1);
  EXPECT_EQ(Run("validate \"" + Write("bad.ini", "[graph]\nnodes = x\n").string() + "\""), 2);
  EXPECT_EQ(Run("validate \"" + (tmp_ / "missing.ini").string() + "\""), 2);
  const fs::path mnist = Write(
      "mnist.ini", "dataset = mnist\ndata_dir = " + (tmp_ / "nodata").string() +
                       "\n[graph]\nnodes = 2\ntopology = path\n");
  EXPECT_EQ(Run("run \"" + mnist.string() + "\""), 3);
  const std::string log = Slurp(tmp_ / "log");
  EXPECT_NE(log.find("train-images-idx3-ubyte"), std::string::npos) << log;
}

}  // namespace
}  // namespace p2pfl
