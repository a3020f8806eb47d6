#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mecoff/harness.hpp"

namespace mecoff {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

ExperimentConfig tiny(const std::string& dir) {
  ExperimentConfig cfg;
  cfg.desk = true;
  cfg.epochs = 400;
  cfg.tabular_epochs = 400;
  cfg.eval_epochs = 2000;
  cfg.dqn.replay_capacity = 100;
  cfg.dqn.batch_size = 20;
  cfg.structures = {{8}};
  cfg.out_dir = (fs::path(::testing::TempDir()) / dir).string();
  fs::remove_all(cfg.out_dir);
  return cfg;
}

TEST(Harness, ParseHidden) {
  EXPECT_EQ(parse_hidden("128"), (std::vector<std::size_t>{128}));
  EXPECT_EQ(parse_hidden("64x32x16"), (std::vector<std::size_t>{64, 32, 16}));
  EXPECT_THROW(parse_hidden(""), ConfigError);
  EXPECT_THROW(parse_hidden("64x"), ConfigError);
  EXPECT_THROW(parse_hidden("0"), ConfigError);
  EXPECT_EQ(hidden_label({64, 32}), "64x32");
}

TEST(Harness, ConfigValidation) {
  auto cfg = tiny("validation");
  cfg.policies.clear();
  EXPECT_THROW(run_experiment(cfg), ConfigError);
  cfg = tiny("validation");
  cfg.replicates = 0;
  EXPECT_THROW(run_experiment(cfg), ConfigError);
  cfg = tiny("validation");
  cfg.scenario_path = "x.txt";
  EXPECT_THROW(run_experiment(cfg), ConfigError);
  cfg = tiny("validation");
  cfg.energy_rates = {-1.0};
  EXPECT_THROW(run_experiment(cfg), ScenarioError);
}

TEST(Harness, SweepWritesOneCsvPerRunAndSummary) {
  auto cfg = tiny("sweep");
  cfg.task_rates = {0.3, 0.5};
  cfg.energy_rates = {0.2, 1.0};
  cfg.structures = {{8}, {4, 4}};
  const auto result = run_experiment(cfg);
  // per rate pair: dqn x 2 structures + 3 baselines
  ASSERT_EQ(result.rows.size(), 4u * 5u);
  const auto summary = read_csv(result.summary_path);
  ASSERT_EQ(summary.size(), 21u);
  EXPECT_EQ(slurp(result.summary_path).substr(0, std::string(kSummaryHeader).size()), kSummaryHeader);
  for (const auto& row : result.rows) {
    const auto path = fs::path(cfg.out_dir) / row.metrics_file;
    ASSERT_TRUE(fs::exists(path)) << path;
    const auto csv = read_csv(path);
    ASSERT_EQ(csv.size(), cfg.epochs + 1);
    EXPECT_EQ(csv.front().size(), 11u);
    EXPECT_FALSE(std::isnan(row.eval_cost));
  }
  EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "dqn_lt0.3_le0.2_h4x4_s1.csv"));
  EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "local_lt0.5_le1_s1.csv"));
}

TEST(Harness, RunsAreDeterministicPerSeed) {
  auto a = tiny("det_a");
  auto b = tiny("det_b");
  a.policies = b.policies = {PolicyKind::DqnGreedy, PolicyKind::Greedy, PolicyKind::TabularGreedy};
  const auto ra = run_experiment(a);
  const auto rb = run_experiment(b);
  for (std::size_t i = 0; i < ra.rows.size(); ++i)
    EXPECT_EQ(slurp(fs::path(a.out_dir) / ra.rows[i].metrics_file), slurp(fs::path(b.out_dir) / rb.rows[i].metrics_file));
  EXPECT_EQ(slurp(ra.summary_path), slurp(rb.summary_path));
}

TEST(Harness, EmittedRowsSatisfyPrefixMeanAndDecomposition) {
  auto cfg = tiny("identities");
  cfg.policies = {PolicyKind::DqnGreedy, PolicyKind::Cloud, PolicyKind::TabularGreedy, PolicyKind::Oracle};
  const auto spec = desk_scenario();
  const double handover_cost = spec.params.handover_weight * spec.params.handover_delay_s;
  for (const auto& row : run_experiment(cfg).rows) {
    const auto csv = read_csv(fs::path(cfg.out_dir) / row.metrics_file);
    double sum_cost = 0.0, sum_delay = 0.0, sum_ho = 0.0, sum_drop = 0.0;
    for (std::size_t i = 1; i < csv.size(); ++i) {
      const auto& c = csv[i];
      sum_cost += std::stod(c[1]);
      sum_delay += std::stod(c[2]);
      sum_ho += std::stod(c[3]);
      sum_drop += std::stod(c[4]);
      const double n = static_cast<double>(i);
      ASSERT_NEAR(std::stod(c[5]), sum_cost / n, 1e-9);
      ASSERT_NEAR(std::stod(c[6]), sum_delay / n, 1e-9);
      ASSERT_NEAR(std::stod(c[7]), sum_ho / n, 1e-9);
      ASSERT_NEAR(std::stod(c[8]), sum_drop / n, 1e-9);
      ASSERT_NEAR(std::stod(c[5]),
                  std::stod(c[6]) + handover_cost * std::stod(c[7]) + spec.params.drop_weight * std::stod(c[8]), 1e-9);
    }
  }
}

TEST(Harness, ZeroEpochBudgetIsGraceful) {
  auto cfg = tiny("zero");
  cfg.epochs = 0;
  cfg.tabular_epochs = 0;
  cfg.policies = {PolicyKind::DqnGreedy, PolicyKind::Local, PolicyKind::TabularGreedy};
  const auto result = run_experiment(cfg);
  ASSERT_EQ(result.rows.size(), 3u);
  for (const auto& row : result.rows) {
    EXPECT_EQ(row.epochs, 0u);
    EXPECT_TRUE(std::isnan(row.eval_cost));
    const auto csv = read_csv(fs::path(cfg.out_dir) / row.metrics_file);
    EXPECT_EQ(csv.size(), 1u);  // header only
  }
  const auto summary = read_csv(result.summary_path);
  EXPECT_EQ(summary[1][6], "");
}

TEST(Harness, DivergencePropagates) {
  auto cfg = tiny("diverge");
  cfg.epochs = 2000;
  cfg.dqn.learning_rate = 50.0;
  cfg.policies = {PolicyKind::DqnGreedy};
  EXPECT_THROW(run_experiment(cfg), TrainingDiverged);
}

TEST(Harness, CheckpointsWrittenOnRequest) {
  auto cfg = tiny("ckpt");
  cfg.policies = {PolicyKind::DqnGreedy};
  cfg.save_checkpoints = true;
  run_experiment(cfg);
  const auto path = fs::path(cfg.out_dir) / "dqn_lt0.6_le0.5_h8_s1.qnet";
  ASSERT_TRUE(fs::exists(path));
  EXPECT_EQ(load_checkpoint<float>(path.string()).sizes(), (std::vector<std::size_t>{7, 8, 12}));
}

TEST(Harness, ScenarioFileDrivesTheRun) {
  auto cfg = tiny("from_file");
  fs::create_directories(cfg.out_dir);
  const auto path = (fs::path(cfg.out_dir) / "scenario.txt").string();
  save_scenario(desk_scenario(4, {{"task_rate", "0.3"}}), path);
  cfg.desk = false;
  cfg.scenario_path = path;
  cfg.policies = {PolicyKind::Local};
  const auto result = run_experiment(cfg);
  ASSERT_EQ(result.rows.size(), 1u);
  EXPECT_EQ(result.rows[0].task_rate, 0.3);
}

TEST(OracleCompare, OracleBeatsEveryPolicy) {
  auto cfg = tiny("oracle");
  cfg.policies = {PolicyKind::DqnGreedy, PolicyKind::TabularGreedy, PolicyKind::Local, PolicyKind::Cloud,
                  PolicyKind::Greedy};
  cfg.replicates = 2;
  const auto report = compare_to_oracle(cfg);
  ASSERT_EQ(report.rows.size(), 6u);
  EXPECT_EQ(report.rows.front().policy, PolicyKind::Oracle);
  for (const auto& r : report.rows) {
    EXPECT_GE(r.gap_exact, -1e-12) << to_string(r.policy);
    EXPECT_EQ(r.exact_costs.size(), r.policy == PolicyKind::DqnGreedy || r.policy == PolicyKind::TabularGreedy ? 2u : 1u);
  }
  EXPECT_EQ(read_csv(report.path).size(), 7u);
  EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "oracle_values.csv"));
}

TEST(OracleCompare, RefusesFullScale) {
  auto cfg = tiny("oracle_big");
  cfg.desk = false;
  EXPECT_THROW(compare_to_oracle(cfg), StateSpaceTooLarge);
}

}  // namespace
}  // namespace mecoff
