// Command-line front end for scenarios, training runs, sweeps and the
// oracle comparison.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "mecoff/harness.hpp"

namespace {

using namespace mecoff;

struct ScenarioFlags {
  std::string path;
  std::uint64_t scenario_seed = 1;
  bool desk = false;
  std::vector<std::string> sets;
};

void add_scenario_flags(CLI::App& cmd, ScenarioFlags& f) {
  cmd.add_option("--scenario", f.path, "Scenario file (otherwise defaults plus --set overrides)");
  cmd.add_option("--scenario-seed", f.scenario_seed, "Seed for generated channel matrices")->capture_default_str();
  cmd.add_flag("--desk", f.desk, "Start from the small instance the exact solver can handle");
  cmd.add_option("--set", f.sets, "Override a scenario field, e.g. --set n_bs=2 (repeatable)");
}

Overrides parse_sets(const std::vector<std::string>& sets) {
  Overrides o;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    o[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return o;
}

void apply(const ScenarioFlags& f, ExperimentConfig& cfg) {
  cfg.scenario_path = f.path;
  cfg.scenario_seed = f.scenario_seed;
  cfg.desk = f.desk;
  cfg.overrides = parse_sets(f.sets);
}

const std::map<std::string, PolicyKind> kPolicyNames = {
    {"local", PolicyKind::Local},   {"cloud", PolicyKind::Cloud}, {"greedy", PolicyKind::Greedy},
    {"tabular", PolicyKind::TabularGreedy}, {"dqn", PolicyKind::DqnGreedy}, {"oracle", PolicyKind::Oracle}};

const std::map<std::string, OptimizerKind> kOptimizerNames = {{"sgd", OptimizerKind::Sgd},
                                                              {"adam", OptimizerKind::Adam}};

struct RunFlags {
  std::vector<std::string> structures;
  std::string optimizer;
  std::vector<std::string> policies;
};

template <class T>
T lookup(const std::map<std::string, T>& names, const std::string& key) {
  return names.at(key);  // CLI::IsMember already vetted the key
}

std::vector<std::string> keys_of(const std::map<std::string, PolicyKind>& m) {
  std::vector<std::string> k;
  for (const auto& [name, kind] : m) k.push_back(name);
  return k;
}

void add_run_flags(CLI::App& cmd, ExperimentConfig& cfg, RunFlags& rf, bool seed_required = true) {
  auto* seed = cmd.add_option("--seed", cfg.seed, "Run seed (replicate r uses seed + r)");
  if (seed_required) seed->required();
  cmd.add_option("--epochs", cfg.epochs, "Epoch budget for DQN training and baseline runs")->capture_default_str();
  cmd.add_option("--tabular-epochs", cfg.tabular_epochs, "Epoch budget for tabular Q-learning")->capture_default_str();
  cmd.add_option("--eval-epochs", cfg.eval_epochs, "Simulated epochs to evaluate each final policy (0: skip)")
      ->capture_default_str();
  cmd.add_option("--replicates", cfg.replicates, "Independent training seeds per point")->capture_default_str();
  cmd.add_option("--out-dir", cfg.out_dir, "Directory for CSV outputs")->capture_default_str();
  cmd.add_option("--hidden", rf.structures, "Hidden layer widths, e.g. 128 or 64x64 (repeatable)");

  auto& d = cfg.dqn;
  cmd.add_option("--optimizer", rf.optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
  cmd.add_option("--lr", d.learning_rate, "DQN learning rate")->capture_default_str();
  cmd.add_option("--target-sync", d.target_sync, "Epochs between target-network syncs")->capture_default_str();
  cmd.add_option("--replay-capacity", d.replay_capacity, "Replay memory size")->capture_default_str();
  cmd.add_option("--batch-size", d.batch_size, "Mini-batch size")->capture_default_str();
  cmd.add_option("--epsilon-start", d.epsilon_start, "Initial exploration rate")->capture_default_str();
  cmd.add_option("--epsilon-end", d.epsilon_end, "Final exploration rate")->capture_default_str();
  cmd.add_option("--epsilon-anneal", d.epsilon_anneal_epochs, "Epochs of linear epsilon decay")
      ->capture_default_str();
  cmd.add_option("--cost-scale", d.cost_scale, "Multiplier from seconds to network units")->capture_default_str();

  auto& t = cfg.tabular;
  cmd.add_option("--lr-exponent", t.lr_exponent, "Tabular step size 1/(1+n)^w")->capture_default_str();
  cmd.add_option("--episode-length", t.episode_length, "Tabular restart period (0: one trajectory)")
      ->capture_default_str();
}

void finish(const RunFlags& rf, ExperimentConfig& cfg) {
  if (!rf.optimizer.empty()) cfg.dqn.optimizer = lookup(kOptimizerNames, rf.optimizer);
  if (!rf.policies.empty()) {
    cfg.policies.clear();
    for (const auto& p : rf.policies) cfg.policies.push_back(lookup(kPolicyNames, p));
  }
  if (!rf.structures.empty()) {
    cfg.structures.clear();
    for (const auto& s : rf.structures) cfg.structures.push_back(parse_hidden(s));
  }
}

void print_summary(const ExperimentResult& r) {
  std::printf("%-8s %6s %6s %-8s %5s %14s %14s\n", "policy", "lt", "le", "hidden", "seed", "train_avg", "eval_cost");
  for (const auto& row : r.rows)
    std::printf("%-8s %6g %6g %-8s %5llu %14.6g %14.6g\n", std::string(to_string(row.policy)).c_str(), row.task_rate,
                row.energy_rate, row.hidden.empty() ? "-" : row.hidden.c_str(),
                static_cast<unsigned long long>(row.seed), row.avg_cost, row.eval_cost);
  std::printf("summary: %s\n", r.summary_path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Computation-offloading MDP: scenarios, learners, baselines and exact oracle"};
  app.require_subcommand(1);

  // scenario
  ScenarioFlags sc_flags;
  std::string sc_out;
  bool sc_size = false;
  auto* scenario = app.add_subcommand("scenario", "Build, validate and write a scenario file");
  add_scenario_flags(*scenario, sc_flags);
  scenario->add_option("--out", sc_out, "Write the scenario here (default: stdout)");
  scenario->add_flag("--size", sc_size, "Print state-space sizes instead of the scenario");

  // train
  ExperimentConfig train_cfg;
  ScenarioFlags train_sc;
  RunFlags train_rf;
  std::string train_policy = "dqn";
  auto* train = app.add_subcommand("train", "Train (or run) one policy and write its metrics");
  add_scenario_flags(*train, train_sc);
  add_run_flags(*train, train_cfg, train_rf);
  train->add_option("--policy", train_policy, "dqn, tabular, local, cloud, greedy or oracle")
      ->check(CLI::IsMember(keys_of(kPolicyNames)))
      ->capture_default_str();
  train->add_flag("--checkpoint", train_cfg.save_checkpoints, "Save DQN weights next to the metrics");

  // sweep
  ExperimentConfig sweep_cfg;
  ScenarioFlags sweep_sc;
  RunFlags sweep_rf;
  auto* sweep = app.add_subcommand("sweep", "Grid over arrival rates, structures and policies");
  add_scenario_flags(*sweep, sweep_sc);
  add_run_flags(*sweep, sweep_cfg, sweep_rf);
  sweep->add_option("--policies", sweep_rf.policies, "Policies to run (default: dqn local cloud greedy)")
      ->check(CLI::IsMember(keys_of(kPolicyNames)));
  sweep->add_option("--task-rates", sweep_cfg.task_rates, "Task arrival probabilities");
  sweep->add_option("--energy-rates", sweep_cfg.energy_rates, "Mean energy arrivals per epoch");
  sweep->add_flag("--checkpoint", sweep_cfg.save_checkpoints, "Save DQN weights next to the metrics");

  // oracle-compare
  ExperimentConfig oc_cfg;
  ScenarioFlags oc_sc;
  RunFlags oc_rf;
  oc_cfg.policies = {PolicyKind::DqnGreedy, PolicyKind::TabularGreedy, PolicyKind::Local, PolicyKind::Cloud,
                     PolicyKind::Greedy};
  auto* oracle = app.add_subcommand("oracle-compare", "Average cost of every policy against the exact optimum");
  add_scenario_flags(*oracle, oc_sc);
  add_run_flags(*oracle, oc_cfg, oc_rf);
  oracle->add_option("--policies", oc_rf.policies, "Policies to compare (default: all)")
      ->check(CLI::IsMember(keys_of(kPolicyNames)));
  oracle->add_option("--task-rate", oc_cfg.task_rates, "Task arrival probability")->expected(1);
  oracle->add_option("--energy-rate", oc_cfg.energy_rates, "Mean energy arrivals per epoch")->expected(1);

  // baselines
  ExperimentConfig bl_cfg;
  ScenarioFlags bl_sc;
  RunFlags bl_rf;
  bl_cfg.policies = {PolicyKind::Local, PolicyKind::Cloud, PolicyKind::Greedy};
  auto* baselines = app.add_subcommand("baselines", "Run the Local, Cloud and Greedy policies");
  add_scenario_flags(*baselines, bl_sc);
  add_run_flags(*baselines, bl_cfg, bl_rf);
  baselines->add_option("--task-rates", bl_cfg.task_rates, "Task arrival probabilities");
  baselines->add_option("--energy-rates", bl_cfg.energy_rates, "Mean energy arrivals per epoch");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*scenario) {
      ExperimentConfig cfg;
      apply(sc_flags, cfg);
      validate(cfg);
      const auto spec = resolve_scenario(cfg);
      if (sc_size) {
        std::printf("states %llu\nextended_states %llu\nactions %zu\n",
                    static_cast<unsigned long long>(state_space_size(spec, false)),
                    static_cast<unsigned long long>(state_space_size(spec, true)),
                    action_count(spec.params.n_bs, spec.params.h_max));
      } else if (sc_out.empty()) {
        std::cout << to_text(spec);
      } else {
        save_scenario(spec, sc_out);
      }
    } else if (*train) {
      apply(train_sc, train_cfg);
      finish(train_rf, train_cfg);
      train_cfg.policies = {lookup(kPolicyNames, train_policy)};
      if (train_cfg.structures.size() != 1) throw ConfigError("train takes a single --hidden structure");
      print_summary(run_experiment(train_cfg));
    } else if (*sweep) {
      apply(sweep_sc, sweep_cfg);
      finish(sweep_rf, sweep_cfg);
      print_summary(run_experiment(sweep_cfg));
    } else if (*oracle) {
      apply(oc_sc, oc_cfg);
      oc_cfg.desk = oc_sc.path.empty();  // the comparison always starts from the desk instance
      finish(oc_rf, oc_cfg);
      const auto report = compare_to_oracle(oc_cfg);
      std::printf("%-8s %4s %14s %14s %10s %10s\n", "policy", "runs", "exact_cost", "sim_cost", "gap_exact",
                  "gap_sim");
      for (const auto& r : report.rows)
        std::printf("%-8s %4zu %14.6g %14.6g %9.2f%% %9.2f%%\n", std::string(to_string(r.policy)).c_str(),
                    r.exact_costs.size(), r.exact_cost, r.simulated_cost, 100.0 * r.gap_exact,
                    100.0 * r.gap_simulated);
      std::printf("report: %s\n", report.path.c_str());
    } else if (*baselines) {
      apply(bl_sc, bl_cfg);
      finish(bl_rf, bl_cfg);
      print_summary(run_experiment(bl_cfg));
    }
  } catch (const TrainingDiverged& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
