#pragma once

// Experiment driver behind the command-line tool: resolves the scenario,
// runs every (policy, sweep point, seed) combination, writes one metrics
// CSV per run plus a summary CSV, and compares learners to the exact
// optimum on small instances.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mecoff/baselines.hpp"
#include "mecoff/dqn.hpp"
#include "mecoff/exact_solver.hpp"
#include "mecoff/metrics.hpp"
#include "mecoff/simulation.hpp"
#include "mecoff/tabular_q.hpp"

namespace mecoff {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  // Scenario: a file, or defaults (optionally the desk instance) plus overrides.
  std::string scenario_path;
  std::uint64_t scenario_seed = 1;
  bool desk = false;
  Overrides overrides;

  std::vector<PolicyKind> policies = {PolicyKind::DqnGreedy, PolicyKind::Local, PolicyKind::Cloud,
                                      PolicyKind::Greedy};
  std::uint64_t epochs = 100'000;          // DQN training and baseline metric runs
  std::uint64_t tabular_epochs = 500'000;  // tabular Q-learning budget
  std::uint64_t eval_epochs = 200'000;     // simulated evaluation of each final policy
  DqnConfig dqn;                           // epochs, hidden and seed are set per run
  TabularConfig tabular;                   // epochs and seed are set per run

  // Sweep axes; empty rate lists mean "the scenario's own rate".
  std::vector<double> task_rates;
  std::vector<double> energy_rates;
  std::vector<std::vector<std::size_t>> structures = {{128}};

  std::uint64_t seed = 1;        // replicate r trains with seed + r; evaluation always uses seed
  std::uint64_t replicates = 1;
  std::string out_dir = "results";
  bool save_checkpoints = false;
};

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.policies.empty()) throw ConfigError("at least one policy is required");
  if (cfg.structures.empty()) throw ConfigError("at least one network structure is required");
  for (const auto& h : cfg.structures)
    for (auto w : h)
      if (w == 0) throw ConfigError("hidden layer widths must be positive");
  if (cfg.replicates == 0) throw ConfigError("replicates must be >= 1");
  if (cfg.out_dir.empty()) throw ConfigError("output directory must not be empty");
  if (!cfg.scenario_path.empty() && (cfg.desk || !cfg.overrides.empty()))
    throw ConfigError("a scenario file cannot be combined with --desk or overrides");
}

inline ScenarioSpec resolve_scenario(const ExperimentConfig& cfg) {
  if (!cfg.scenario_path.empty()) return load_scenario(cfg.scenario_path);
  return build_scenario(cfg.scenario_seed, cfg.desk ? desk_overrides(cfg.overrides) : cfg.overrides);
}

inline ScenarioSpec with_rates(ScenarioSpec spec, double task_rate, double energy_rate) {
  spec.arrivals.task_rate = task_rate;
  spec.arrivals.energy_rate = energy_rate;
  validate(spec);
  return spec;
}

inline std::string hidden_label(const std::vector<std::size_t>& hidden) {
  std::string s;
  for (std::size_t i = 0; i < hidden.size(); ++i) s += (i ? "x" : "") + std::to_string(hidden[i]);
  return s;
}

/// "64x64" -> {64, 64}.
inline std::vector<std::size_t> parse_hidden(std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find('x', start), text.size());
    const auto tok = text.substr(start, end - start);
    std::size_t w = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), w);
    if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size() || w == 0)
      throw ConfigError("bad network structure '" + std::string(text) + "' (expected e.g. 128 or 64x64)");
    out.push_back(w);
    start = end + 1;
  }
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Per-epoch metrics of a fixed policy over the same draws that
/// simulate_average_cost uses for this seed.
template <StatePolicy Policy>
std::vector<MetricsRow> record_policy_run(const ScenarioSpec& spec, Policy&& policy, std::uint64_t epochs,
                                          std::uint64_t seed) {
  Environment env(spec, Rng(seed, 7));
  MetricsRecorder rec;
  for (std::uint64_t k = 0; k < epochs; ++k) rec.record(env.step(policy(env.state())).cost);
  return rec.take();
}

struct SummaryRow {
  PolicyKind policy = PolicyKind::Local;
  double task_rate = 0.0;
  double energy_rate = 0.0;
  std::string hidden;  // empty for policies without a network
  std::uint64_t seed = 0;
  std::uint64_t epochs = 0;
  double avg_cost = std::numeric_limits<double>::quiet_NaN();
  double avg_exec_delay = std::numeric_limits<double>::quiet_NaN();
  double avg_handover = std::numeric_limits<double>::quiet_NaN();
  double avg_drop = std::numeric_limits<double>::quiet_NaN();
  double eval_cost = std::numeric_limits<double>::quiet_NaN();
  double eval_half_width = std::numeric_limits<double>::quiet_NaN();
  std::string metrics_file;
};

inline constexpr const char* kSummaryHeader =
    "policy,task_rate,energy_rate,hidden,seed,epochs,avg_cost,avg_exec_delay,avg_handover_count,avg_drop_count,"
    "eval_cost,eval_half_width,metrics_file";

inline void write_summary_csv(const std::string& path, std::span<const SummaryRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.policy) << ',' << csv_number(r.task_rate) << ',' << csv_number(r.energy_rate) << ','
        << r.hidden << ',' << r.seed << ',' << r.epochs << ',' << csv_number(r.avg_cost) << ','
        << csv_number(r.avg_exec_delay) << ',' << csv_number(r.avg_handover) << ',' << csv_number(r.avg_drop) << ','
        << csv_number(r.eval_cost) << ',' << csv_number(r.eval_half_width) << ',' << r.metrics_file << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

/// Result of one policy run at one sweep point.
struct RunOutput {
  SummaryRow summary;
  std::vector<MetricsRow> metrics;
  std::optional<QNetwork<float>> network;
  std::optional<PolicyTable> table;  // enumerated policy, when the state space allows it
};

/// Trains or instantiates `kind` on `spec`, records its per-epoch metrics
/// and evaluates the final policy by simulation.
inline RunOutput run_policy(const ScenarioSpec& spec, PolicyKind kind, const std::vector<std::size_t>& hidden,
                            std::uint64_t train_seed, const ExperimentConfig& cfg) {
  RunOutput out;
  auto& row = out.summary;
  row.policy = kind;
  row.task_rate = spec.arrivals.task_rate;
  row.energy_rate = spec.arrivals.energy_rate;
  row.seed = train_seed;

  std::function<Action(const NetworkState&)> policy;
  switch (kind) {
    case PolicyKind::Local:
    case PolicyKind::Cloud:
    case PolicyKind::Greedy:
      policy = [&spec, kind](const NetworkState& s) { return baseline_action(kind, s, spec); };
      out.metrics = record_policy_run(spec, policy, cfg.epochs, train_seed);
      row.epochs = cfg.epochs;
      break;
    case PolicyKind::Oracle: {
      MdpModel model(spec);
      auto table = greedy_policy(model, value_iteration(model).values);
      out.table = table;
      policy = [space = StateSpace(spec), table = std::move(table)](const NetworkState& s) {
        return table[space.index_of(s)];
      };
      out.metrics = record_policy_run(spec, policy, cfg.epochs, train_seed);
      row.epochs = cfg.epochs;
      break;
    }
    case PolicyKind::TabularGreedy: {
      auto tcfg = cfg.tabular;
      tcfg.epochs = cfg.tabular_epochs;
      tcfg.seed = train_seed;
      tcfg.record_metrics = true;
      auto result = train_tabular(spec, tcfg);
      out.metrics = std::move(result.metrics);
      auto table = result.table.greedy_policy();
      out.table = table;
      policy = [space = StateSpace(spec), table = std::move(table)](const NetworkState& s) {
        return table[space.index_of(s)];
      };
      row.epochs = tcfg.epochs;
      break;
    }
    case PolicyKind::DqnGreedy: {
      auto dcfg = cfg.dqn;
      dcfg.epochs = cfg.epochs;
      dcfg.hidden = hidden;
      dcfg.seed = train_seed;
      auto result = train_dqn(spec, dcfg);
      if (result.diverged) throw TrainingDiverged(result.report);
      out.metrics = std::move(result.metrics);
      out.network = std::move(result.online);
      row.hidden = hidden_label(hidden);
      row.epochs = result.epochs_run;
      policy = [&spec, net = *out.network](const NetworkState& s) { return dqn_greedy_action(net, s, spec); };
      if (state_space_size(spec, true) <= kMaxEnumerableStates) out.table = tabulate(StateSpace(spec), policy);
      break;
    }
  }

  if (!out.metrics.empty()) {
    const auto& last = out.metrics.back();
    row.avg_cost = last.avg_cost;
    row.avg_exec_delay = last.avg_exec_delay;
    row.avg_handover = last.avg_handover;
    row.avg_drop = last.avg_drop;
  }
  if (row.epochs > 0 && cfg.eval_epochs > 0) {
    const auto est = simulate_average_cost(spec, policy, cfg.eval_epochs, cfg.seed);
    row.eval_cost = est.cost;
    row.eval_half_width = est.half_width;
  }
  return out;
}

inline std::string run_stem(const SummaryRow& r) {
  std::string stem = std::string(to_string(r.policy)) + "_lt" + detail::format_double(r.task_rate) + "_le" +
                     detail::format_double(r.energy_rate);
  if (!r.hidden.empty()) stem += "_h" + r.hidden;
  return stem + "_s" + std::to_string(r.seed);
}

struct ExperimentResult {
  std::vector<SummaryRow> rows;
  std::string summary_path;
};

/// Runs the full grid. Policies without a network run once per
/// (rates, seed); DQN runs once per structure as well.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto base = resolve_scenario(cfg);
  const std::vector<double> task_rates = cfg.task_rates.empty() ? std::vector{base.arrivals.task_rate} : cfg.task_rates;
  const std::vector<double> energy_rates =
      cfg.energy_rates.empty() ? std::vector{base.arrivals.energy_rate} : cfg.energy_rates;

  std::filesystem::create_directories(cfg.out_dir);
  ExperimentResult result;
  for (double lt : task_rates) {
    for (double le : energy_rates) {
      const auto spec = with_rates(base, lt, le);
      for (std::uint64_t r = 0; r < cfg.replicates; ++r) {
        for (auto kind : cfg.policies) {
          const bool networked = kind == PolicyKind::DqnGreedy;
          const auto n_struct = networked ? cfg.structures.size() : 1;
          for (std::size_t h = 0; h < n_struct; ++h) {
            auto run = run_policy(spec, kind, cfg.structures[h], cfg.seed + r, cfg);
            const auto stem = run_stem(run.summary);
            const auto path = (std::filesystem::path(cfg.out_dir) / (stem + ".csv")).string();
            write_metrics_csv(path, run.metrics);
            run.summary.metrics_file = stem + ".csv";
            if (cfg.save_checkpoints && run.network)
              save_checkpoint(*run.network, (std::filesystem::path(cfg.out_dir) / (stem + ".qnet")).string());
            result.rows.push_back(std::move(run.summary));
          }
        }
      }
    }
  }
  result.summary_path = (std::filesystem::path(cfg.out_dir) / "summary.csv").string();
  write_summary_csv(result.summary_path, result.rows);
  return result;
}

struct OracleRow {
  PolicyKind policy = PolicyKind::Oracle;
  std::vector<double> exact_costs;      // stationary average cost per replicate
  std::vector<double> simulated_costs;  // simulated average cost per replicate
  double exact_cost = 0.0;              // medians over replicates
  double simulated_cost = 0.0;
  double half_width = 0.0;  // median of the replicates' confidence half-widths
  double gap_exact = 0.0;   // relative to the oracle
  double gap_simulated = 0.0;
};

struct OracleReport {
  std::vector<OracleRow> rows;  // oracle first
  std::string path;
  const OracleRow& row(PolicyKind k) const {
    for (const auto& r : rows)
      if (r.policy == k) return r;
    throw std::out_of_range("no report row for policy " + std::string(to_string(k)));
  }
};

/// Average cost of every policy next to the exact optimum. Deterministic
/// policies run once; learners run `replicates` times and report medians.
/// All simulations share the evaluation seed, so the comparison uses
/// common random numbers.
inline OracleReport compare_to_oracle(const ExperimentConfig& cfg) {
  validate(cfg);
  auto spec = resolve_scenario(cfg);
  if (!cfg.task_rates.empty() || !cfg.energy_rates.empty())
    spec = with_rates(spec, cfg.task_rates.empty() ? spec.arrivals.task_rate : cfg.task_rates.front(),
                      cfg.energy_rates.empty() ? spec.arrivals.energy_rate : cfg.energy_rates.front());
  MdpModel model(spec);  // throws StateSpaceTooLarge beyond desk scale
  const auto eval_epochs = cfg.eval_epochs > 0 ? cfg.eval_epochs : 200'000;

  std::vector<PolicyKind> kinds{PolicyKind::Oracle};
  for (auto k : cfg.policies)
    if (k != PolicyKind::Oracle) kinds.push_back(k);

  OracleReport report;
  std::filesystem::create_directories(cfg.out_dir);
  for (auto kind : kinds) {
    OracleRow row;
    row.policy = kind;
    const bool learner = kind == PolicyKind::DqnGreedy || kind == PolicyKind::TabularGreedy;
    std::vector<double> half_widths;
    for (std::uint64_t r = 0; r < (learner ? cfg.replicates : 1); ++r) {
      PolicyTable table;
      if (learner) {
        auto lcfg = cfg;
        lcfg.eval_epochs = 0;
        table = *run_policy(spec, kind, cfg.structures.front(), cfg.seed + r, lcfg).table;
      } else if (kind == PolicyKind::Oracle) {
        const auto vt = value_iteration(model);
        table = greedy_policy(model, vt.values);
        write_value_csv((std::filesystem::path(cfg.out_dir) / "oracle_values.csv").string(), model, vt.values,
                        table);
      } else {
        table = tabulate(model.space(), [&](const NetworkState& s) { return baseline_action(kind, s, spec); });
      }
      row.exact_costs.push_back(stationary_average_cost(model, table));
      const auto est = simulate_average_cost(
          spec, [&](const NetworkState& s) { return table[model.space().index_of(s)]; }, eval_epochs, cfg.seed);
      row.simulated_costs.push_back(est.cost);
      half_widths.push_back(est.half_width);
    }
    row.exact_cost = median(row.exact_costs);
    row.simulated_cost = median(row.simulated_costs);
    row.half_width = median(half_widths);
    report.rows.push_back(std::move(row));
  }
  const auto& oracle = report.rows.front();
  for (auto& r : report.rows) {
    r.gap_exact = r.exact_cost / oracle.exact_cost - 1.0;
    r.gap_simulated = r.simulated_cost / oracle.simulated_cost - 1.0;
  }

  report.path = (std::filesystem::path(cfg.out_dir) / "oracle_compare.csv").string();
  std::ofstream out(report.path);
  if (!out) throw std::runtime_error("cannot open '" + report.path + "' for writing");
  out << "policy,replicates,exact_cost,simulated_cost,half_width,gap_exact,gap_simulated\n";
  for (const auto& r : report.rows)
    out << to_string(r.policy) << ',' << r.exact_costs.size() << ',' << csv_number(r.exact_cost) << ','
        << csv_number(r.simulated_cost) << ',' << csv_number(r.half_width) << ',' << csv_number(r.gap_exact) << ','
        << csv_number(r.gap_simulated) << '\n';
  return report;
}

}  // namespace mecoff
