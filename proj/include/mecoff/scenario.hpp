#pragma once

// Experiment parameters: system constants, Markov channel model and
// arrival rates, plus the seeded generator and the key/value file format.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mecoff/rng.hpp"

namespace mecoff {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How the drop term of the per-epoch cost is charged.
///  - Indicator: 1 when a task is present and declined.
///  - ArrivalRate: the literal reading, lambda_t whenever T = -1.
enum class DropCostMode { Indicator, ArrivalRate };

struct SystemParams {
  int n_bs = 6;
  double bandwidth_hz = 1e6;
  double interference_w = 1e-3;
  double epoch_s = 1e-3;
  double energy_unit_j = 5e-5;
  int h_max = 4;
  double task_bits = 1e3;
  double cycles_per_bit = 600.0;
  double switched_cap = 1e-28;
  double f_local_max_hz = 1.9e9;
  double f_cloud_hz = 3.9e9;
  double discount = 0.9;
  // Only rho * zeta enters the cost; rho = 1, zeta = 0.9 * epoch.
  double handover_weight = 1.0;
  double handover_delay_s = 0.9e-3;
  double drop_weight = 9e-3;
  DropCostMode drop_cost_mode = DropCostMode::Indicator;

  bool operator==(const SystemParams&) const = default;
};

/// Square row-stochastic matrix stored row-major.
class StochasticMatrix {
 public:
  StochasticMatrix() = default;
  StochasticMatrix(std::size_t dim, std::vector<double> data) : dim_(dim), data_(std::move(data)) {
    if (data_.size() != dim_ * dim_)
      throw ScenarioError("transition matrix needs " + std::to_string(dim_ * dim_) + " entries, got " +
                          std::to_string(data_.size()));
  }

  static StochasticMatrix identity(std::size_t dim) {
    std::vector<double> d(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) d[i * dim + i] = 1.0;
    return {dim, std::move(d)};
  }

  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * dim_ + j]; }
  std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * dim_, dim_}; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool operator==(const StochasticMatrix&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct ChannelModel {
  std::vector<std::vector<double>> gain_states_db;   // G_n, one list per BS
  std::vector<StochasticMatrix> transition_matrices;  // one per BS

  std::size_t n_bs() const noexcept { return gain_states_db.size(); }
  std::size_t n_states(std::size_t bs) const noexcept { return gain_states_db[bs].size(); }
  double gain_linear(std::size_t bs, std::size_t index) const noexcept {
    return std::pow(10.0, gain_states_db[bs][index] / 10.0);
  }

  bool operator==(const ChannelModel&) const = default;
};

struct ArrivalModel {
  double task_rate = 0.6;    // Bernoulli parameter per epoch
  double energy_rate = 0.5;  // Poisson mean per epoch

  bool operator==(const ArrivalModel&) const = default;
};

struct ScenarioSpec {
  SystemParams params;
  ChannelModel channel;
  ArrivalModel arrivals;
  std::uint64_t seed = 0;

  bool operator==(const ScenarioSpec&) const = default;
};

/// Partial parameter set keyed by scenario-file field names, e.g.
/// {"n_bs", "2"}, {"gain_states_db", "-18 -11 -4"}, {"transition_matrix.1", "1 0 0 1"}.
using Overrides = std::map<std::string, std::string>;

inline constexpr int kScenarioSchemaVersion = 1;
inline const std::vector<double> kDefaultGainStatesDb = {-18, -16, -14, -12, -10, -8, -6, -4};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw ScenarioError("cannot format value");
  return {buf, end};
}

}  // namespace detail

/// Shortest round-trip text for CSV cells; NaN becomes an empty cell.
inline std::string csv_number(double v) { return std::isnan(v) ? std::string() : detail::format_double(v); }

namespace detail {

inline double parse_double(std::string_view key, std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ScenarioError("field '" + std::string(key) + "': not a number: '" + std::string(text) + "'");
  return v;
}

inline long long parse_int(std::string_view key, std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ScenarioError("field '" + std::string(key) + "': not an integer: '" + std::string(text) + "'");
  return v;
}

inline std::vector<double> parse_list(std::string_view key, std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == ',')) ++pos;
    std::size_t end = pos;
    while (end < text.size() && text[end] != ' ' && text[end] != '\t' && text[end] != ',') ++end;
    if (end > pos) out.push_back(parse_double(key, text.substr(pos, end - pos)));
    pos = end;
  }
  return out;
}

inline std::string join(const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ' ';
    s += format_double(values[i]);
  }
  return s;
}

/// Index suffix of "prefix.<n>" keys, 1-based BS id converted to 0-based.
inline std::size_t bs_suffix(std::string_view key, std::string_view prefix, std::size_t n_bs) {
  const long long id = parse_int(key, key.substr(prefix.size() + 1));
  if (id < 1 || static_cast<std::size_t>(id) > n_bs)
    throw ScenarioError("field '" + std::string(key) + "': BS id out of range 1.." + std::to_string(n_bs));
  return static_cast<std::size_t>(id - 1);
}

inline bool has_prefix(std::string_view key, std::string_view prefix) {
  return key.size() > prefix.size() + 1 && key.substr(0, prefix.size()) == prefix && key[prefix.size()] == '.';
}

/// Row-normalized iid uniforms from a stream owned by one BS.
inline StochasticMatrix random_stochastic_matrix(std::size_t dim, std::uint64_t seed, std::uint64_t stream) {
  Rng rng(seed, stream);
  std::vector<double> data(dim * dim);
  for (std::size_t i = 0; i < dim; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      // Shift off zero so every transition has positive mass.
      data[i * dim + j] = rng.uniform() + 0x1.0p-54;
      sum += data[i * dim + j];
    }
    for (std::size_t j = 0; j < dim; ++j) data[i * dim + j] /= sum;
  }
  return {dim, std::move(data)};
}

// Scalar fields in file order. Accessors keep the parser, the writer and
// the override path on one table.
struct ScalarField {
  const char* key;
  double SystemParams::*real = nullptr;
  int SystemParams::*integer = nullptr;
};

inline const std::vector<ScalarField>& scalar_fields() {
  static const std::vector<ScalarField> fields = {
      {"n_bs", nullptr, &SystemParams::n_bs},
      {"bandwidth_hz", &SystemParams::bandwidth_hz},
      {"interference_w", &SystemParams::interference_w},
      {"epoch_s", &SystemParams::epoch_s},
      {"energy_unit_j", &SystemParams::energy_unit_j},
      {"h_max", nullptr, &SystemParams::h_max},
      {"task_bits", &SystemParams::task_bits},
      {"cycles_per_bit", &SystemParams::cycles_per_bit},
      {"switched_cap", &SystemParams::switched_cap},
      {"f_local_max_hz", &SystemParams::f_local_max_hz},
      {"f_cloud_hz", &SystemParams::f_cloud_hz},
      {"discount", &SystemParams::discount},
      {"handover_weight", &SystemParams::handover_weight},
      {"handover_delay_s", &SystemParams::handover_delay_s},
      {"drop_weight", &SystemParams::drop_weight},
  };
  return fields;
}

inline DropCostMode parse_drop_mode(std::string_view text) {
  if (text == "indicator") return DropCostMode::Indicator;
  if (text == "arrival_rate") return DropCostMode::ArrivalRate;
  throw ScenarioError("field 'drop_cost_mode': expected 'indicator' or 'arrival_rate', got '" + std::string(text) +
                      "'");
}

inline std::string_view drop_mode_name(DropCostMode m) {
  return m == DropCostMode::Indicator ? "indicator" : "arrival_rate";
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// Throws ScenarioError naming the first violated invariant.
inline void validate(const ScenarioSpec& spec) {
  const auto& p = spec.params;
  auto positive = [](const char* name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ScenarioError(std::string(name) + " must be positive and finite");
  };
  if (p.n_bs < 1) throw ScenarioError("n_bs must be >= 1");
  if (p.h_max < 1) throw ScenarioError("h_max must be >= 1");
  positive("bandwidth_hz", p.bandwidth_hz);
  positive("interference_w", p.interference_w);
  positive("epoch_s", p.epoch_s);
  positive("energy_unit_j", p.energy_unit_j);
  positive("task_bits", p.task_bits);
  positive("cycles_per_bit", p.cycles_per_bit);
  positive("switched_cap", p.switched_cap);
  positive("f_local_max_hz", p.f_local_max_hz);
  positive("f_cloud_hz", p.f_cloud_hz);
  positive("handover_weight", p.handover_weight);
  positive("handover_delay_s", p.handover_delay_s);
  positive("drop_weight", p.drop_weight);
  if (!(p.discount >= 0.0 && p.discount < 1.0)) throw ScenarioError("discount must lie in [0, 1)");

  const auto& a = spec.arrivals;
  if (!(a.task_rate >= 0.0 && a.task_rate <= 1.0)) throw ScenarioError("task_rate must lie in [0, 1]");
  if (!(a.energy_rate >= 0.0) || !std::isfinite(a.energy_rate)) throw ScenarioError("energy_rate must be >= 0");

  const auto& c = spec.channel;
  if (c.gain_states_db.size() != static_cast<std::size_t>(p.n_bs) ||
      c.transition_matrices.size() != static_cast<std::size_t>(p.n_bs))
    throw ScenarioError("channel model must describe exactly n_bs base stations");
  for (std::size_t n = 0; n < c.n_bs(); ++n) {
    const auto id = std::to_string(n + 1);
    if (c.gain_states_db[n].empty()) throw ScenarioError("BS " + id + " has no gain states");
    for (double g : c.gain_states_db[n])
      if (!std::isfinite(g)) throw ScenarioError("BS " + id + " has a non-finite gain state");
    const auto& m = c.transition_matrices[n];
    if (m.dim() != c.gain_states_db[n].size())
      throw ScenarioError("BS " + id + ": transition matrix dimension does not match its gain-state count");
    for (std::size_t i = 0; i < m.dim(); ++i) {
      double sum = 0.0;
      for (double v : m.row(i)) {
        if (!(v >= 0.0) || !std::isfinite(v))
          throw ScenarioError("BS " + id + ": transition matrix has a negative or non-finite entry");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw ScenarioError("BS " + id + ": transition matrix row " + std::to_string(i + 1) +
                            " is not stochastic (sums to " + detail::format_double(sum) + ")");
    }
  }
}

/// Builds a scenario from defaults, applying `overrides` and drawing
/// every channel matrix not given explicitly from the seeded generator.
inline ScenarioSpec build_scenario(std::uint64_t seed, const Overrides& overrides = {}) {
  ScenarioSpec spec;
  spec.seed = seed;
  auto& p = spec.params;

  // Pass 1: scalars (n_bs first, since BS-indexed keys depend on it).
  const auto& fields = detail::scalar_fields();
  for (const auto& [key, value] : overrides) {
    bool known = false;
    for (const auto& f : fields) {
      if (key != f.key) continue;
      known = true;
      if (f.real) p.*f.real = detail::parse_double(key, value);
      else p.*f.integer = static_cast<int>(detail::parse_int(key, value));
    }
    if (known) continue;
    if (key == "drop_cost_mode") p.drop_cost_mode = detail::parse_drop_mode(detail::trim(value));
    else if (key == "task_rate") spec.arrivals.task_rate = detail::parse_double(key, value);
    else if (key == "energy_rate") spec.arrivals.energy_rate = detail::parse_double(key, value);
    else if (key == "gain_states_db" || detail::has_prefix(key, "gain_states_db") ||
             detail::has_prefix(key, "transition_matrix"))
      continue;
    else
      throw ScenarioError("unknown override field '" + key + "'");
  }
  if (p.n_bs < 1) throw ScenarioError("n_bs must be >= 1");
  const auto n_bs = static_cast<std::size_t>(p.n_bs);

  // Pass 2: gain sets.
  spec.channel.gain_states_db.assign(n_bs, kDefaultGainStatesDb);
  if (auto it = overrides.find("gain_states_db"); it != overrides.end())
    spec.channel.gain_states_db.assign(n_bs, detail::parse_list(it->first, it->second));
  for (const auto& [key, value] : overrides)
    if (detail::has_prefix(key, "gain_states_db"))
      spec.channel.gain_states_db[detail::bs_suffix(key, "gain_states_db", n_bs)] = detail::parse_list(key, value);

  // Pass 3: matrices, generated unless supplied.
  std::vector<bool> supplied(n_bs, false);
  spec.channel.transition_matrices.resize(n_bs);
  for (const auto& [key, value] : overrides) {
    if (!detail::has_prefix(key, "transition_matrix")) continue;
    const auto n = detail::bs_suffix(key, "transition_matrix", n_bs);
    spec.channel.transition_matrices[n] =
        StochasticMatrix(spec.channel.gain_states_db[n].size(), detail::parse_list(key, value));
    supplied[n] = true;
  }
  for (std::size_t n = 0; n < n_bs; ++n)
    if (!supplied[n])
      spec.channel.transition_matrices[n] =
          detail::random_stochastic_matrix(spec.channel.gain_states_db[n].size(), seed, 1000 + n);

  validate(spec);
  return spec;
}

/// Unextended size is 2 (1 + h_max) prod |G_n|; the extended space also
/// tracks the last serving BS (none or 1..N).
inline std::uint64_t state_space_size(std::span<const std::size_t> gain_counts, int h_max, bool extended) {
  std::uint64_t size = 2 * static_cast<std::uint64_t>(1 + h_max);
  for (auto g : gain_counts) size *= g;
  if (extended) size *= gain_counts.size() + 1;
  return size;
}

inline std::uint64_t state_space_size(const ScenarioSpec& spec, bool extended) {
  std::vector<std::size_t> counts;
  for (const auto& g : spec.channel.gain_states_db) counts.push_back(g.size());
  return state_space_size(counts, spec.params.h_max, extended);
}

inline std::string to_text(const ScenarioSpec& spec) {
  std::ostringstream out;
  out << "# mecoff scenario\n";
  out << "schema_version = " << kScenarioSchemaVersion << "\n";
  out << "seed = " << spec.seed << "\n";
  for (const auto& f : detail::scalar_fields()) {
    out << f.key << " = ";
    if (f.real) out << detail::format_double(spec.params.*f.real);
    else out << spec.params.*f.integer;
    out << "\n";
  }
  out << "drop_cost_mode = " << detail::drop_mode_name(spec.params.drop_cost_mode) << "\n";
  out << "task_rate = " << detail::format_double(spec.arrivals.task_rate) << "\n";
  out << "energy_rate = " << detail::format_double(spec.arrivals.energy_rate) << "\n";
  for (std::size_t n = 0; n < spec.channel.n_bs(); ++n)
    out << "gain_states_db." << n + 1 << " = " << detail::join(spec.channel.gain_states_db[n]) << "\n";
  for (std::size_t n = 0; n < spec.channel.transition_matrices.size(); ++n)
    out << "transition_matrix." << n + 1 << " = " << detail::join(spec.channel.transition_matrices[n].data())
        << "\n";
  return out.str();
}

inline ScenarioSpec from_text(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw ScenarioError("line " + std::to_string(line_no) + ": expected 'key = value'");
    auto key = detail::trim(std::string_view(trimmed).substr(0, eq));
    auto value = detail::trim(std::string_view(trimmed).substr(eq + 1));
    if (!kv.emplace(key, value).second) throw ScenarioError("duplicate field '" + key + "'");
  }

  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ScenarioError("missing field '" + key + "'");
    auto v = it->second;
    kv.erase(it);
    return v;
  };

  const auto version = detail::parse_int("schema_version", take("schema_version"));
  if (version != kScenarioSchemaVersion)
    throw ScenarioError("unsupported schema_version " + std::to_string(version) + " (expected " +
                        std::to_string(kScenarioSchemaVersion) + ")");

  ScenarioSpec spec;
  const auto seed_text = take("seed");
  {
    std::uint64_t seed = 0;
    auto [ptr, ec] = std::from_chars(seed_text.data(), seed_text.data() + seed_text.size(), seed);
    if (ec != std::errc{} || ptr != seed_text.data() + seed_text.size())
      throw ScenarioError("field 'seed': not an unsigned integer");
    spec.seed = seed;
  }
  for (const auto& f : detail::scalar_fields()) {
    const auto v = take(f.key);
    if (f.real) spec.params.*f.real = detail::parse_double(f.key, v);
    else spec.params.*f.integer = static_cast<int>(detail::parse_int(f.key, v));
  }
  spec.params.drop_cost_mode = detail::parse_drop_mode(take("drop_cost_mode"));
  spec.arrivals.task_rate = detail::parse_double("task_rate", take("task_rate"));
  spec.arrivals.energy_rate = detail::parse_double("energy_rate", take("energy_rate"));
  if (spec.params.n_bs < 1) throw ScenarioError("n_bs must be >= 1");

  for (int n = 1; n <= spec.params.n_bs; ++n) {
    const auto key = "gain_states_db." + std::to_string(n);
    spec.channel.gain_states_db.push_back(detail::parse_list(key, take(key)));
  }
  for (int n = 1; n <= spec.params.n_bs; ++n) {
    const auto key = "transition_matrix." + std::to_string(n);
    const auto dim = spec.channel.gain_states_db[n - 1].size();
    spec.channel.transition_matrices.emplace_back(dim, detail::parse_list(key, take(key)));
  }
  if (!kv.empty()) throw ScenarioError("unknown field '" + kv.begin()->first + "'");

  validate(spec);
  return spec;
}

inline void save_scenario(const ScenarioSpec& spec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ScenarioError("cannot open '" + path + "' for writing");
  out << to_text(spec);
  if (!out) throw ScenarioError("write to '" + path + "' failed");
}

inline ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

/// Two-BS, three-gain-state, H = 2 instance small enough for the exact
/// solver. Extra overrides are applied on top.
inline Overrides desk_overrides(Overrides extra = {}) {
  Overrides o = {{"n_bs", "2"},
                 {"h_max", "2"},
                 {"gain_states_db", "-18 -11 -4"},
                 {"task_rate", "0.6"},
                 {"energy_rate", "0.5"}};
  for (auto& [k, v] : extra) o[k] = v;
  return o;
}

inline ScenarioSpec desk_scenario(std::uint64_t seed = 1, Overrides extra = {}) {
  return build_scenario(seed, desk_overrides(std::move(extra)));
}

}  // namespace mecoff
