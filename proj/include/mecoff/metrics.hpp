#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mecoff/cost_model.hpp"

namespace mecoff {

/// One epoch of a run: instantaneous values and prefix means.
struct MetricsRow {
  std::uint64_t epoch = 0;  // 1-based
  double cost = 0.0;
  double exec_delay = 0.0;
  double handover = 0.0;  // 1 when a handover happened
  double drop = 0.0;      // drop term of the cost
  double avg_cost = 0.0;
  double avg_exec_delay = 0.0;
  double avg_handover = 0.0;
  double avg_drop = 0.0;
  double loss = std::numeric_limits<double>::quiet_NaN();  // NaN when no update ran
  double epsilon = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "epoch,cost,exec_delay,handover_count,drop_count,avg_cost,avg_exec_delay,avg_handover_count,avg_drop_count,"
    "loss,epsilon";

class MetricsRecorder {
 public:
  MetricsRow record(const CostBreakdown& c, double loss = std::numeric_limits<double>::quiet_NaN(),
                    double epsilon = 0.0) {
    MetricsRow r;
    r.epoch = ++n_;
    r.cost = c.total_s;
    r.exec_delay = c.exec_delay_s;
    r.handover = c.handover_s > 0.0 ? 1.0 : 0.0;
    r.drop = c.drop;
    sum_cost_ += r.cost;
    sum_delay_ += r.exec_delay;
    sum_handover_ += r.handover;
    sum_drop_ += r.drop;
    const double n = static_cast<double>(n_);
    r.avg_cost = sum_cost_ / n;
    r.avg_exec_delay = sum_delay_ / n;
    r.avg_handover = sum_handover_ / n;
    r.avg_drop = sum_drop_ / n;
    r.loss = loss;
    r.epsilon = epsilon;
    rows_.push_back(r);
    return r;
  }

  const std::vector<MetricsRow>& rows() const noexcept { return rows_; }
  std::vector<MetricsRow> take() { return std::move(rows_); }

 private:
  std::uint64_t n_ = 0;
  double sum_cost_ = 0.0, sum_delay_ = 0.0, sum_handover_ = 0.0, sum_drop_ = 0.0;
  std::vector<MetricsRow> rows_;
};

inline void write_metrics_csv(const std::string& path, std::span<const MetricsRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.epoch << ',' << csv_number(r.cost) << ',' << csv_number(r.exec_delay) << ',' << csv_number(r.handover)
        << ',' << csv_number(r.drop) << ',' << csv_number(r.avg_cost) << ',' << csv_number(r.avg_exec_delay) << ','
        << csv_number(r.avg_handover) << ',' << csv_number(r.avg_drop) << ',' << csv_number(r.loss) << ','
        << csv_number(r.epsilon) << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

/// Trailing moving average with the given window (shorter at the start).
inline std::vector<double> moving_average(std::span<const double> values, std::size_t window) {
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

}  // namespace mecoff
