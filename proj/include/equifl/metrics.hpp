#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "equifl/common.hpp"

namespace equifl {

/// Sample Pearson correlation; nullopt when either input has zero variance.
std::optional<double> pearson(const Vec& x, const Vec& y);

/// Arithmetic mean of a performance history.
double online_performance(const std::vector<double>& history);

struct Spread {
  double std = 0.0;  // population standard deviation
  double min = 0.0;
  double max = 0.0;
};

Spread equality_spread(const Vec& values);

enum class Phase { Explore, Exploit, Baseline };

std::string_view to_string(Phase phase);
Phase parse_phase(std::string_view name);

struct NodeSummary {
  int node_id = 0;
  double zeta = 0.0;
  std::optional<double> psi_final;  // psi at T_alpha; absent for baselines
  double avg_staleness = 0.0;
  double online_perf = 0.0;         // running mean of validation loss
  double final_perf = 0.0;          // last validation loss

  bool operator==(const NodeSummary&) const = default;
};

struct AggregateSummary {
  std::optional<double> pearson_loss_zeta;
  std::optional<double> pearson_staleness_zeta;
  std::optional<double> pearson_psi_zeta;
  std::optional<double> recall_fraction;
  double std_online_perf = 0.0;
  double min_online_perf = 0.0;
  double max_online_perf = 0.0;
  std::optional<int> t_alpha;
  int t_total = 0;
  bool explore_converged = false;

  bool operator==(const AggregateSummary&) const = default;
};

struct IterationRecord {
  int iteration = 0;
  Phase phase = Phase::Explore;
  double global_loss = 0.0;
  std::optional<double> p_value;
  std::optional<double> delta_psi;
  std::vector<double> node_loss;
  std::vector<int> staleness;

  bool operator==(const IterationRecord&) const = default;
};

struct RunReport {
  std::string mode;
  std::uint64_t seed = 0;
  int n_nodes = 0;
  std::vector<NodeSummary> per_node;
  AggregateSummary aggregate;
  std::vector<IterationRecord> trajectory;

  bool operator==(const RunReport&) const = default;
};

/// JSON summary (everything except the trajectory).
std::string summary_json(const RunReport& report);

/// Per-iteration CSV: iteration, phase, global_loss, p_value, delta_psi,
/// loss_0..loss_{N-1}, staleness_0..staleness_{N-1}. Missing values are empty.
std::string trajectory_csv(const RunReport& report);

RunReport parse_report(const std::string& summary, const std::string& csv);

void write_report(const RunReport& report, const std::string& out_dir);
RunReport read_report(const std::string& out_dir);

inline constexpr const char* kSummaryFile = "summary.json";
inline constexpr const char* kMetricsFile = "metrics.csv";

}  // namespace equifl
