#pragma once

#include <optional>
#include <string_view>

#include "equifl/common.hpp"
#include "equifl/rng.hpp"
#include "equifl/valuation.hpp"

namespace equifl {

/// Degrees of freedom for the T^2 reference distribution: m = 2(t_s - 1)
/// (default) or the window-based m = 2 tau - 2.
enum class DegreesOfFreedom { TwoTsMinusOne, TwoTauMinusTwo };

std::string_view to_string(DegreesOfFreedom df);
DegreesOfFreedom parse_degrees_of_freedom(std::string_view name);

struct StoppingConfig {
  double alpha = 0.5;
  int tau = 20;
  std::optional<int> subsample_m;    // test only a fixed random subset of M nodes
  std::optional<int> min_iterations; // defaults to tau + dim + 2
  double ridge = 1e-8;               // covariance regulariser, relative to tr(S)/dim
  DegreesOfFreedom df = DegreesOfFreedom::TwoTsMinusOne;

  /// Number of coordinates entering the test for an N-node run.
  int tested_dim(int n_nodes) const { return subsample_m.value_or(n_nodes); }
  int effective_min_iterations(int n_nodes) const {
    return min_iterations.value_or(tau + tested_dim(n_nodes) + 2);
  }
  void validate(int n_nodes) const;
};

struct TestVerdict {
  double t2 = 0.0;
  double p_value = 1.0;
  bool stop = false;
  IndexSet tested_nodes;
};

/// M distinct indices drawn uniformly from [0, N), returned sorted.
IndexSet subsample_nodes(int n, int m, Rng& rng);

/// One-sample T^2 of the full-history mean against the mean of the first
/// t_s - tau rows, using the ridged unbiased covariance of all t_s rows.
double hotelling_t2(const Mat& phi_history, int tau, double ridge);

/// F(d1, d2) cumulative distribution function.
double f_cdf(double x, double d1, double d2);

/// Survival probability of `t2` under Hotelling's T^2(dim, m), via
/// T^2(p, m) = p m / (m - p + 1) F(p, m - p + 1).
double hotelling_pvalue(double t2, int dim, int m);

/// m = 2(t_s - 1) or 2 tau - 2 per `df`.
int degrees_of_freedom(DegreesOfFreedom df, int t_s, int tau);

/// Evaluates the criterion on the ledger at iteration t (t >= min_iterations).
/// stop holds iff p_value >= alpha.
TestVerdict should_stop(const ContributionLedger& ledger, const IndexSet& tested_nodes, int t,
                        const StoppingConfig& config);

/// Fraction of designated low-quality nodes found among the |designated|
/// lowest-psi nodes (ties broken by lower node index).
double recall_fraction(const Vec& psi, const IndexSet& designated_low);

struct CalibrationResult {
  int runs = 0;
  int rejections = 0;  // runs with p-value below alpha
  double rejection_rate() const { return runs > 0 ? double(rejections) / runs : 0.0; }
};

/// Null-hypothesis harness: `runs` histories of t_s i.i.d. standard normal
/// rows in `dim` coordinates, each run on its own derived stream.
CalibrationResult calibrate_null(double alpha, int runs, int dim, int t_s, int tau,
                                 DegreesOfFreedom df, std::uint64_t seed, double ridge = 1e-8);

/// Owns the fixed tested subset and records the first stopping iteration.
class StoppingMonitor {
 public:
  StoppingMonitor(StoppingConfig config, int n_nodes, Rng& rng);

  const StoppingConfig& config() const { return config_; }
  const IndexSet& tested_nodes() const { return tested_; }
  int min_iterations() const { return min_iterations_; }
  std::optional<int> t_alpha() const { return t_alpha_; }

  /// nullopt before min_iterations; otherwise the verdict, recording T_alpha
  /// the first time it says stop.
  std::optional<TestVerdict> observe(const ContributionLedger& ledger, int t);

 private:
  StoppingConfig config_;
  IndexSet tested_;
  int min_iterations_;
  std::optional<int> t_alpha_;
};

}  // namespace equifl
