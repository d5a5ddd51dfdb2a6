#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "equifl/common.hpp"
#include "equifl/rng.hpp"

namespace equifl {

// Closed-form pipeline: psi -> rho (softmax) -> q (selected at least once in k
// with-replacement draws) -> Gamma = (1-q)/q^2 -> C = base + Gamma.

/// Softmax of psi / beta with max subtraction.
template <typename Scalar>
Vector<Scalar> sampling_distribution(const Vector<Scalar>& psi, Scalar beta) {
  if (!(beta > Scalar(0)) || !std::isfinite(static_cast<double>(beta)))
    throw ConfigError("sampling_distribution: beta must be a positive finite number");
  if (psi.size() == 0) throw ConfigError("sampling_distribution: empty psi");
  if (!psi.allFinite()) throw ConfigError("sampling_distribution: psi must be finite");
  const Vector<Scalar> scaled = psi / beta;
  const Vector<Scalar> e = (scaled.array() - scaled.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// 1 - (1 - rho)^k, evaluated without cancellation for tiny rho.
template <typename Scalar>
Scalar selection_probability(Scalar rho, int k) {
  using std::expm1, std::log1p;
  if (k < 1) throw ConfigError("selection_probability: k must be >= 1");
  require(rho >= Scalar(0) && rho <= Scalar(1), "selection_probability: rho outside [0, 1]");
  if (rho == Scalar(1)) return Scalar(1);
  return -expm1(Scalar(k) * log1p(-rho));
}

/// Gamma = (1 - q) / q^2; 0 when q = 1. q = 0 means the node is never
/// selected and the series diverges.
template <typename Scalar>
Scalar expected_staleness(Scalar q) {
  if (!(q > Scalar(0))) throw DivergenceError("expected_staleness: q = 0, node is never selected");
  require(q <= Scalar(1), "expected_staleness: q outside (0, 1]");
  return (Scalar(1) - q) / (q * q);
}

/// Gamma straight from rho; +inf when rho underflows to zero.
template <typename Scalar>
Scalar staleness_from_rho(Scalar rho, int k) {
  using std::exp, std::log1p;
  if (!(rho > Scalar(0))) return std::numeric_limits<Scalar>::infinity();
  const Scalar q = selection_probability(rho, k);
  if (!(q > Scalar(0))) return std::numeric_limits<Scalar>::infinity();
  const Scalar miss = rho == Scalar(1) ? Scalar(0) : exp(Scalar(k) * log1p(-rho));
  return miss / (q * q);
}

template <typename Scalar>
Scalar convergence_complexity(Scalar gamma, Scalar base) {
  require(gamma >= Scalar(0) && base >= Scalar(0), "convergence_complexity: negative input");
  return base + gamma;
}

/// Gamma common to every node as beta -> infinity (uniform rho = 1/N).
template <typename Scalar = double>
Scalar limit_staleness(int n, int k) {
  if (n < 1 || k < 1) throw ConfigError("limit_staleness: need N >= 1 and k >= 1");
  return staleness_from_rho(Scalar(1) / Scalar(n), k);
}

/// Frozen incentive plan built from psi at the end of exploration.
struct SamplingPlan {
  Vec psi_frozen;
  double beta = 1.0;
  int k = 1;
  double base_complexity = 0.0;
  Vec rho;
  Vec q;
  Vec gamma;       // +inf where rho underflowed
  Vec complexity;
};

SamplingPlan build_plan(const Vec& psi, double beta, int k, double base_complexity = 0.0);

/// Band [M1 g(M2 - M1), M2 g(M1 - M2)] that contains every psi_i * Gamma_i
/// when psi lies in [M1, M2]; g(delta, beta) is Gamma at rho = e^{delta/beta}/N
/// (rho capped at 1).
double staleness_bound(double delta, double beta, int n, int k);

struct BetaRange {
  double lo = 0.0;           // smaller of the two boundary roots
  double hi = 0.0;           // larger root; the band [r1, r2] holds for every beta >= hi
  double lower_root = 0.0;   // root of M1 g(M2 - M1, beta) = r1
  double upper_root = 0.0;   // root of M2 g(M1 - M2, beta) = r2
};

inline constexpr double kBetaBracketMax = 1e6;
inline constexpr int kBisectionCap = 200;

/// Solves both boundary equations by bisection on [tol, 1e6].
/// Throws InfeasibleError when either has no sign change in the bracket.
BetaRange beta_range(double m1, double m2, int n, int k, double r1, double r2, double tol);

/// beta at which the lowest-psi node's Gamma equals gamma_target.
double beta_for_target(const Vec& psi, int k, double gamma_target, double tol);

/// k i.i.d. draws from rho (duplicates allowed).
std::vector<int> sample_subset(const Vec& rho, int k, Rng& rng);

/// Sorted, duplicate-free version of a draw.
IndexSet distinct_nodes(std::vector<int> draws);

/// Per-node staleness bookkeeping. Every node starts synchronised at t = 0.
class StalenessTracker {
 public:
  explicit StalenessTracker(int n_nodes = 0);

  /// Records iteration t (strictly increasing). Selected nodes reset to 0.
  void step(const IndexSet& selected, int t);

  int n_nodes() const { return static_cast<int>(last_sync_.size()); }
  int last_t() const { return last_t_; }
  const std::vector<int>& last_sync() const { return last_sync_; }
  const std::vector<std::vector<int>>& gamma_history() const { return history_; }
  int current(int node) const;
  /// Running mean of gamma_{i,t} over recorded iterations.
  const Vec& running_avg() const { return running_avg_; }
  /// Mean total staleness per completed renewal cycle (selection to
  /// selection); the quantity the closed-form Gamma describes.
  double cycle_staleness(int node) const;
  long resets(int node) const { return resets_[node]; }

 private:
  std::vector<int> last_sync_;
  std::vector<std::vector<int>> history_;
  Vec sum_;
  Vec running_avg_;
  std::vector<double> open_cycle_;
  std::vector<double> closed_cycles_;
  std::vector<long> resets_;
  int last_t_ = 0;
};

StalenessTracker staleness_step(StalenessTracker tracker, const IndexSet& selected, int t);

}  // namespace equifl
