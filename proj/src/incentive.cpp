#include "equifl/incentive.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace equifl {

SamplingPlan build_plan(const Vec& psi, double beta, int k, double base_complexity) {
  const auto n = static_cast<int>(psi.size());
  if (k < 1 || k > n) throw ConfigError("sampling plan: k must lie in [1, N]");
  if (!(base_complexity >= 0.0) || !std::isfinite(base_complexity))
    throw ConfigError("sampling plan: base_complexity must be finite and >= 0");

  SamplingPlan plan;
  plan.psi_frozen = psi;
  plan.beta = beta;
  plan.k = k;
  plan.base_complexity = base_complexity;
  plan.rho = sampling_distribution(psi, beta);
  plan.q.resize(n);
  plan.gamma.resize(n);
  plan.complexity.resize(n);
  for (int i = 0; i < n; ++i) {
    plan.q(i) = selection_probability(plan.rho(i), k);
    plan.gamma(i) = staleness_from_rho(plan.rho(i), k);
    plan.complexity(i) = base_complexity + plan.gamma(i);
  }
  return plan;
}

double staleness_bound(double delta, double beta, int n, int k) {
  const double rho = std::min(1.0, std::exp(delta / beta) / static_cast<double>(n));
  return staleness_from_rho(rho, k);
}

namespace {

// Smallest beta in [tol, kBetaBracketMax] (to within tol) at which `holds`
// becomes true, for a predicate that is false below some threshold and true
// above it.
double bisect_threshold(const std::function<bool(double)>& holds, double tol) {
  double lo = tol, hi = kBetaBracketMax;
  if (holds(lo)) return lo;
  for (int it = 0; it < kBisectionCap && hi - lo > tol; ++it) {
    const double mid = std::sqrt(lo * hi);
    (holds(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

BetaRange beta_range(double m1, double m2, int n, int k, double r1, double r2, double tol) {
  if (n < 1 || k < 1) throw ConfigError("beta_range: need N >= 1 and k >= 1");
  if (!(tol > 0.0) || !(tol < kBetaBracketMax)) throw ConfigError("beta_range: tol must lie in (0, 1e6)");
  if (!(r1 > 0.0) || !(r2 >= r1)) throw ConfigError("beta_range: need 0 < r1 <= r2");
  if (!(m1 <= m2)) throw ConfigError("beta_range: need M1 <= M2");
  if (!(m1 > 0.0)) throw InfeasibleError("beta_range: the psi band must be positive (M1 > 0)");

  if (m1 == m2) {
    const double value = m1 * limit_staleness(n, k);
    if (value < r1 || value > r2)
      throw InfeasibleError("beta_range: equal contributions give psi*Gamma = " +
                            std::to_string(value) + " outside [r1, r2]");
    return BetaRange{tol, kBetaBracketMax, tol, kBetaBracketMax};
  }

  // Both bounds approach M * limit_staleness as beta grows: the lower one from
  // below (increasing), the upper one from above (decreasing).
  auto lower_ok = [&](double beta) { return m1 * staleness_bound(m2 - m1, beta, n, k) >= r1; };
  auto upper_ok = [&](double beta) { return m2 * staleness_bound(m1 - m2, beta, n, k) <= r2; };
  if (!lower_ok(kBetaBracketMax))
    throw InfeasibleError("beta_range: r1 is above M1 * Gamma for every beta in the bracket");
  if (!upper_ok(kBetaBracketMax))
    throw InfeasibleError("beta_range: r2 is below M2 * Gamma for every beta in the bracket");

  BetaRange out;
  out.lower_root = bisect_threshold(lower_ok, tol);
  out.upper_root = bisect_threshold(upper_ok, tol);
  out.lo = std::min(out.lower_root, out.upper_root);
  out.hi = std::max(out.lower_root, out.upper_root);
  return out;
}

double beta_for_target(const Vec& psi, int k, double gamma_target, double tol) {
  const auto n = static_cast<int>(psi.size());
  if (n < 1) throw ConfigError("beta_for_target: empty psi");
  if (!(tol > 0.0)) throw ConfigError("beta_for_target: tol must be > 0");
  const double floor = limit_staleness(n, k);
  if (!(gamma_target > floor))
    throw InfeasibleError("beta_for_target: target " + std::to_string(gamma_target) +
                          " is not above the beta->inf limit " + std::to_string(floor));

  Eigen::Index worst = 0;
  psi.minCoeff(&worst);  // first index on ties
  auto gamma_at = [&](double beta) {
    return staleness_from_rho(sampling_distribution(psi, beta)(worst), k);
  };

  double lo = tol, hi = kBetaBracketMax;
  if (gamma_at(hi) > gamma_target)
    throw InfeasibleError("beta_for_target: target needs beta beyond the search bracket");
  if (gamma_at(lo) < gamma_target)
    throw InfeasibleError("beta_for_target: Gamma of the lowest node never reaches the target");

  // Gamma of the lowest-psi node decreases in beta.
  double best = hi, best_err = std::abs(gamma_at(hi) - gamma_target);
  for (int it = 0; it < kBisectionCap; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double g = gamma_at(mid);
    const double err = std::abs(g - gamma_target);
    if (err < best_err) {
      best = mid;
      best_err = err;
    }
    if (err <= tol || hi - lo <= 1e-15 * hi) break;
    (g > gamma_target ? lo : hi) = mid;
  }
  return best;
}

std::vector<int> sample_subset(const Vec& rho, int k, Rng& rng) {
  if (k < 1) throw ConfigError("sample_subset: k must be >= 1");
  require(rho.size() > 0 && (rho.array() >= 0.0).all() && std::abs(rho.sum() - 1.0) < 1e-9,
          "sample_subset: rho is not a probability vector");
  std::discrete_distribution<int> draw(rho.data(), rho.data() + rho.size());
  std::vector<int> out(static_cast<std::size_t>(k));
  for (auto& v : out) v = draw(rng);
  return out;
}

IndexSet distinct_nodes(std::vector<int> draws) {
  std::sort(draws.begin(), draws.end());
  draws.erase(std::unique(draws.begin(), draws.end()), draws.end());
  return draws;
}

StalenessTracker::StalenessTracker(int n_nodes)
    : last_sync_(static_cast<std::size_t>(n_nodes), 0),
      history_(static_cast<std::size_t>(n_nodes)),
      sum_(Vec::Zero(n_nodes)),
      running_avg_(Vec::Zero(n_nodes)),
      open_cycle_(static_cast<std::size_t>(n_nodes), 0.0),
      closed_cycles_(static_cast<std::size_t>(n_nodes), 0.0),
      resets_(static_cast<std::size_t>(n_nodes), 0) {}

void StalenessTracker::step(const IndexSet& selected, int t) {
  if (t <= last_t_)
    throw ContractViolation("staleness_step: iteration " + std::to_string(t) +
                            " does not advance past " + std::to_string(last_t_));
  std::vector<char> chosen(last_sync_.size(), 0);
  for (int i : selected) {
    require(i >= 0 && i < n_nodes(), "staleness_step: selected node out of range");
    chosen[static_cast<std::size_t>(i)] = 1;
  }
  const double steps = static_cast<double>(history_.empty() ? 0 : history_.front().size() + 1);
  for (int i = 0; i < n_nodes(); ++i) {
    int gamma = 0;
    if (chosen[i]) {
      last_sync_[i] = t;
      closed_cycles_[i] += open_cycle_[i];
      open_cycle_[i] = 0.0;
      ++resets_[i];
    } else {
      gamma = t - last_sync_[i];
      open_cycle_[i] += gamma;
    }
    history_[i].push_back(gamma);
    sum_(i) += gamma;
    running_avg_(i) = sum_(i) / steps;
  }
  last_t_ = t;
}

int StalenessTracker::current(int node) const {
  const auto& h = history_.at(static_cast<std::size_t>(node));
  return h.empty() ? 0 : h.back();
}

double StalenessTracker::cycle_staleness(int node) const {
  const auto i = static_cast<std::size_t>(node);
  if (resets_.at(i) == 0) return std::numeric_limits<double>::quiet_NaN();
  return closed_cycles_[i] / static_cast<double>(resets_[i]);
}

StalenessTracker staleness_step(StalenessTracker tracker, const IndexSet& selected, int t) {
  tracker.step(selected, t);
  return tracker;
}

}  // namespace equifl
