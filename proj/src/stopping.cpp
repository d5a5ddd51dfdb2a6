#include "equifl/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include <boost/math/special_functions/beta.hpp>

namespace equifl {

std::string_view to_string(DegreesOfFreedom df) {
  return df == DegreesOfFreedom::TwoTsMinusOne ? "ts" : "tau";
}

DegreesOfFreedom parse_degrees_of_freedom(std::string_view name) {
  if (name == "ts") return DegreesOfFreedom::TwoTsMinusOne;
  if (name == "tau") return DegreesOfFreedom::TwoTauMinusTwo;
  throw ConfigError("unknown degrees-of-freedom rule '" + std::string(name) + "' (ts|tau)");
}

void StoppingConfig::validate(int n_nodes) const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("stopping.alpha must lie in (0, 1)");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ConfigError("stopping.ridge must be >= 0");
  if (subsample_m && (*subsample_m < 1 || *subsample_m > n_nodes))
    throw ConfigError("stopping.subsample must lie in [1, N]");
  const int dim = tested_dim(n_nodes);
  if (tau <= dim)
    throw ConfigError("stopping.tau must exceed the number of tested nodes (" + std::to_string(dim) + ")");
  const int min_it = effective_min_iterations(n_nodes);
  if (min_it <= tau) throw ConfigError("stopping.min_iterations must exceed tau");
  if (degrees_of_freedom(df, min_it, tau) <= dim)
    throw ConfigError("stopping window too short for the tested dimension");
}

IndexSet subsample_nodes(int n, int m, Rng& rng) {
  if (m < 1 || m > n) throw ConfigError("subsample_nodes: need 1 <= M <= N");
  IndexSet all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  for (int j = 0; j < m; ++j) {
    std::uniform_int_distribution<int> pick(j, n - 1);
    std::swap(all[j], all[pick(rng)]);
  }
  all.resize(static_cast<std::size_t>(m));
  std::sort(all.begin(), all.end());
  return all;
}

double hotelling_t2(const Mat& phi_history, int tau, double ridge) {
  const auto t_s = phi_history.rows();
  const auto dim = phi_history.cols();
  if (dim < 1) throw PreconditionError("hotelling_t2: empty dimension");
  if (tau <= dim) throw PreconditionError("hotelling_t2: tau must exceed the dimension");
  if (t_s <= tau) throw PreconditionError("hotelling_t2: need more rows than the window tau");

  const Vec psi = phi_history.colwise().mean().transpose();
  const Vec mu0 = phi_history.topRows(t_s - tau).colwise().mean().transpose();
  const Vec d = psi - mu0;
  if (d.isZero(0.0)) return 0.0;

  const Mat centered = phi_history.rowwise() - psi.transpose();
  Mat s = centered.transpose() * centered / static_cast<double>(t_s - 1);
  const double trace = s.trace();
  s.diagonal().array() += ridge * trace / static_cast<double>(dim);

  Eigen::LLT<Mat> llt(s);
  if (trace <= 0.0 || llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "hotelling_t2: covariance is singular after ridging (t_s=" << t_s << ", dim=" << dim
        << ", trace=" << trace << ", ridge=" << ridge << ")";
    throw NumericalError(msg.str());
  }
  const double t2 = static_cast<double>(t_s) * d.dot(llt.solve(d));
  return std::max(t2, 0.0);
}

double f_cdf(double x, double d1, double d2) {
  require(std::isfinite(x) && std::isfinite(d1) && std::isfinite(d2), "f_cdf: non-finite input");
  require(d1 > 0.0 && d2 > 0.0, "f_cdf: degrees of freedom must be positive");
  if (x <= 0.0) return 0.0;
  const double z = d1 * x / (d1 * x + d2);
  return boost::math::ibeta(d1 / 2.0, d2 / 2.0, z);
}

namespace {

double f_survival(double x, double d1, double d2) {
  if (x <= 0.0) return 1.0;
  const double z = d1 * x / (d1 * x + d2);
  return boost::math::ibetac(d1 / 2.0, d2 / 2.0, z);
}

}  // namespace

int degrees_of_freedom(DegreesOfFreedom df, int t_s, int tau) {
  return df == DegreesOfFreedom::TwoTsMinusOne ? 2 * (t_s - 1) : 2 * tau - 2;
}

double hotelling_pvalue(double t2, int dim, int m) {
  require(std::isfinite(t2) && t2 >= 0.0, "hotelling_pvalue: t2 must be finite and >= 0");
  if (dim < 1 || m <= dim)
    throw PreconditionError("hotelling_pvalue: window too short (m=" + std::to_string(m) +
                            ", dim=" + std::to_string(dim) + ")");
  const double p = dim, mm = m;
  const double f = t2 * (mm - p + 1.0) / (p * mm);
  return std::clamp(f_survival(f, p, mm - p + 1.0), 0.0, 1.0);
}

TestVerdict should_stop(const ContributionLedger& ledger, const IndexSet& tested_nodes, int t,
                        const StoppingConfig& config) {
  const int dim = static_cast<int>(tested_nodes.size());
  const int min_it = config.min_iterations.value_or(config.tau + dim + 2);
  if (t < min_it)
    throw PreconditionError("should_stop: iteration " + std::to_string(t) +
                            " is before min_iterations " + std::to_string(min_it));
  TestVerdict v;
  v.tested_nodes = tested_nodes;
  v.t2 = hotelling_t2(ledger.history(tested_nodes), config.tau, config.ridge);
  v.p_value = hotelling_pvalue(v.t2, dim, degrees_of_freedom(config.df, ledger.t_count(), config.tau));
  v.stop = v.p_value >= config.alpha;
  return v;
}

double recall_fraction(const Vec& psi, const IndexSet& designated_low) {
  if (designated_low.empty()) throw PreconditionError("recall_fraction: no designated nodes");
  std::vector<int> order(static_cast<std::size_t>(psi.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return psi(a) < psi(b); });
  const auto take = std::min(designated_low.size(), order.size());
  int hits = 0;
  for (std::size_t r = 0; r < take; ++r)
    if (std::find(designated_low.begin(), designated_low.end(), order[r]) != designated_low.end()) ++hits;
  return static_cast<double>(hits) / static_cast<double>(designated_low.size());
}

StoppingMonitor::StoppingMonitor(StoppingConfig config, int n_nodes, Rng& rng)
    : config_(std::move(config)) {
  config_.validate(n_nodes);
  if (config_.subsample_m) {
    tested_ = subsample_nodes(n_nodes, *config_.subsample_m, rng);
  } else {
    tested_.resize(static_cast<std::size_t>(n_nodes));
    std::iota(tested_.begin(), tested_.end(), 0);
  }
  min_iterations_ = config_.effective_min_iterations(n_nodes);
}

std::optional<TestVerdict> StoppingMonitor::observe(const ContributionLedger& ledger, int t) {
  if (t < min_iterations_) return std::nullopt;
  auto verdict = should_stop(ledger, tested_, t, config_);
  if (verdict.stop && !t_alpha_) t_alpha_ = t;
  return verdict;
}

CalibrationResult calibrate_null(double alpha, int runs, int dim, int t_s, int tau,
                                 DegreesOfFreedom df, std::uint64_t seed, double ridge) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("calibrate_null: alpha must lie in (0, 1)");
  if (runs < 1 || dim < 1) throw ConfigError("calibrate_null: need runs >= 1 and dim >= 1");
  if (!(tau >= 1 && tau < t_s)) throw ConfigError("calibrate_null: need 1 <= tau < t_s");
  const int m = degrees_of_freedom(df, t_s, tau);
  CalibrationResult out;
  out.runs = runs;
  std::normal_distribution<double> normal;
  for (int r = 0; r < runs; ++r) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(r)});
    Mat history(t_s, dim);
    for (int i = 0; i < t_s; ++i)
      for (int j = 0; j < dim; ++j) history(i, j) = normal(rng);
    if (hotelling_pvalue(hotelling_t2(history, tau, ridge), dim, m) < alpha) ++out.rejections;
  }
  return out;
}

}  // namespace equifl
