#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "equifl/stopping.hpp"

using namespace equifl;

namespace {

Mat gaussian_rows(int rows, int dim, std::uint64_t seed, double drift_per_row = 0.0) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Mat m(rows, dim);
  for (int r = 0; r < rows; ++r)
    for (int j = 0; j < dim; ++j) m(r, j) = normal(rng) + drift_per_row * r;
  return m;
}

ContributionLedger ledger_from(const Mat& rows) {
  ContributionLedger ledger(static_cast<int>(rows.cols()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) ledger.append(rows.row(r).transpose());
  return ledger;
}

IndexSet iota_set(int n) {
  IndexSet s(static_cast<std::size_t>(n));
  std::iota(s.begin(), s.end(), 0);
  return s;
}

}  // namespace

// Reference values from a 40-digit mpmath evaluation of the regularised
// incomplete beta function.
TEST(FCdf, MatchesHighPrecisionReference) {
  struct Case {
    double x, d1, d2, expected;
  };
  const Case cases[] = {
      {3.0, 5, 10, 0.93444243790615588672},   {0.5, 1, 1, 0.39182655203060727017},
      {1.7, 2, 7, 0.74983505528594400201},    {0.01, 3, 40, 0.0013941634486217400475},
      {12.5, 4, 4, 0.98435197886501041508},   {2.2, 5, 114, 0.94094097195910815314},
      {0.9, 10, 10, 0.43547708433322562073},  {4.0, 1, 30, 0.94537495503701689608},
      {0.3, 7, 3, 0.085874502252084557371},   {25.0, 2, 2, 0.96153846153846153846},
  };
  for (const auto& c : cases) EXPECT_NEAR(f_cdf(c.x, c.d1, c.d2), c.expected, 1e-8) << c.x;
}

TEST(FCdf, BasicShape) {
  EXPECT_EQ(f_cdf(0.0, 3, 4), 0.0);
  for (double d : {1.0, 2.0, 5.0, 17.0}) EXPECT_NEAR(f_cdf(1.0, d, d), 0.5, 1e-14);
  double previous = 0.0;
  for (double x = 0.0; x < 20.0; x += 0.25) {
    const double v = f_cdf(x, 4, 9);
    EXPECT_GE(v, previous);
    EXPECT_LE(v, 1.0);
    previous = v;
  }
  EXPECT_THROW(f_cdf(std::nan(""), 1, 1), ContractViolation);
  EXPECT_THROW(f_cdf(1.0, INFINITY, 1), ContractViolation);
}

TEST(HotellingPvalue, SurvivalShape) {
  EXPECT_EQ(hotelling_pvalue(0.0, 5, 118), 1.0);
  double previous = 1.0;
  for (double t2 = 0.5; t2 < 40.0; t2 += 0.5) {
    const double p = hotelling_pvalue(t2, 5, 118);
    EXPECT_LT(p, previous);
    previous = p;
  }
  EXPECT_THROW(hotelling_pvalue(1.0, 5, 5), PreconditionError);
}

TEST(HotellingPvalue, UsesTheFCorrespondence) {
  // T2(p, m) = p m / (m - p + 1) F(p, m - p + 1)
  const double t2 = 7.3;
  const int p = 3, m = 40;
  EXPECT_NEAR(hotelling_pvalue(t2, p, m), 1.0 - f_cdf(t2 * (m - p + 1.0) / (p * m), p, m - p + 1.0), 1e-14);
}

TEST(HotellingT2, IdenticalRowsGiveZero) {
  const Mat rows = Mat::Ones(30, 4) * 0.7;
  EXPECT_EQ(hotelling_t2(rows, 10, 1e-8), 0.0);
}

TEST(HotellingT2, OneDimensionalScalarOracle) {
  const Mat rows = gaussian_rows(40, 1, 3, 0.02);
  const int tau = 5, t_s = 40;
  double all = 0.0, early = 0.0;
  for (int r = 0; r < t_s; ++r) all += rows(r, 0);
  for (int r = 0; r < t_s - tau; ++r) early += rows(r, 0);
  all /= t_s;
  early /= (t_s - tau);
  double s2 = 0.0;
  for (int r = 0; r < t_s; ++r) s2 += (rows(r, 0) - all) * (rows(r, 0) - all);
  s2 /= (t_s - 1);
  const double expected = t_s * (all - early) * (all - early) / s2;
  EXPECT_NEAR(hotelling_t2(rows, tau, 0.0), expected, 1e-12 * expected);
}

TEST(HotellingT2, ScaleInvariant) {
  const Mat rows = gaussian_rows(50, 3, 4);
  const double base = hotelling_t2(rows, 10, 1e-8);
  for (double c : {0.001, 2.5, 1e4}) EXPECT_NEAR(hotelling_t2(c * rows, 10, 1e-8), base, 1e-9 * base);
}

TEST(HotellingT2, NonNegative) {
  for (std::uint64_t s = 0; s < 30; ++s) EXPECT_GE(hotelling_t2(gaussian_rows(30, 4, 10 + s), 8, 1e-8), 0.0);
}

TEST(HotellingT2, Preconditions) {
  EXPECT_THROW(hotelling_t2(gaussian_rows(20, 5, 1), 5, 1e-8), PreconditionError);
  EXPECT_THROW(hotelling_t2(gaussian_rows(10, 2, 1), 10, 1e-8), PreconditionError);
}

TEST(HotellingT2, SingularCovarianceIsANumericalError) {
  Mat rows = Mat::Zero(30, 2);
  rows(29, 0) = 1.0;  // moves the mean but leaves a rank-one covariance
  rows(29, 1) = 1.0;
  EXPECT_THROW(hotelling_t2(rows, 5, 0.0), NumericalError);
  EXPECT_NO_THROW(hotelling_t2(rows, 5, 1e-8));
}

TEST(SubsampleNodes, FullAndDeterministic) {
  Rng a(1), b(1);
  EXPECT_EQ(subsample_nodes(6, 6, a), iota_set(6));
  Rng c(5), d(5);
  EXPECT_EQ(subsample_nodes(10, 4, c), subsample_nodes(10, 4, d));
  EXPECT_THROW(subsample_nodes(3, 4, b), ConfigError);
}

TEST(SubsampleNodes, UniformSingleton) {
  Rng rng(7);
  std::vector<int> counts(3, 0);
  const int draws = 30000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(subsample_nodes(3, 1, rng).front())];
  for (int c : counts) {
    EXPECT_GE(c / double(draws), 0.323);
    EXPECT_LE(c / double(draws), 0.343);
  }
}

TEST(ShouldStop, ConstantHistoryStopsAtMinIterations) {
  StoppingConfig cfg;
  cfg.tau = 6;
  const int n = 3;
  const int min_it = cfg.effective_min_iterations(n);
  EXPECT_EQ(min_it, 11);
  const auto ledger = ledger_from(Mat::Constant(min_it, n, 0.2));
  const auto v = should_stop(ledger, iota_set(n), min_it, cfg);
  EXPECT_TRUE(v.stop);
  EXPECT_EQ(v.p_value, 1.0);
  EXPECT_THROW(should_stop(ledger, iota_set(n), min_it - 1, cfg), PreconditionError);
}

TEST(ShouldStop, LinearDriftDoesNotStopEarly) {
  // Mean drifts by 5 sd over every tau-row window. The pooled covariance absorbs a
  // sustained trend, so the statistic decays like 3 tau^2 / t; check up to 10 tau.
  StoppingConfig cfg;
  cfg.tau = 10;
  const int n = 3;
  const Mat rows = gaussian_rows(100, n, 8, 5.0 / cfg.tau);
  for (int t = cfg.effective_min_iterations(n); t <= 10 * cfg.tau; ++t) {
    const auto v = should_stop(ledger_from(rows.topRows(t)), iota_set(n), t, cfg);
    EXPECT_FALSE(v.stop) << "t=" << t;
  }
}

TEST(ShouldStop, MonotoneInAlpha) {
  StoppingConfig cfg;
  cfg.tau = 8;
  const auto ledger = ledger_from(gaussian_rows(40, 4, 9));
  for (double alpha : {0.9, 0.5, 0.2, 0.05, 0.01}) {
    cfg.alpha = alpha;
    const auto v = should_stop(ledger, iota_set(4), 40, cfg);
    EXPECT_EQ(v.stop, v.p_value >= alpha);
    for (double lower : {alpha / 2, alpha / 10}) {
      StoppingConfig low = cfg;
      low.alpha = lower;
      if (v.stop) EXPECT_TRUE(should_stop(ledger, iota_set(4), 40, low).stop);
    }
  }
}

TEST(StoppingConfig, Validation) {
  StoppingConfig cfg;
  cfg.alpha = 1.0;
  EXPECT_THROW(cfg.validate(5), ConfigError);
  cfg.alpha = 0.0;
  EXPECT_THROW(cfg.validate(5), ConfigError);
  cfg = StoppingConfig{};
  cfg.tau = 5;
  EXPECT_THROW(cfg.validate(5), ConfigError);
  cfg.subsample_m = 3;
  EXPECT_NO_THROW(cfg.validate(5));
  cfg.subsample_m = 6;
  EXPECT_THROW(cfg.validate(5), ConfigError);
  cfg = StoppingConfig{};
  cfg.min_iterations = cfg.tau;
  EXPECT_THROW(cfg.validate(5), ConfigError);
}

TEST(DegreesOfFreedom, BothRules) {
  EXPECT_EQ(degrees_of_freedom(DegreesOfFreedom::TwoTsMinusOne, 60, 20), 118);
  EXPECT_EQ(degrees_of_freedom(DegreesOfFreedom::TwoTauMinusTwo, 60, 20), 38);
  EXPECT_EQ(parse_degrees_of_freedom("tau"), DegreesOfFreedom::TwoTauMinusTwo);
  EXPECT_THROW(parse_degrees_of_freedom("x"), ConfigError);
}

TEST(Calibration, NullRejectionNeverExceedsAlpha) {
  // The statistic compares overlapping windows, so under i.i.d. rows it is
  // stochastically smaller than the reference distribution: the test is
  // conservative rather than exact.
  for (double alpha : {0.05, 0.5}) {
    const auto res = calibrate_null(alpha, 2000, 5, 60, 20, DegreesOfFreedom::TwoTsMinusOne, 3);
    EXPECT_LE(res.rejection_rate(), alpha);
  }
}

TEST(RecallFraction, Examples) {
  Vec psi = Vec::LinSpaced(10, 0.0, 9.0);
  EXPECT_EQ(recall_fraction(psi, {0, 1, 2}), 1.0);
  EXPECT_EQ(recall_fraction(psi.reverse(), {0, 1, 2}), 0.0);
  EXPECT_THROW(recall_fraction(psi, {}), PreconditionError);
}

TEST(RecallFraction, TiesGoToLowerIndex) {
  const Vec psi = Vec::Zero(4);
  EXPECT_EQ(recall_fraction(psi, {0, 1}), 1.0);
  EXPECT_EQ(recall_fraction(psi, {2, 3}), 0.0);
}

TEST(RecallFraction, RandomPermutationsAverageThreeTenths) {
  Rng rng(17);
  Vec psi = Vec::LinSpaced(10, 0.0, 9.0);
  double total = 0.0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    std::shuffle(psi.begin(), psi.end(), rng);
    total += recall_fraction(psi, {0, 1, 2});
  }
  EXPECT_NEAR(total / trials, 0.3, 0.02);
}

TEST(StoppingMonitor, RecordsFirstStop) {
  StoppingConfig cfg;
  cfg.tau = 5;
  Rng rng(1);
  StoppingMonitor monitor(cfg, 2, rng);
  EXPECT_EQ(monitor.min_iterations(), 9);
  ContributionLedger ledger(2);
  for (int t = 1; t <= 12; ++t) {
    ledger.append(Vec::Constant(2, 1.0));
    const auto v = monitor.observe(ledger, t);
    EXPECT_EQ(v.has_value(), t >= 9);
  }
  EXPECT_EQ(monitor.t_alpha(), 9);
}

TEST(StoppingMonitor, SubsampleIsFixed) {
  StoppingConfig cfg;
  cfg.subsample_m = 2;
  cfg.tau = 4;
  Rng rng(3);
  StoppingMonitor monitor(cfg, 8, rng);
  EXPECT_EQ(monitor.tested_nodes().size(), 2u);
  EXPECT_EQ(monitor.min_iterations(), 8);
}
