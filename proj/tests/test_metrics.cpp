#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "equifl/metrics.hpp"
#include "equifl/rng.hpp"

using namespace equifl;

namespace {

Vec random_vec(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Vec v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

RunReport sample_report() {
  RunReport r;
  r.mode = "ours";
  r.seed = 42;
  r.n_nodes = 2;
  r.per_node = {{0, 0.0, 0.1234567890123456789, 1.5, 0.8, 0.7},
                {1, 0.5, std::nullopt, 2.25, 0.9, 1.0 / 3.0}};
  r.aggregate.pearson_loss_zeta = 0.999999999999;
  r.aggregate.pearson_psi_zeta = -1.0 / 7.0;
  r.aggregate.recall_fraction = 1.0;
  r.aggregate.std_online_perf = 0.05;
  r.aggregate.min_online_perf = 0.8;
  r.aggregate.max_online_perf = 0.9;
  r.aggregate.t_alpha = 33;
  r.aggregate.t_total = 35;
  r.aggregate.explore_converged = true;
  for (int t = 1; t <= 35; ++t) {
    IterationRecord rec;
    rec.iteration = t;
    rec.phase = t <= 33 ? Phase::Explore : Phase::Exploit;
    rec.global_loss = 1.0 / t + 1e-17 * t;
    if (t >= 30 && t <= 33) rec.p_value = 0.1 * (t - 29) + 1.0 / 3.0;
    if (t >= 2 && t <= 33) rec.delta_psi = std::exp(-double(t));
    rec.node_loss = {std::sqrt(double(t)), 2.0 / t};
    rec.staleness = {t > 33 ? t - 33 : 0, 0};
    r.trajectory.push_back(rec);
  }
  return r;
}

}  // namespace

TEST(Pearson, Examples) {
  const Vec x = Vec::LinSpaced(20, -3.0, 4.0);
  EXPECT_NEAR(*pearson(x, Vec(2 * x.array() + 1)), 1.0, 1e-15);
  EXPECT_NEAR(*pearson(x, Vec(-x)), -1.0, 1e-15);
  EXPECT_LE(std::abs(*pearson(random_vec(10000, 1), random_vec(10000, 2))), 0.04);
}

TEST(Pearson, ConstantInputIsMissing) {
  EXPECT_FALSE(pearson(Vec::Ones(5), Vec::LinSpaced(5, 0, 1)).has_value());
  EXPECT_FALSE(pearson(Vec::LinSpaced(5, 0, 1), Vec::Zero(5)).has_value());
  EXPECT_THROW(pearson(Vec::Ones(3), Vec::Ones(4)), ContractViolation);
}

TEST(Pearson, AffineInvariance) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Vec x = random_vec(30, 10 + s), y = random_vec(30, 50 + s);
    const double base = *pearson(x, y);
    EXPECT_NEAR(*pearson(Vec(3.5 * x.array() - 2.0), y), base, 1e-12);
    EXPECT_NEAR(*pearson(x, Vec(0.01 * y.array() + 100.0)), base, 1e-12);
  }
}

TEST(OnlinePerformance, Examples) {
  EXPECT_EQ(online_performance({2.5, 2.5, 2.5}), 2.5);
  EXPECT_EQ(online_performance({1, 0, 1, 0}), 0.5);
  EXPECT_THROW(online_performance({}), ContractViolation);
}

TEST(OnlinePerformance, MergedHistoryIsLengthWeighted) {
  const Vec v = random_vec(37, 3);
  const std::vector<double> all(v.begin(), v.end());
  const std::vector<double> a(all.begin(), all.begin() + 12), b(all.begin() + 12, all.end());
  EXPECT_NEAR(online_performance(all), (12 * online_performance(a) + 25 * online_performance(b)) / 37,
              1e-12);
  for (std::size_t len = 1; len <= all.size(); ++len) {
    double naive = 0.0;
    for (std::size_t i = 0; i < len; ++i) naive += all[i];
    EXPECT_NEAR(online_performance({all.begin(), all.begin() + long(len)}), naive / double(len), 1e-12);
  }
}

TEST(EqualitySpread, Examples) {
  const auto flat = equality_spread(Vec::Constant(4, 1.5));
  EXPECT_EQ(flat.std, 0.0);
  EXPECT_EQ(flat.min, flat.max);
  const auto two = equality_spread((Vec(2) << 0.0, 2.0).finished());
  EXPECT_EQ(two.std, 1.0);
  EXPECT_EQ(two.min, 0.0);
  EXPECT_EQ(two.max, 2.0);
}

TEST(EqualitySpread, TwoPassOracle) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Vec v = random_vec(25, 100 + s);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= 25;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(equality_spread(v).std, std::sqrt(ss / 25), 1e-12);
  }
}

TEST(Report, SerialisationRoundTrips) {
  const RunReport r = sample_report();
  const RunReport back = parse_report(summary_json(r), trajectory_csv(r));
  EXPECT_EQ(back, r);
}

TEST(Report, FilesRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "equifl_report_test";
  std::filesystem::remove_all(dir);
  const RunReport r = sample_report();
  write_report(r, dir.string());
  EXPECT_TRUE(std::filesystem::exists(dir / kSummaryFile));
  EXPECT_TRUE(std::filesystem::exists(dir / kMetricsFile));
  EXPECT_EQ(read_report(dir.string()), r);
  std::filesystem::remove_all(dir);
}

TEST(Report, CsvLayout) {
  const std::string csv = trajectory_csv(sample_report());
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "iteration,phase,global_loss,p_value,delta_psi,loss_0,loss_1,staleness_0,staleness_1");
  const std::string first = csv.substr(csv.find('\n') + 1, csv.find('\n', csv.find('\n') + 1) - csv.find('\n') - 1);
  EXPECT_EQ(first.substr(0, 10), "1,explore,");
  EXPECT_NE(first.find(",,"), std::string::npos);  // p_value and delta_psi are missing at t=1
}

TEST(Report, MissingValuesAreNullInJson) {
  const std::string json = summary_json(sample_report());
  EXPECT_NE(json.find("\"pearson_staleness_zeta\": null"), std::string::npos);
  EXPECT_NE(json.find("\"psi_final\": null"), std::string::npos);
}

TEST(Report, UnreadableInput) {
  EXPECT_THROW(read_report("/nonexistent/dir"), ConfigError);
  EXPECT_THROW(parse_phase("warmup"), ConfigError);
}
