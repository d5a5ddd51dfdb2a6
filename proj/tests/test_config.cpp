#include <gtest/gtest.h>

#include "equifl/config.hpp"

using namespace equifl;

TEST(Config, DefaultsBuild) {
  const auto c = build_config({});
  EXPECT_EQ(c.n_nodes, 10);
  EXPECT_EQ(c.k, 4);
  EXPECT_EQ(c.mode, RunMode::Ours);
  EXPECT_EQ(c.utility, UtilityMode::CosineSimilarity);
  EXPECT_EQ(c.loss.kind, LossKind::SoftmaxCrossEntropy);
  EXPECT_EQ(c.qualities.size(), 10u);
  EXPECT_FALSE(c.renormalize_weights);
  EXPECT_FALSE(c.dishonest.has_value());
  ASSERT_TRUE(c.designated_low.has_value());
  EXPECT_TRUE(c.designated_low->empty());  // every node is clean
}

TEST(Config, ParsesEveryKey) {
  const auto map = parse_config_text(R"(
# comment line
mode = ours
seed = 99
n_nodes = 5
k = 2
beta = 0.5
base_complexity = 3
horizon = 120
utility = inner_product
exact_cap = 8
shapley_repeats = 2
participation_prob = 0.75
renormalize_weights = true
designated_low = 4, 3
stopping.alpha = 0.3
stopping.tau = 12
stopping.subsample = 3
stopping.min_iterations = 20
stopping.ridge = 1e-6
stopping.df = tau
loss.kind = squared_error
loss.l2 = 0.01
loss.learning_rate = 0.2
data.task = regression
data.dim = 4
data.classes = 3
data.batch_size = 16
data.class_separation = 2
data.residual_sigma = 0.25
data.csv =
quality.kind = feature_noise
quality.zeta = 0, 0.1, 0.2, 0.3, 0.4   # trailing comment
dishonest.node = 2
dishonest.strategy = poisson
dishonest.t_pred = 50
)");
  EXPECT_EQ(map.size(), config_keys().size());
  const auto c = build_config(map);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.n_nodes, 5);
  EXPECT_EQ(c.k, 2);
  EXPECT_EQ(c.beta, 0.5);
  EXPECT_EQ(c.base_complexity, 3.0);
  EXPECT_EQ(c.horizon, 120);
  EXPECT_EQ(c.utility, UtilityMode::InnerProduct);
  EXPECT_EQ(c.exact_cap, 8);
  EXPECT_EQ(c.shapley_repeats, 2);
  EXPECT_EQ(c.participation_prob, 0.75);
  EXPECT_TRUE(c.renormalize_weights);
  EXPECT_EQ(*c.designated_low, (IndexSet{3, 4}));
  EXPECT_EQ(c.stopping.alpha, 0.3);
  EXPECT_EQ(c.stopping.tau, 12);
  EXPECT_EQ(c.stopping.subsample_m, 3);
  EXPECT_EQ(c.stopping.min_iterations, 20);
  EXPECT_EQ(c.stopping.ridge, 1e-6);
  EXPECT_EQ(c.stopping.df, DegreesOfFreedom::TwoTauMinusTwo);
  EXPECT_EQ(c.loss.kind, LossKind::SquaredError);
  EXPECT_EQ(c.loss.l2_reg, 0.01);
  EXPECT_EQ(c.loss.learning_rate, 0.2);
  EXPECT_EQ(c.data.task, Task::Regression);
  EXPECT_EQ(c.data.dim, 4);
  EXPECT_EQ(c.data.n_classes, 0);
  EXPECT_EQ(c.data.batch_size, 16);
  EXPECT_EQ(c.data.class_separation, 2.0);
  EXPECT_EQ(c.data.residual_sigma, 0.25);
  EXPECT_TRUE(c.data.csv_path.empty());
  ASSERT_EQ(c.qualities.size(), 5u);
  EXPECT_EQ(c.qualities[3].kind, QualityKind::FeatureNoise);
  EXPECT_EQ(c.qualities[3].zeta, 0.3);
  ASSERT_TRUE(c.dishonest.has_value());
  EXPECT_EQ(c.dishonest->node_id, 2);
  EXPECT_EQ(c.dishonest->strategy, DishonestStrategy::Poisson);
  EXPECT_EQ(c.dishonest->t_pred, 50);
}

TEST(Config, UnknownAndDuplicateKeysRejected) {
  EXPECT_THROW(parse_config_text("betta = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("k = 1\nk = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("just some words\n"), ConfigError);
  ConfigMap map;
  EXPECT_THROW(set_config_value(map, "stopping.beta", "1"), ConfigError);
  EXPECT_THROW(build_config({{"nope", "1"}}), ConfigError);
}

TEST(Config, BadValuesRejected) {
  EXPECT_THROW(build_config({{"k", "11"}}), ConfigError);
  EXPECT_THROW(build_config({{"k", "two"}}), ConfigError);
  EXPECT_THROW(build_config({{"beta", "0"}}), ConfigError);
  EXPECT_THROW(build_config({{"participation_prob", "0"}}), ConfigError);
  EXPECT_THROW(build_config({{"stopping.alpha", "1.0"}}), ConfigError);
  EXPECT_THROW(build_config({{"horizon", "32"}}), ConfigError);  // min_iterations is 32
  EXPECT_NO_THROW(build_config({{"horizon", "33"}}));
  EXPECT_THROW(build_config({{"mode", "async"}}), ConfigError);
  EXPECT_THROW(build_config({{"quality.zeta", "0.1, 0.2"}}), ConfigError);
  EXPECT_THROW(build_config({{"quality.kind", "label_noise"}, {"data.task", "regression"}}), ConfigError);
  EXPECT_THROW(build_config({{"loss.kind", "squared_error"}}), ConfigError);
  EXPECT_THROW(build_config({{"dishonest.node", "10"}}), ConfigError);
  EXPECT_THROW(build_config({{"renormalize_weights", "maybe"}}), ConfigError);
}

TEST(Config, LinspaceZetaAndDefaultDesignatedSet) {
  const auto c = build_config({{"quality.kind", "label_noise"}, {"quality.zeta", "linspace 0 0.5"}});
  ASSERT_EQ(c.qualities.size(), 10u);
  EXPECT_EQ(c.qualities.front().zeta, 0.0);
  EXPECT_NEAR(c.qualities.back().zeta, 0.5, 1e-15);
  EXPECT_EQ(*c.designated_low, (IndexSet{7, 8, 9}));
}

TEST(Config, QuantityDesignatedSetUsesRecordedZeta) {
  // Quantity records the negative multiplier, so the smallest nodes rank worst.
  const auto c = build_config({{"n_nodes", "4"},
                               {"k", "2"},
                               {"stopping.tau", "5"},
                               {"quality.kind", "quantity"},
                               {"quality.zeta", "2, 0.5, 1, 3"}});
  EXPECT_EQ(*c.designated_low, (IndexSet{1, 2}));
}

TEST(Config, BaselineSkipsStoppingChecks) {
  EXPECT_NO_THROW(build_config({{"mode", "fedavg"}, {"horizon", "5"}}));
  EXPECT_NO_THROW(build_config({{"mode", "standalone"}, {"n_nodes", "1"}, {"k", "1"}, {"horizon", "5"}}));
}

TEST(Config, SetValueOverrides) {
  ConfigMap map = parse_config_text("beta = 0.1\n");
  set_config_value(map, "beta", "2");
  set_config_value(map, "seed", "7");
  const auto c = build_config(map);
  EXPECT_EQ(c.beta, 2.0);
  EXPECT_EQ(c.seed, 7u);
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config_file("/nonexistent.cfg"), ConfigError); }
