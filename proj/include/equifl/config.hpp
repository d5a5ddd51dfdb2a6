#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "equifl/datagen.hpp"
#include "equifl/learner.hpp"
#include "equifl/stopping.hpp"
#include "equifl/valuation.hpp"

namespace equifl {

enum class RunMode { Ours, FedAvgUniform, Standalone };
enum class DishonestStrategy { NonStop, Random, Poisson };

std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view name);
std::string_view to_string(DishonestStrategy s);
DishonestStrategy parse_dishonest_strategy(std::string_view name);

struct DataConfig {
  Task task = Task::Classification;
  int dim = 5;
  int n_classes = 3;
  int batch_size = 10;
  double class_separation = 1.0;
  double residual_sigma = 0.5;
  std::string csv_path;  // empty: synthetic generator
};

struct DishonestSpec {
  int node_id = 0;
  DishonestStrategy strategy = DishonestStrategy::NonStop;
  std::optional<int> t_pred;  // fixed prediction instead of a random draw
};

struct ExperimentConfig {
  int n_nodes = 10;
  int k = 4;
  double beta = 0.01;
  double base_complexity = 0.0;
  int horizon = 400;
  StoppingConfig stopping;
  UtilityMode utility = UtilityMode::CosineSimilarity;
  LossSpec loss;
  DataConfig data;
  std::vector<QualitySpec> qualities;  // one per node
  RunMode mode = RunMode::Ours;
  double participation_prob = 1.0;
  std::optional<DishonestSpec> dishonest;
  bool renormalize_weights = false;
  int exact_cap = kDefaultExactCap;
  int shapley_repeats = 1;
  std::optional<IndexSet> designated_low;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Flat key -> value view of a config file. Keys are validated against the
/// documented set; values are kept verbatim until `build_config`.
using ConfigMap = std::map<std::string, std::string>;

/// Parses `key = value` lines; '#' starts a comment; blank lines ignored.
/// Unknown or repeated keys are rejected.
ConfigMap parse_config_text(std::string_view text);
ConfigMap load_config_file(const std::string& path);

/// Overrides one key (used by sweeps); rejects unknown keys.
void set_config_value(ConfigMap& map, const std::string& key, const std::string& value);

ExperimentConfig build_config(const ConfigMap& map);

/// Every recognised key with its default value, in documentation order.
const std::vector<std::pair<std::string, std::string>>& config_keys();

}  // namespace equifl
