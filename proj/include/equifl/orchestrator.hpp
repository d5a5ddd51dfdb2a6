#pragma once

#include <optional>
#include <vector>

#include "equifl/config.hpp"
#include "equifl/datagen.hpp"
#include "equifl/incentive.hpp"
#include "equifl/learner.hpp"
#include "equifl/metrics.hpp"
#include "equifl/stopping.hpp"
#include "equifl/valuation.hpp"

namespace equifl {

/// Everything derived once from a config: node profiles, the shared base
/// distribution, and the dishonest node's predicted stop (if any).
struct Experiment {
  ExperimentConfig config;
  std::vector<NodeProfile> profiles;
  BaseGenerator generator;
  Vec weights;                    // p_i
  std::optional<int> dishonest_stop;  // T_pred for a non-NONSTOP dishonest node

  explicit Experiment(ExperimentConfig cfg);

  Eigen::Index input_dim() const { return generator.dim(); }
  /// Fresh batches of every node for iteration t.
  std::vector<Batch> batches(int t) const;
  /// Undegraded rows of every node at iteration t, pooled.
  Batch validation(int t) const;
};

struct PhaseState {
  Phase phase = Phase::Explore;
  int t = 0;  // last completed iteration
  ModelParams coordinator;
  std::vector<ModelParams> node_params;
  ContributionLedger ledger;
  StalenessTracker tracker;
  std::optional<SamplingPlan> plan;
  std::optional<int> t_alpha;
  bool explore_converged = false;
  std::vector<IterationRecord> trajectory;
};

PhaseState initial_state(const Experiment& exp);

/// Full-participation (or Bernoulli-participation) rounds until the stopping
/// test fires or the horizon is reached. Leaves the state in Exploit with a
/// frozen plan when the test fired.
PhaseState run_explore(const Experiment& exp, PhaseState state);

/// Sampled rounds from state.t + 1 through the horizon.
PhaseState run_exploit(const Experiment& exp, PhaseState state);

enum class GradientTransform { Identity, Zero };

/// What a node that predicts the stop at t_pred uploads at iteration t.
GradientTransform dishonest_policy(DishonestStrategy strategy, std::optional<int> t_pred, int t);

RunReport run_baseline(const Experiment& exp);

RunReport build_report(const Experiment& exp, const PhaseState& state);

RunReport run_experiment(const ExperimentConfig& config);

}  // namespace equifl
