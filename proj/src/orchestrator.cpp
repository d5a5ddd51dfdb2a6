#include "equifl/orchestrator.hpp"

#include <numeric>
#include <random>

namespace equifl {

namespace {

BaseGenerator generator_for(const ExperimentConfig& c) {
  if (!c.data.csv_path.empty()) return load_csv_generator(c.data.csv_path, c.data.task);
  GeneratorOptions opts;
  opts.class_separation = c.data.class_separation;
  opts.residual_sigma = c.data.residual_sigma;
  return make_base_generator(c.data.task, c.data.dim, c.data.n_classes,
                             derive_seed(c.seed, {tag(Stream::Generator)}), opts);
}

std::optional<int> predicted_stop(const ExperimentConfig& c) {
  if (!c.dishonest || c.dishonest->strategy == DishonestStrategy::NonStop) return std::nullopt;
  if (c.dishonest->t_pred) return c.dishonest->t_pred;
  Rng rng = make_rng(c.seed, {tag(Stream::Dishonest)});
  if (c.dishonest->strategy == DishonestStrategy::Random)
    return std::uniform_int_distribution<int>(0, c.horizon)(rng);

  // Poisson rate: the stop iteration the same run reaches with every node honest.
  ExperimentConfig honest = c;
  honest.dishonest.reset();
  const Experiment dry(honest);
  const PhaseState explored = run_explore(dry, initial_state(dry));
  const double rate = explored.t_alpha.value_or(c.horizon);
  return std::poisson_distribution<int>(rate)(rng);
}

IndexSet all_nodes(int n) {
  IndexSet out(static_cast<std::size_t>(n));
  std::iota(out.begin(), out.end(), 0);
  return out;
}

IndexSet explore_participants(const Experiment& exp, int t) {
  const auto& c = exp.config;
  if (c.participation_prob >= 1.0) return all_nodes(c.n_nodes);
  IndexSet out;
  for (int i = 0; i < c.n_nodes; ++i) {
    Rng rng = make_rng(c.seed, {tag(Stream::Participation), static_cast<std::uint64_t>(i),
                                static_cast<std::uint64_t>(t)});
    if (std::bernoulli_distribution(c.participation_prob)(rng)) out.push_back(i);
  }
  return out;
}

IndexSet uniform_subset(int n, int k, Rng& rng) {
  IndexSet pool = all_nodes(n);
  for (int j = 0; j < k; ++j) {
    std::uniform_int_distribution<int> pick(j, n - 1);
    std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

// Selected nodes sync to the coordinator and upload one local step each.
std::vector<GradientUpdate> local_updates(const Experiment& exp, PhaseState& state,
                                          const IndexSet& selected,
                                          const std::vector<Batch>& batches, int t) {
  std::vector<GradientUpdate> updates;
  updates.reserve(selected.size());
  for (int i : selected) {
    const auto idx = static_cast<std::size_t>(i);
    state.node_params[idx] = state.coordinator;
    GradientUpdate u = grad(state.node_params[idx], batches[idx], exp.config.loss, i);
    u.iteration = t;
    if (exp.config.dishonest && exp.config.dishonest->node_id == i &&
        dishonest_policy(exp.config.dishonest->strategy, exp.dishonest_stop, t) ==
            GradientTransform::Zero)
      u.delta.setZero();
    updates.push_back(std::move(u));
  }
  return updates;
}

void merge_updates(const Experiment& exp, PhaseState& state, const IndexSet& selected,
                   const std::vector<GradientUpdate>& updates, int t) {
  if (selected.empty()) {
    state.coordinator.version = t;
    return;
  }
  const GradientUpdate agg =
      aggregate(updates, exp.weights, selected, exp.config.renormalize_weights);
  state.coordinator = apply_update(state.coordinator, agg);
  for (int i : selected) state.node_params[static_cast<std::size_t>(i)] = state.coordinator;
}

// Per-iteration Shapley values over the participating nodes; absent nodes get 0.
Vec iteration_contributions(const Experiment& exp, const IndexSet& participants,
                            const std::vector<GradientUpdate>& updates, int t) {
  const auto& c = exp.config;
  Vec phi = Vec::Zero(c.n_nodes);
  const int m = static_cast<int>(participants.size());
  if (m == 0) return phi;
  Mat columns(updates.front().delta.size(), m);
  for (int j = 0; j < m; ++j)
    columns.col(j) = exp.weights(participants[static_cast<std::size_t>(j)]) *
                     updates[static_cast<std::size_t>(j)].delta;
  const CoalitionGame<double> game(columns, c.utility);
  Vec local;
  if (m <= c.exact_cap) {
    local = exact_shapley(game, c.exact_cap);
  } else {
    Rng rng = make_rng(c.seed, {tag(Stream::Shapley), static_cast<std::uint64_t>(t)});
    local = linear_shapley(game, rng, c.shapley_repeats);
  }
  for (int j = 0; j < m; ++j) phi(participants[static_cast<std::size_t>(j)]) = local(j);
  return phi;
}

IterationRecord record(const Experiment& exp, const PhaseState& state, const Batch& validation,
                       int t) {
  const auto& c = exp.config;
  IterationRecord r;
  r.iteration = t;
  r.phase = state.phase;
  r.node_loss.resize(static_cast<std::size_t>(c.n_nodes));
  for (int i = 0; i < c.n_nodes; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    r.node_loss[idx] = data_loss(state.node_params[idx], validation, c.loss.kind);
    r.staleness.push_back(state.tracker.current(i));
  }
  if (c.mode == RunMode::Standalone) {
    r.global_loss = 0.0;
    for (int i = 0; i < c.n_nodes; ++i)
      r.global_loss += exp.weights(i) * r.node_loss[static_cast<std::size_t>(i)];
  } else {
    r.global_loss = data_loss(state.coordinator, validation, c.loss.kind);
  }
  return r;
}

}  // namespace

Experiment::Experiment(ExperimentConfig cfg)
    : config(std::move(cfg)),
      profiles((config.validate(), make_profiles(config.qualities, config.seed))),
      generator(generator_for(config)),
      weights(static_cast<Eigen::Index>(profiles.size())) {
  for (const auto& p : profiles) weights(p.node_id) = p.weight_p;
  dishonest_stop = predicted_stop(config);
}

std::vector<Batch> Experiment::batches(int t) const {
  std::vector<Batch> out;
  out.reserve(profiles.size());
  for (const auto& p : profiles) out.push_back(next_batch(p, generator, t, config.data.batch_size));
  return out;
}

Batch Experiment::validation(int t) const {
  std::vector<Batch> parts;
  parts.reserve(profiles.size());
  for (const auto& p : profiles)
    parts.push_back(source_batch(p, generator, t, config.data.batch_size));
  return pool(parts);
}

PhaseState initial_state(const Experiment& exp) {
  const int n = exp.config.n_nodes;
  PhaseState s;
  s.phase = exp.config.mode == RunMode::Ours ? Phase::Explore : Phase::Baseline;
  s.coordinator = zero_params(exp.input_dim(), exp.generator.n_classes());
  s.node_params.assign(static_cast<std::size_t>(n), s.coordinator);
  s.ledger = ContributionLedger(n);
  s.tracker = StalenessTracker(n);
  return s;
}

GradientTransform dishonest_policy(DishonestStrategy strategy, std::optional<int> t_pred, int t) {
  if (strategy == DishonestStrategy::NonStop || !t_pred || t <= *t_pred)
    return GradientTransform::Identity;
  return GradientTransform::Zero;
}

PhaseState run_explore(const Experiment& exp, PhaseState state) {
  const auto& c = exp.config;
  require(state.phase == Phase::Explore, "run_explore: state is not in the explore phase");
  Rng subsample_rng = make_rng(c.seed, {tag(Stream::Subsample)});
  StoppingMonitor monitor(c.stopping, c.n_nodes, subsample_rng);

  std::vector<Batch> current = exp.batches(state.t + 1);
  while (state.t < c.horizon) {
    const int t = state.t + 1;
    std::vector<Batch> next = exp.batches(t + 1);
    const IndexSet participants = explore_participants(exp, t);
    const auto updates = local_updates(exp, state, participants, current, t);
    state.ledger.append(iteration_contributions(exp, participants, updates, t));
    merge_updates(exp, state, participants, updates, t);
    state.tracker.step(participants, t);
    state.t = t;

    const auto verdict = monitor.observe(state.ledger, t);
    IterationRecord r = record(exp, state, exp.validation(t + 1), t);
    if (verdict) r.p_value = verdict->p_value;
    if (state.ledger.t_count() >= 2) r.delta_psi = fluctuation(state.ledger);
    state.trajectory.push_back(std::move(r));
    current = std::move(next);

    if (verdict && verdict->stop) {
      state.t_alpha = t;
      state.explore_converged = true;
      state.plan = build_plan(state.ledger.psi(), c.beta, c.k, c.base_complexity);
      state.phase = Phase::Exploit;
      break;
    }
  }
  return state;
}

PhaseState run_exploit(const Experiment& exp, PhaseState state) {
  const auto& c = exp.config;
  require(state.phase == Phase::Exploit && state.plan.has_value(),
          "run_exploit: state has no frozen sampling plan");
  std::vector<Batch> current = exp.batches(state.t + 1);
  while (state.t < c.horizon) {
    const int t = state.t + 1;
    std::vector<Batch> next = exp.batches(t + 1);
    Rng rng = make_rng(c.seed, {tag(Stream::Sampling), static_cast<std::uint64_t>(t)});
    const IndexSet selected = distinct_nodes(sample_subset(state.plan->rho, c.k, rng));
    const auto updates = local_updates(exp, state, selected, current, t);
    merge_updates(exp, state, selected, updates, t);
    state.tracker.step(selected, t);
    state.t = t;
    state.trajectory.push_back(record(exp, state, exp.validation(t + 1), t));
    current = std::move(next);
  }
  return state;
}

RunReport run_baseline(const Experiment& exp) {
  const auto& c = exp.config;
  require(c.mode != RunMode::Ours, "run_baseline: mode must be fedavg or standalone");
  PhaseState state = initial_state(exp);
  const IndexSet everyone = all_nodes(c.n_nodes);
  std::vector<Batch> current = exp.batches(1);
  for (int t = 1; t <= c.horizon; ++t) {
    std::vector<Batch> next = exp.batches(t + 1);
    if (c.mode == RunMode::FedAvgUniform) {
      Rng rng = make_rng(c.seed, {tag(Stream::Sampling), static_cast<std::uint64_t>(t)});
      const IndexSet selected = uniform_subset(c.n_nodes, c.k, rng);
      const auto updates = local_updates(exp, state, selected, current, t);
      merge_updates(exp, state, selected, updates, t);
      state.tracker.step(selected, t);
    } else {
      for (int i : everyone) {
        const auto idx = static_cast<std::size_t>(i);
        GradientUpdate u = grad(state.node_params[idx], current[idx], c.loss, i);
        u.iteration = t;
        state.node_params[idx] = apply_update(state.node_params[idx], u);
      }
      state.tracker.step(everyone, t);
    }
    state.t = t;
    state.trajectory.push_back(record(exp, state, exp.validation(t + 1), t));
    current = std::move(next);
  }
  return build_report(exp, state);
}

RunReport build_report(const Experiment& exp, const PhaseState& state) {
  const auto& c = exp.config;
  const int n = c.n_nodes;
  RunReport report;
  report.mode = std::string(to_string(c.mode));
  report.seed = c.seed;
  report.n_nodes = n;

  const bool valued = c.mode == RunMode::Ours && state.ledger.t_count() > 0;
  Vec zeta(n), online(n), stale(n);
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    NodeSummary s;
    s.node_id = i;
    s.zeta = c.qualities[idx].recorded_zeta();
    if (valued) s.psi_final = state.ledger.psi()(i);
    s.avg_staleness = state.tracker.running_avg()(i);
    std::vector<double> losses;
    losses.reserve(state.trajectory.size());
    for (const auto& r : state.trajectory) losses.push_back(r.node_loss[idx]);
    if (!losses.empty()) {
      s.online_perf = online_performance(losses);
      s.final_perf = losses.back();
    }
    zeta(i) = s.zeta;
    online(i) = s.online_perf;
    stale(i) = s.avg_staleness;
    report.per_node.push_back(s);
  }

  auto& a = report.aggregate;
  if (n >= 2) {
    a.pearson_loss_zeta = pearson(online, zeta);
    a.pearson_staleness_zeta = pearson(stale, zeta);
    if (valued) a.pearson_psi_zeta = pearson(state.ledger.psi(), zeta);
  }
  if (valued && c.designated_low && !c.designated_low->empty())
    a.recall_fraction = recall_fraction(state.ledger.psi(), *c.designated_low);
  const Spread spread = equality_spread(online);
  a.std_online_perf = spread.std;
  a.min_online_perf = spread.min;
  a.max_online_perf = spread.max;
  a.t_alpha = state.t_alpha;
  a.t_total = state.t;
  a.explore_converged = state.explore_converged;
  report.trajectory = state.trajectory;
  return report;
}

RunReport run_experiment(const ExperimentConfig& config) {
  const Experiment exp(config);
  if (config.mode != RunMode::Ours) return run_baseline(exp);
  PhaseState state = run_explore(exp, initial_state(exp));
  if (state.phase == Phase::Exploit) state = run_exploit(exp, std::move(state));
  return build_report(exp, state);
}

}  // namespace equifl
