#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <span>
#include <string_view>
#include <vector>

#include "equifl/common.hpp"
#include "equifl/learner.hpp"

namespace equifl {

enum class UtilityMode { InnerProduct, CosineSimilarity };

std::string_view to_string(UtilityMode mode);
UtilityMode parse_utility_mode(std::string_view name);

inline constexpr int kDefaultExactCap = 12;

/// Per-iteration cooperative game over weighted gradients w_i = p_i * delta_i.
/// U(S) compares sum_{i in S} w_i against the grand aggregate g = sum_i w_i.
/// Coalition values are computed from the Gram matrix, so a coalition costs
/// O(|S|^2) regardless of the parameter count.
template <typename Scalar>
class CoalitionGame {
 public:
  CoalitionGame(const Matrix<Scalar>& weighted_updates, UtilityMode mode)
      : mode_(mode),
        gram_(weighted_updates.transpose() * weighted_updates),
        alignment_(gram_.rowwise().sum()),
        grand_sq_norm_(gram_.sum()) {}

  int players() const { return static_cast<int>(gram_.rows()); }
  UtilityMode mode() const { return mode_; }

  /// Utility from a coalition's sufficient statistics: <w_S, g> and |w_S|^2.
  Scalar value_from(Scalar dot_with_grand, Scalar sq_norm) const {
    if (mode_ == UtilityMode::InnerProduct) return dot_with_grand;
    const Scalar denom = std::sqrt(std::max(sq_norm, Scalar(0)) * std::max(grand_sq_norm_, Scalar(0)));
    if (!(denom > Scalar(0))) return Scalar(0);
    return dot_with_grand / denom;
  }

  Scalar value(std::span<const int> coalition) const {
    Scalar dot(0), sq(0);
    for (int i : coalition) {
      dot += alignment_(i);
      for (int j : coalition) sq += gram_(i, j);
    }
    return value_from(dot, sq);
  }

  const Matrix<Scalar>& gram() const { return gram_; }
  const Vector<Scalar>& alignment() const { return alignment_; }

 private:
  UtilityMode mode_;
  Matrix<Scalar> gram_;         // G_ij = <w_i, w_j>
  Vector<Scalar> alignment_;    // a_i = <w_i, g>
  Scalar grand_sq_norm_;
};

/// Stacks p_i * delta_i as columns. updates[i] must belong to node i.
Mat weighted_update_matrix(std::span<const GradientUpdate> updates, const Vec& weights);

/// Exact Shapley values by enumerating all 2^N coalitions.
template <typename Scalar>
Vector<Scalar> exact_shapley(const CoalitionGame<Scalar>& game, int exact_cap = kDefaultExactCap) {
  const int n = game.players();
  if (n > exact_cap || n > 30) {
    throw CapacityError("exact_shapley: " + std::to_string(n) + " players exceeds cap " +
                        std::to_string(exact_cap) + "; use linear_shapley");
  }
  if (n == 0) return Vector<Scalar>();
  const std::uint32_t full = (std::uint32_t{1} << n);
  std::vector<Scalar> dot(full, Scalar(0)), sq(full, Scalar(0)), value(full, Scalar(0));
  std::vector<int> size(full, 0);
  const auto& g = game.gram();
  for (std::uint32_t mask = 1; mask < full; ++mask) {
    const int low = std::countr_zero(mask);
    const std::uint32_t rest = mask & (mask - 1);
    Scalar cross(0);
    for (std::uint32_t r = rest; r != 0; r &= r - 1) cross += g(low, std::countr_zero(r));
    dot[mask] = dot[rest] + game.alignment()(low);
    sq[mask] = sq[rest] + Scalar(2) * cross + g(low, low);
    size[mask] = size[rest] + 1;
    value[mask] = game.value_from(dot[mask], sq[mask]);
  }
  value[0] = game.value_from(Scalar(0), Scalar(0));

  // weight(s) = s! (n-s-1)! / n!
  std::vector<Scalar> weight(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    Scalar w(1);
    for (int j = 1; j <= s; ++j) w *= Scalar(j) / Scalar(n - s - 1 + j);
    weight[s] = w / Scalar(n);
  }

  Vector<Scalar> phi = Vector<Scalar>::Zero(n);
  for (std::uint32_t mask = 0; mask < full; ++mask) {
    for (int i = 0; i < n; ++i) {
      const std::uint32_t bit = std::uint32_t{1} << i;
      if (mask & bit) continue;
      phi(i) += weight[size[mask]] * (value[mask | bit] - value[mask]);
    }
  }
  return phi;
}

/// Linear-time unbiased estimator: for each player i and each size m, one
/// uniformly random size-m coalition S_m of the others; the estimate is the
/// mean marginal contribution over m, further averaged over `repeats` draws.
template <typename Scalar, typename URBG>
Vector<Scalar> linear_shapley(const CoalitionGame<Scalar>& game, URBG& rng, int repeats = 1) {
  if (repeats < 1) throw ConfigError("linear_shapley: repeats must be >= 1");
  const int n = game.players();
  Vector<Scalar> phi = Vector<Scalar>::Zero(n);
  std::vector<int> others(static_cast<std::size_t>(std::max(n - 1, 0)));
  std::vector<int> with_i;
  for (int rep = 0; rep < repeats; ++rep) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0, k = 0; j < n; ++j)
        if (j != i) others[k++] = j;
      Scalar total(0);
      for (int m = 0; m < n; ++m) {
        // Partial Fisher-Yates: the first m entries are a uniform m-subset.
        for (int j = 0; j < m; ++j) {
          std::uniform_int_distribution<int> pick(j, n - 2);
          std::swap(others[j], others[pick(rng)]);
        }
        const std::span<const int> coalition(others.data(), static_cast<std::size_t>(m));
        with_i.assign(coalition.begin(), coalition.end());
        with_i.push_back(i);
        total += game.value(with_i) - game.value(coalition);
      }
      phi(i) += total / Scalar(n);
    }
  }
  return phi / Scalar(repeats);
}

/// U(S) for a coalition, from raw updates and weights.
double utility(const IndexSet& coalition, std::span<const GradientUpdate> updates,
               const Vec& weights, UtilityMode mode);

Vec exact_shapley(std::span<const GradientUpdate> updates, const Vec& weights, UtilityMode mode,
                  int exact_cap = kDefaultExactCap);

template <typename URBG>
Vec linear_shapley(std::span<const GradientUpdate> updates, const Vec& weights, UtilityMode mode,
                   URBG& rng, int repeats = 1) {
  return linear_shapley(CoalitionGame<double>(weighted_update_matrix(updates, weights), mode), rng,
                        repeats);
}

/// Per-iteration contribution rows and their running mean psi.
class ContributionLedger {
 public:
  ContributionLedger() = default;
  explicit ContributionLedger(int n_nodes) : sum_(Vec::Zero(n_nodes)), psi_(Vec::Zero(n_nodes)) {}

  void append(const Vec& phi);

  int t_count() const { return static_cast<int>(rows_.size()); }
  int n_nodes() const { return static_cast<int>(sum_.size()); }
  const Vec& psi() const { return psi_; }
  const std::vector<Vec>& phi_history() const { return rows_; }

  /// t_count x |columns| matrix of the recorded rows restricted to `columns`.
  Mat history(const IndexSet& columns) const;
  Mat history() const;

 private:
  std::vector<Vec> rows_;
  Vec sum_;
  Vec psi_;
};

ContributionLedger update_ledger(ContributionLedger ledger, const Vec& phi_t);

/// |psi_t - psi_{t-1}|_inf.
double fluctuation(const ContributionLedger& ledger);

}  // namespace equifl
