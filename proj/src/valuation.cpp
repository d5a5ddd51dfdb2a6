#include "equifl/valuation.hpp"

#include <string>

namespace equifl {

std::string_view to_string(UtilityMode mode) {
  return mode == UtilityMode::InnerProduct ? "inner_product" : "cosine";
}

UtilityMode parse_utility_mode(std::string_view name) {
  if (name == "inner_product") return UtilityMode::InnerProduct;
  if (name == "cosine") return UtilityMode::CosineSimilarity;
  throw ConfigError("unknown utility mode '" + std::string(name) + "'");
}

Mat weighted_update_matrix(std::span<const GradientUpdate> updates, const Vec& weights) {
  require(!updates.empty(), "valuation: no updates");
  require(static_cast<Eigen::Index>(updates.size()) == weights.size(),
          "valuation: one weight per update required");
  const auto len = updates.front().delta.size();
  Mat w(len, static_cast<Eigen::Index>(updates.size()));
  for (std::size_t i = 0; i < updates.size(); ++i) {
    require(updates[i].node_id == static_cast<int>(i), "valuation: updates must be ordered by node id");
    require(updates[i].delta.size() == len, "valuation: updates of different lengths");
    w.col(static_cast<Eigen::Index>(i)) = weights(static_cast<Eigen::Index>(i)) * updates[i].delta;
  }
  return w;
}

double utility(const IndexSet& coalition, std::span<const GradientUpdate> updates,
               const Vec& weights, UtilityMode mode) {
  const Mat w = weighted_update_matrix(updates, weights);
  const Vec grand = w.rowwise().sum();
  Vec part = Vec::Zero(w.rows());
  for (int i : coalition) {
    require(i >= 0 && i < w.cols(), "utility: coalition member out of range");
    part += w.col(i);
  }
  const double dot = part.dot(grand);
  if (mode == UtilityMode::InnerProduct) return dot;
  const double denom = part.norm() * grand.norm();
  return denom > 0.0 ? dot / denom : 0.0;
}

Vec exact_shapley(std::span<const GradientUpdate> updates, const Vec& weights, UtilityMode mode,
                  int exact_cap) {
  if (static_cast<int>(updates.size()) > exact_cap) {
    throw CapacityError("exact_shapley: " + std::to_string(updates.size()) +
                        " players exceeds cap " + std::to_string(exact_cap) +
                        "; use linear_shapley");
  }
  return exact_shapley(CoalitionGame<double>(weighted_update_matrix(updates, weights), mode),
                       exact_cap);
}

void ContributionLedger::append(const Vec& phi) {
  if (phi.size() != sum_.size())
    throw ContractViolation("ledger: phi has length " + std::to_string(phi.size()) +
                            ", expected " + std::to_string(sum_.size()));
  rows_.push_back(phi);
  sum_ += phi;
  psi_ = sum_ / static_cast<double>(rows_.size());
}

Mat ContributionLedger::history(const IndexSet& columns) const {
  Mat out(t_count(), static_cast<Eigen::Index>(columns.size()));
  for (int r = 0; r < t_count(); ++r)
    for (std::size_t c = 0; c < columns.size(); ++c) out(r, static_cast<Eigen::Index>(c)) = rows_[r](columns[c]);
  return out;
}

Mat ContributionLedger::history() const {
  IndexSet all(static_cast<std::size_t>(n_nodes()));
  std::iota(all.begin(), all.end(), 0);
  return history(all);
}

ContributionLedger update_ledger(ContributionLedger ledger, const Vec& phi_t) {
  ledger.append(phi_t);
  return ledger;
}

double fluctuation(const ContributionLedger& ledger) {
  const int t = ledger.t_count();
  if (t < 2) throw PreconditionError("fluctuation needs at least two recorded iterations");
  Vec previous = Vec::Zero(ledger.n_nodes());
  for (int r = 0; r < t - 1; ++r) previous += ledger.phi_history()[r];
  previous /= static_cast<double>(t - 1);
  return (ledger.psi() - previous).lpNorm<Eigen::Infinity>();
}

}  // namespace equifl
