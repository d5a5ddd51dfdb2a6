#include "equifl/learner.hpp"

#include <cmath>
#include <string>

namespace equifl {

std::string_view to_string(LossKind kind) {
  return kind == LossKind::SoftmaxCrossEntropy ? "softmax_ce" : "squared_error";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "softmax_ce") return LossKind::SoftmaxCrossEntropy;
  if (name == "squared_error") return LossKind::SquaredError;
  throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

void LossSpec::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be > 0");
  if (!(l2_reg >= 0.0) || !std::isfinite(l2_reg)) throw ConfigError("l2_reg must be >= 0");
}

Eigen::Index param_count(Eigen::Index dim, int n_classes) {
  return (dim + 1) * (n_classes > 0 ? n_classes : 1);
}

ModelParams zero_params(Eigen::Index dim, int n_classes) {
  return ModelParams{Vec::Zero(param_count(dim, n_classes)), 0};
}

namespace {

void check_shapes(const ModelParams& params, const Batch& batch, LossKind kind) {
  require(batch.rows() > 0, "empty batch");
  require(params.theta.size() == param_count(batch.dim(), batch.n_classes),
          "parameter length does not match batch shape");
  require((kind == LossKind::SoftmaxCrossEntropy) == batch.is_classification(),
          "loss kind does not match the task");
}

// Row-wise log-softmax of X W + b.
Mat log_probabilities(const ModelParams& params, const Batch& batch) {
  const auto d = batch.dim();
  const int c = batch.n_classes;
  Eigen::Map<const Mat> w(params.theta.data(), d + 1, c);
  Mat logits = batch.features * w.topRows(d);
  logits.rowwise() += w.row(d);
  const Vec row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  const Vec lse = logits.array().exp().rowwise().sum().log().matrix();
  logits.colwise() -= lse;
  return logits;
}

Vec predictions(const ModelParams& params, const Batch& batch) {
  const auto d = batch.dim();
  return batch.features * params.theta.head(d) + Vec::Constant(batch.rows(), params.theta(d));
}

}  // namespace

double data_loss(const ModelParams& params, const Batch& batch, LossKind kind) {
  check_shapes(params, batch, kind);
  const double n = static_cast<double>(batch.rows());
  if (kind == LossKind::SoftmaxCrossEntropy) {
    const Mat logp = log_probabilities(params, batch);
    double total = 0.0;
    for (Eigen::Index r = 0; r < batch.rows(); ++r)
      total -= logp(r, static_cast<Eigen::Index>(batch.labels(r)));
    return total / n;
  }
  return 0.5 * (predictions(params, batch) - batch.labels).squaredNorm() / n;
}

double loss(const ModelParams& params, const Batch& batch, const LossSpec& spec) {
  return data_loss(params, batch, spec.kind) + 0.5 * spec.l2_reg * params.theta.squaredNorm();
}

GradientUpdate grad(const ModelParams& params, const Batch& batch, const LossSpec& spec,
                    int node_id) {
  check_shapes(params, batch, spec.kind);
  const auto d = batch.dim();
  const double n = static_cast<double>(batch.rows());
  Vec g(params.theta.size());

  if (spec.kind == LossKind::SoftmaxCrossEntropy) {
    const int c = batch.n_classes;
    Mat residual = log_probabilities(params, batch).array().exp().matrix();
    for (Eigen::Index r = 0; r < batch.rows(); ++r)
      residual(r, static_cast<Eigen::Index>(batch.labels(r))) -= 1.0;
    Eigen::Map<Mat> gw(g.data(), d + 1, c);
    gw.topRows(d) = batch.features.transpose() * residual / n;
    gw.row(d) = residual.colwise().sum() / n;
  } else {
    const Vec residual = predictions(params, batch) - batch.labels;
    g.head(d) = batch.features.transpose() * residual / n;
    g(d) = residual.sum() / n;
  }
  g += spec.l2_reg * params.theta;

  GradientUpdate out{spec.learning_rate * g, node_id, batch.iteration};
  if (!out.delta.allFinite()) throw NumericalError("gradient has non-finite entries");
  return out;
}

GradientUpdate aggregate(std::span<const GradientUpdate> updates, const Vec& weights,
                         const IndexSet& participants, bool renormalize) {
  require(!updates.empty(), "aggregate: no updates");
  const auto len = updates.front().delta.size();
  const int iteration = updates.front().iteration;
  for (const auto& u : updates) {
    require(u.iteration == iteration, "aggregate: updates from mixed iterations");
    require(u.delta.size() == len, "aggregate: updates of different lengths");
  }

  GradientUpdate out{Vec::Zero(len), -1, iteration};
  double mass = 0.0;
  for (int id : participants) {
    require(id >= 0 && id < weights.size(), "aggregate: participant outside weight vector");
    const GradientUpdate* found = nullptr;
    for (const auto& u : updates) {
      if (u.node_id == id) {
        found = &u;
        break;
      }
    }
    require(found != nullptr, "aggregate: participant without an update");
    out.delta += weights(id) * found->delta;
    mass += weights(id);
  }
  if (renormalize && mass > 0.0) out.delta /= mass;
  return out;
}

ModelParams apply_update(const ModelParams& params, const GradientUpdate& agg) {
  require(params.theta.size() == agg.delta.size(), "apply_update: length mismatch");
  return ModelParams{params.theta - agg.delta, agg.iteration};
}

}  // namespace equifl
