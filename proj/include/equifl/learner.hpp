#pragma once

#include <span>
#include <string_view>

#include "equifl/common.hpp"
#include "equifl/datagen.hpp"

namespace equifl {

/// Flattened parameters. Classification models are (d+1) x C column-major
/// (rows 0..d-1 weights, row d bias); regression models are d weights + bias.
struct ModelParams {
  Vec theta;
  int version = 0;
};

struct GradientUpdate {
  Vec delta;
  int node_id = -1;
  int iteration = 0;
};

enum class LossKind { SoftmaxCrossEntropy, SquaredError };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct LossSpec {
  LossKind kind = LossKind::SoftmaxCrossEntropy;
  double l2_reg = 0.0;
  double learning_rate = 0.1;

  void validate() const;
};

Eigen::Index param_count(Eigen::Index dim, int n_classes);

ModelParams zero_params(Eigen::Index dim, int n_classes);

/// Mean per-sample loss plus l2_reg * |theta|^2 / 2. Squared error is
/// (prediction - target)^2 / 2 per sample.
double loss(const ModelParams& params, const Batch& batch, const LossSpec& spec);

/// Mean per-sample loss without the regulariser; the validation measure.
double data_loss(const ModelParams& params, const Batch& batch, LossKind kind);

/// learning_rate * gradient of `loss`; the step size is folded into delta.
GradientUpdate grad(const ModelParams& params, const Batch& batch, const LossSpec& spec,
                    int node_id = -1);

/// sum_{i in participants} w_i delta_i, with w_i = p_i (or p_i / sum_S p when
/// `renormalize`). An empty participant set yields the zero vector.
GradientUpdate aggregate(std::span<const GradientUpdate> updates, const Vec& weights,
                         const IndexSet& participants, bool renormalize = false);

/// theta - agg.delta, with version set to agg.iteration.
ModelParams apply_update(const ModelParams& params, const GradientUpdate& agg);

}  // namespace equifl
