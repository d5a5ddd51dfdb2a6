#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "equifl/common.hpp"
#include "equifl/rng.hpp"

namespace equifl {

enum class Task { Classification, Regression };

enum class QualityKind { Clean, FeatureNoise, LabelNoise, Quantity, MissingValues };

std::string_view to_string(QualityKind kind);
QualityKind parse_quality_kind(std::string_view name);
std::string_view to_string(Task task);
Task parse_task(std::string_view name);

/// Degradation applied to one node's stream. For Quantity, `zeta` is the
/// relative batch-size multiplier; the recorded degradation level is its
/// negation so that a larger value always means a less valuable node.
struct QualitySpec {
  QualityKind kind = QualityKind::Clean;
  double zeta = 0.0;

  void validate() const;
  double recorded_zeta() const { return kind == QualityKind::Quantity ? -zeta : zeta; }
  double size_multiplier() const { return kind == QualityKind::Quantity ? zeta : 1.0; }
};

struct NodeProfile {
  int node_id = 0;
  QualitySpec quality;
  double weight_p = 1.0;
  std::uint64_t stream_seed = 0;
};

/// Builds profiles with p_i proportional to each node's expected batch size.
std::vector<NodeProfile> make_profiles(const std::vector<QualitySpec>& qualities,
                                       std::uint64_t master_seed);

struct Batch {
  Mat features;   // rows are samples
  Vec labels;     // class index (stored as double) or real target
  int iteration = 0;
  int n_classes = 0;  // 0 for regression

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  bool is_classification() const { return n_classes > 0; }
};

/// Concatenates batches row-wise; all inputs must agree on dim and n_classes.
Batch pool(const std::vector<Batch>& batches);

struct GeneratorOptions {
  double class_separation = 1.0;  // std of the class-mean prior
  double residual_sigma = 0.5;    // regression noise
};

class BaseGenerator {
 public:
  Task task() const { return task_; }
  int dim() const { return dim_; }
  int n_classes() const { return n_classes_; }
  double residual_sigma() const { return residual_sigma_; }

  /// Draws `n` i.i.d. rows from the stationary distribution.
  Batch sample(int n, Rng& rng) const;

  /// Regression only: the noiseless target for a feature row.
  double regression_mean(const Eigen::Ref<const Vec>& x) const;

  friend BaseGenerator make_base_generator(Task, int, int, std::uint64_t, const GeneratorOptions&);
  friend BaseGenerator load_csv_generator(const std::string&, Task);

 private:
  struct Mixture {
    std::vector<Vec> means;
    std::vector<Vec> scales;  // per-class diagonal standard deviations
  };
  struct Linear {
    Vec weights;
    double bias = 0.0;
  };
  struct Table {
    Mat features;
    Vec labels;
  };

  Task task_ = Task::Classification;
  int dim_ = 0;
  int n_classes_ = 0;
  double residual_sigma_ = 0.0;
  std::variant<Mixture, Linear, Table> source_;
};

/// Gaussian mixture (one component per class) or a fixed linear model with
/// Gaussian residual. Identical arguments give identical generators.
BaseGenerator make_base_generator(Task task, int d, int n_classes, std::uint64_t seed,
                                  const GeneratorOptions& options = {});

/// Tabular generator backed by a CSV file: header row, real feature columns,
/// label in the last column. Sampling draws rows uniformly with replacement.
BaseGenerator load_csv_generator(const std::string& path, Task task);

/// Applies the node's degradation. Rows are selected independently with
/// probability zeta.
Batch degrade(Batch batch, const QualitySpec& quality, Rng& rng);

/// Rows node `profile` observes at iteration t (t >= 1) before degradation; a
/// pure function of (profile.stream_seed, t).
Batch source_batch(const NodeProfile& profile, const BaseGenerator& generator, int t,
                   int batch_size);

/// source_batch with the node's degradation applied.
Batch next_batch(const NodeProfile& profile, const BaseGenerator& generator, int t,
                 int batch_size);

/// Number of rows a node produces per iteration.
int rows_for(const QualitySpec& quality, int batch_size);

}  // namespace equifl
