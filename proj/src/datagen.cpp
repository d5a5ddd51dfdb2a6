#include "equifl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace equifl {

std::string_view to_string(QualityKind kind) {
  switch (kind) {
    case QualityKind::Clean: return "clean";
    case QualityKind::FeatureNoise: return "feature_noise";
    case QualityKind::LabelNoise: return "label_noise";
    case QualityKind::Quantity: return "quantity";
    case QualityKind::MissingValues: return "missing_values";
  }
  return "clean";
}

QualityKind parse_quality_kind(std::string_view name) {
  for (auto k : {QualityKind::Clean, QualityKind::FeatureNoise, QualityKind::LabelNoise,
                 QualityKind::Quantity, QualityKind::MissingValues}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown quality kind '" + std::string(name) + "'");
}

std::string_view to_string(Task task) {
  return task == Task::Classification ? "classification" : "regression";
}

Task parse_task(std::string_view name) {
  if (name == "classification") return Task::Classification;
  if (name == "regression") return Task::Regression;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

void QualitySpec::validate() const {
  if (!std::isfinite(zeta)) throw ConfigError("quality zeta must be finite");
  if (kind == QualityKind::Quantity) {
    if (!(zeta > 0.0)) throw ConfigError("quantity multiplier must be > 0");
  } else if (zeta < 0.0 || zeta > 1.0) {
    throw ConfigError("quality zeta must lie in [0, 1]");
  }
}

std::vector<NodeProfile> make_profiles(const std::vector<QualitySpec>& qualities,
                                       std::uint64_t master_seed) {
  if (qualities.empty()) throw ConfigError("at least one node is required");
  double total = 0.0;
  for (const auto& q : qualities) {
    q.validate();
    total += q.size_multiplier();
  }
  std::vector<NodeProfile> out;
  out.reserve(qualities.size());
  for (std::size_t i = 0; i < qualities.size(); ++i) {
    NodeProfile p;
    p.node_id = static_cast<int>(i);
    p.quality = qualities[i];
    p.weight_p = qualities[i].size_multiplier() / total;
    p.stream_seed = derive_seed(master_seed, {tag(Stream::Data), i});
    out.push_back(p);
  }
  return out;
}

Batch pool(const std::vector<Batch>& batches) {
  if (batches.empty()) throw ContractViolation("pool: no batches");
  Eigen::Index rows = 0;
  const auto d = batches.front().dim();
  for (const auto& b : batches) {
    require(b.dim() == d && b.n_classes == batches.front().n_classes, "pool: mismatched batches");
    rows += b.rows();
  }
  Batch out;
  out.features.resize(rows, d);
  out.labels.resize(rows);
  out.iteration = batches.front().iteration;
  out.n_classes = batches.front().n_classes;
  Eigen::Index r = 0;
  for (const auto& b : batches) {
    out.features.middleRows(r, b.rows()) = b.features;
    out.labels.segment(r, b.rows()) = b.labels;
    r += b.rows();
  }
  return out;
}

BaseGenerator make_base_generator(Task task, int d, int n_classes, std::uint64_t seed,
                                  const GeneratorOptions& options) {
  if (d < 1) throw ConfigError("feature dimension must be >= 1");
  if (task == Task::Classification && n_classes < 2)
    throw ConfigError("classification needs at least 2 classes");

  BaseGenerator g;
  g.task_ = task;
  g.dim_ = d;
  Rng rng = make_rng(seed, {tag(Stream::Generator)});
  std::normal_distribution<double> normal(0.0, 1.0);
  if (task == Task::Classification) {
    g.n_classes_ = n_classes;
    BaseGenerator::Mixture mix;
    std::uniform_real_distribution<double> scale(0.5, 1.5);
    for (int c = 0; c < n_classes; ++c) {
      Vec mean(d), sd(d);
      for (int j = 0; j < d; ++j) mean(j) = options.class_separation * normal(rng);
      for (int j = 0; j < d; ++j) sd(j) = scale(rng);
      mix.means.push_back(std::move(mean));
      mix.scales.push_back(std::move(sd));
    }
    g.source_ = std::move(mix);
  } else {
    g.n_classes_ = 0;
    g.residual_sigma_ = options.residual_sigma;
    BaseGenerator::Linear lin;
    lin.weights.resize(d);
    for (int j = 0; j < d; ++j) lin.weights(j) = normal(rng) / std::sqrt(double(d));
    lin.bias = normal(rng);
    g.source_ = std::move(lin);
  }
  return g;
}

namespace {

std::vector<double> parse_row(const std::string& line, int lineno) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError("csv line " + std::to_string(lineno) + ": cannot parse '" + cell + "'");
    }
  }
  return out;
}

}  // namespace

BaseGenerator load_csv_generator(const std::string& path, Task task) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open csv '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv '" + path + "' is empty");
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(parse_row(line, lineno));
    if (rows.back().size() != rows.front().size())
      throw ConfigError("csv line " + std::to_string(lineno) + ": ragged row");
  }
  if (rows.empty() || rows.front().size() < 2)
    throw ConfigError("csv needs a header, >= 1 data row and >= 1 feature column");

  const int d = static_cast<int>(rows.front().size()) - 1;
  BaseGenerator::Table table;
  table.features.resize(static_cast<Eigen::Index>(rows.size()), d);
  table.labels.resize(static_cast<Eigen::Index>(rows.size()));
  int max_label = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int j = 0; j < d; ++j) table.features(r, j) = rows[r][j];
    const double y = rows[r][d];
    if (!std::isfinite(y) || !table.features.row(r).allFinite())
      throw ConfigError("csv contains non-finite values");
    if (task == Task::Classification) {
      if (y < 0 || y != std::floor(y)) throw ConfigError("csv class labels must be non-negative integers");
      max_label = std::max(max_label, static_cast<int>(y));
    }
    table.labels(r) = y;
  }

  BaseGenerator g;
  g.task_ = task;
  g.dim_ = d;
  g.n_classes_ = task == Task::Classification ? std::max(2, max_label + 1) : 0;
  g.source_ = std::move(table);
  return g;
}

Batch BaseGenerator::sample(int n, Rng& rng) const {
  Batch b;
  b.features.resize(n, dim_);
  b.labels.resize(n);
  b.n_classes = n_classes_;
  std::normal_distribution<double> normal(0.0, 1.0);

  if (const auto* mix = std::get_if<Mixture>(&source_)) {
    std::uniform_int_distribution<int> cls(0, n_classes_ - 1);
    for (int r = 0; r < n; ++r) {
      const int c = cls(rng);
      for (int j = 0; j < dim_; ++j)
        b.features(r, j) = mix->means[c](j) + mix->scales[c](j) * normal(rng);
      b.labels(r) = c;
    }
  } else if (const auto* lin = std::get_if<Linear>(&source_)) {
    for (int r = 0; r < n; ++r) {
      for (int j = 0; j < dim_; ++j) b.features(r, j) = normal(rng);
      b.labels(r) = b.features.row(r).dot(lin->weights) + lin->bias + residual_sigma_ * normal(rng);
    }
  } else {
    const auto& table = std::get<Table>(source_);
    std::uniform_int_distribution<Eigen::Index> pick(0, table.features.rows() - 1);
    for (int r = 0; r < n; ++r) {
      const auto src = pick(rng);
      b.features.row(r) = table.features.row(src);
      b.labels(r) = table.labels(src);
    }
  }
  return b;
}

double BaseGenerator::regression_mean(const Eigen::Ref<const Vec>& x) const {
  const auto* lin = std::get_if<Linear>(&source_);
  require(lin != nullptr, "regression_mean: generator is not a linear model");
  return x.dot(lin->weights) + lin->bias;
}

int rows_for(const QualitySpec& quality, int batch_size) {
  if (quality.kind != QualityKind::Quantity) return batch_size;
  return std::max(1, static_cast<int>(std::lround(quality.zeta * batch_size)));
}

Batch degrade(Batch batch, const QualitySpec& quality, Rng& rng) {
  quality.validate();
  if (quality.kind == QualityKind::Clean || quality.kind == QualityKind::Quantity) return batch;
  if (quality.kind == QualityKind::LabelNoise && !batch.is_classification())
    throw ConfigError("label noise requires a classification task");

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = batch.dim();
  std::vector<int> cols(static_cast<std::size_t>(d));

  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    if (!(unit(rng) < quality.zeta)) continue;
    switch (quality.kind) {
      case QualityKind::FeatureNoise:
        for (Eigen::Index j = 0; j < d; ++j) batch.features(r, j) += normal(rng);
        break;
      case QualityKind::LabelNoise: {
        // Uniform over the other classes.
        std::uniform_int_distribution<int> other(0, batch.n_classes - 2);
        const int old = static_cast<int>(batch.labels(r));
        int fresh = other(rng);
        if (fresh >= old) ++fresh;
        batch.labels(r) = fresh;
        break;
      }
      case QualityKind::MissingValues: {
        std::iota(cols.begin(), cols.end(), 0);
        std::shuffle(cols.begin(), cols.end(), rng);
        const auto zeroed = (d + 1) / 2;
        for (Eigen::Index j = 0; j < zeroed; ++j) batch.features(r, cols[j]) = 0.0;
        break;
      }
      default: break;
    }
  }
  return batch;
}

Batch source_batch(const NodeProfile& profile, const BaseGenerator& generator, int t,
                   int batch_size) {
  if (t < 1) throw PreconditionError("next_batch: iteration must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  Rng data_rng = make_rng(profile.stream_seed, {static_cast<std::uint64_t>(t)});
  Batch raw = generator.sample(rows_for(profile.quality, batch_size), data_rng);
  raw.iteration = t;
  return raw;
}

Batch next_batch(const NodeProfile& profile, const BaseGenerator& generator, int t,
                 int batch_size) {
  Batch raw = source_batch(profile, generator, t, batch_size);
  const auto step = static_cast<std::uint64_t>(t);
  Rng noise_rng = make_rng(profile.stream_seed, {tag(Stream::Degrade), step});
  return degrade(std::move(raw), profile.quality, noise_rng);
}

}  // namespace equifl
