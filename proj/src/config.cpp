#include "equifl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace equifl {

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Ours: return "ours";
    case RunMode::FedAvgUniform: return "fedavg";
    case RunMode::Standalone: return "standalone";
  }
  return "ours";
}

RunMode parse_run_mode(std::string_view name) {
  if (name == "ours") return RunMode::Ours;
  if (name == "fedavg") return RunMode::FedAvgUniform;
  if (name == "standalone") return RunMode::Standalone;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected ours|fedavg|standalone)");
}

std::string_view to_string(DishonestStrategy s) {
  switch (s) {
    case DishonestStrategy::NonStop: return "nonstop";
    case DishonestStrategy::Random: return "random";
    case DishonestStrategy::Poisson: return "poisson";
  }
  return "nonstop";
}

DishonestStrategy parse_dishonest_strategy(std::string_view name) {
  if (name == "nonstop") return DishonestStrategy::NonStop;
  if (name == "random") return DishonestStrategy::Random;
  if (name == "poisson") return DishonestStrategy::Poisson;
  throw ConfigError("unknown dishonest strategy '" + std::string(name) +
                    "' (expected nonstop|random|poisson)");
}

void ExperimentConfig::validate() const {
  if (n_nodes < 1) throw ConfigError("n_nodes must be >= 1");
  if (k < 1 || k > n_nodes) throw ConfigError("k must lie in [1, n_nodes]");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive and finite");
  if (!(base_complexity >= 0.0) || !std::isfinite(base_complexity))
    throw ConfigError("base_complexity must be finite and >= 0");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (!(participation_prob > 0.0 && participation_prob <= 1.0))
    throw ConfigError("participation_prob must lie in (0, 1]");
  if (exact_cap < 0) throw ConfigError("exact_cap must be >= 0");
  if (shapley_repeats < 1) throw ConfigError("shapley_repeats must be >= 1");
  if (static_cast<int>(qualities.size()) != n_nodes)
    throw ConfigError("quality list has " + std::to_string(qualities.size()) + " entries for " +
                      std::to_string(n_nodes) + " nodes");
  for (const auto& q : qualities) {
    q.validate();
    if (q.kind == QualityKind::LabelNoise && data.task == Task::Regression)
      throw ConfigError("label_noise needs a classification task");
  }
  loss.validate();
  const bool classification = data.task == Task::Classification;
  if (classification != (loss.kind == LossKind::SoftmaxCrossEntropy))
    throw ConfigError("loss.kind does not match data.task");
  if (data.csv_path.empty()) {
    if (data.dim < 1) throw ConfigError("data.dim must be >= 1");
    if (classification && data.n_classes < 2) throw ConfigError("data.classes must be >= 2");
  }
  if (data.batch_size < 1) throw ConfigError("data.batch_size must be >= 1");
  if (mode == RunMode::Ours) {
    stopping.validate(n_nodes);
    if (horizon <= stopping.effective_min_iterations(n_nodes))
      throw ConfigError("horizon must exceed stopping.min_iterations (" +
                        std::to_string(stopping.effective_min_iterations(n_nodes)) + ")");
  }
  if (dishonest && (dishonest->node_id < 0 || dishonest->node_id >= n_nodes))
    throw ConfigError("dishonest.node out of range");
  if (designated_low)
    for (int i : *designated_low)
      if (i < 0 || i >= n_nodes) throw ConfigError("designated_low entry out of range");
}

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"mode", "ours"},
      {"seed", "1"},
      {"n_nodes", "10"},
      {"k", "4"},
      {"beta", "0.01"},
      {"base_complexity", "0"},
      {"horizon", "400"},
      {"utility", "cosine"},
      {"exact_cap", "12"},
      {"shapley_repeats", "1"},
      {"participation_prob", "1"},
      {"renormalize_weights", "false"},
      {"designated_low", "auto"},
      {"stopping.alpha", "0.5"},
      {"stopping.tau", "20"},
      {"stopping.subsample", "none"},
      {"stopping.min_iterations", "auto"},
      {"stopping.ridge", "1e-8"},
      {"stopping.df", "ts"},
      {"loss.kind", "auto"},
      {"loss.l2", "0"},
      {"loss.learning_rate", "0.1"},
      {"data.task", "classification"},
      {"data.dim", "5"},
      {"data.classes", "3"},
      {"data.batch_size", "10"},
      {"data.class_separation", "1"},
      {"data.residual_sigma", "0.5"},
      {"data.csv", ""},
      {"quality.kind", "clean"},
      {"quality.zeta", "0"},
      {"dishonest.node", "none"},
      {"dishonest.strategy", "nonstop"},
      {"dishonest.t_pred", "auto"},
  };
  return keys;
}

namespace {

bool known_key(const std::string& key) {
  const auto& keys = config_keys();
  return std::any_of(keys.begin(), keys.end(), [&](const auto& kv) { return kv.first == key; });
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw ConfigError("key '" + key + "': cannot parse '" + text + "' as a number");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + text + "'");
}

bool is_auto(const std::string& v) { return v == "auto" || v == "none" || v.empty(); }

// Scalar broadcast, a comma list with one entry per node, or "linspace LO HI".
std::vector<double> parse_zeta(const std::string& text, int n) {
  const auto n_sz = static_cast<std::size_t>(n);
  if (text.rfind("linspace", 0) == 0) {
    std::stringstream ss(text.substr(8));
    std::string lo_s, hi_s, extra;
    ss >> lo_s >> hi_s;
    if (lo_s.empty() || hi_s.empty() || (ss >> extra))
      throw ConfigError("quality.zeta: expected 'linspace LO HI'");
    const double lo = parse_number<double>("quality.zeta", lo_s);
    const double hi = parse_number<double>("quality.zeta", hi_s);
    std::vector<double> out(n_sz);
    for (int i = 0; i < n; ++i)
      out[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return out;
  }
  const auto items = split_list(text);
  std::vector<double> out;
  for (const auto& s : items) out.push_back(parse_number<double>("quality.zeta", s));
  if (out.size() == 1) out.resize(n_sz, out.front());
  if (out.size() != n_sz)
    throw ConfigError("quality.zeta: " + std::to_string(out.size()) + " values for " +
                      std::to_string(n) + " nodes");
  return out;
}

std::vector<QualityKind> parse_kinds(const std::string& text, int n) {
  std::vector<QualityKind> out;
  for (const auto& s : split_list(text)) out.push_back(parse_quality_kind(s));
  if (out.size() == 1) out.resize(static_cast<std::size_t>(n), out.front());
  if (out.size() != static_cast<std::size_t>(n))
    throw ConfigError("quality.kind: " + std::to_string(out.size()) + " kinds for " +
                      std::to_string(n) + " nodes");
  return out;
}

// Top 30% of nodes by recorded zeta (worst quality), ties to the lower index.
// Empty when every node has the same zeta.
IndexSet default_designated_low(const std::vector<QualitySpec>& qualities) {
  const int n = static_cast<int>(qualities.size());
  IndexSet order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  auto zeta = [&](int i) { return qualities[static_cast<std::size_t>(i)].recorded_zeta(); };
  const auto [mn, mx] = std::minmax_element(order.begin(), order.end(),
                                            [&](int a, int b) { return zeta(a) < zeta(b); });
  if (zeta(*mn) == zeta(*mx)) return {};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return zeta(a) > zeta(b); });
  const auto count = static_cast<std::size_t>(std::max(1, (3 * n + 9) / 10));
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

ConfigMap parse_config_text(std::string_view text) {
  ConfigMap map;
  std::stringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!known_key(key))
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!map.emplace(key, value).second)
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }
  return map;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void set_config_value(ConfigMap& map, const std::string& key, const std::string& value) {
  if (!known_key(key)) throw ConfigError("unknown key '" + key + "'");
  map[key] = value;
}

ExperimentConfig build_config(const ConfigMap& map) {
  ConfigMap full;
  for (const auto& [key, value] : config_keys()) full[key] = value;
  for (const auto& [key, value] : map) {
    if (!known_key(key)) throw ConfigError("unknown key '" + key + "'");
    full[key] = value;
  }
  auto get = [&](const char* key) -> const std::string& { return full.at(key); };
  auto get_int = [&](const char* key) { return parse_number<int>(key, get(key)); };
  auto get_double = [&](const char* key) { return parse_number<double>(key, get(key)); };

  ExperimentConfig c;
  c.mode = parse_run_mode(get("mode"));
  c.seed = parse_number<std::uint64_t>("seed", get("seed"));
  c.n_nodes = get_int("n_nodes");
  if (c.n_nodes < 1) throw ConfigError("n_nodes must be >= 1");
  c.k = get_int("k");
  c.beta = get_double("beta");
  c.base_complexity = get_double("base_complexity");
  c.horizon = get_int("horizon");
  c.utility = parse_utility_mode(get("utility"));
  c.exact_cap = get_int("exact_cap");
  c.shapley_repeats = get_int("shapley_repeats");
  c.participation_prob = get_double("participation_prob");
  c.renormalize_weights = parse_bool("renormalize_weights", get("renormalize_weights"));

  c.stopping.alpha = get_double("stopping.alpha");
  c.stopping.tau = get_int("stopping.tau");
  if (!is_auto(get("stopping.subsample"))) c.stopping.subsample_m = get_int("stopping.subsample");
  if (!is_auto(get("stopping.min_iterations")))
    c.stopping.min_iterations = get_int("stopping.min_iterations");
  c.stopping.ridge = get_double("stopping.ridge");
  c.stopping.df = parse_degrees_of_freedom(get("stopping.df"));

  c.data.task = parse_task(get("data.task"));
  c.data.dim = get_int("data.dim");
  c.data.n_classes = c.data.task == Task::Classification ? get_int("data.classes") : 0;
  c.data.batch_size = get_int("data.batch_size");
  c.data.class_separation = get_double("data.class_separation");
  c.data.residual_sigma = get_double("data.residual_sigma");
  c.data.csv_path = get("data.csv");

  c.loss.kind = is_auto(get("loss.kind"))
                    ? (c.data.task == Task::Classification ? LossKind::SoftmaxCrossEntropy
                                                           : LossKind::SquaredError)
                    : parse_loss_kind(get("loss.kind"));
  c.loss.l2_reg = get_double("loss.l2");
  c.loss.learning_rate = get_double("loss.learning_rate");

  const auto kinds = parse_kinds(get("quality.kind"), c.n_nodes);
  const auto zetas = parse_zeta(get("quality.zeta"), c.n_nodes);
  for (std::size_t i = 0; i < kinds.size(); ++i) c.qualities.push_back({kinds[i], zetas[i]});

  if (!is_auto(get("dishonest.node"))) {
    DishonestSpec d;
    d.node_id = get_int("dishonest.node");
    d.strategy = parse_dishonest_strategy(get("dishonest.strategy"));
    if (!is_auto(get("dishonest.t_pred"))) d.t_pred = get_int("dishonest.t_pred");
    c.dishonest = d;
  }

  if (is_auto(get("designated_low"))) {
    c.designated_low = default_designated_low(c.qualities);
  } else {
    IndexSet low;
    for (const auto& s : split_list(get("designated_low"))) low.push_back(parse_number<int>("designated_low", s));
    std::sort(low.begin(), low.end());
    c.designated_low = low;
  }

  c.validate();
  return c;
}

}  // namespace equifl
