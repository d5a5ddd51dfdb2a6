#include "equifl/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace equifl {

using Json = nlohmann::ordered_json;

std::optional<double> pearson(const Vec& x, const Vec& y) {
  require(x.size() == y.size(), "pearson: length mismatch");
  require(x.size() >= 2, "pearson: need at least two points");
  const Vec dx = x.array() - x.mean();
  const Vec dy = y.array() - y.mean();
  const double sxx = dx.squaredNorm(), syy = dy.squaredNorm();
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(dx.dot(dy) / std::sqrt(sxx * syy), -1.0, 1.0);
}

double online_performance(const std::vector<double>& history) {
  require(!history.empty(), "online_performance: empty history");
  double total = 0.0;
  for (double v : history) total += v;
  return total / static_cast<double>(history.size());
}

Spread equality_spread(const Vec& values) {
  require(values.size() > 0, "equality_spread: empty input");
  const double mean = values.mean();
  const double var = (values.array() - mean).square().sum() / static_cast<double>(values.size());
  return Spread{std::sqrt(var), values.minCoeff(), values.maxCoeff()};
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Explore: return "explore";
    case Phase::Exploit: return "exploit";
    case Phase::Baseline: return "baseline";
  }
  return "explore";
}

Phase parse_phase(std::string_view name) {
  if (name == "explore") return Phase::Explore;
  if (name == "exploit") return Phase::Exploit;
  if (name == "baseline") return Phase::Baseline;
  throw ConfigError("unknown phase '" + std::string(name) + "'");
}

namespace {

Json optional_number(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

std::optional<double> read_optional(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("report csv: cannot parse number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::string summary_json(const RunReport& report) {
  Json doc;
  doc["mode"] = report.mode;
  doc["seed"] = report.seed;
  doc["n_nodes"] = report.n_nodes;

  const auto& a = report.aggregate;
  Json agg;
  agg["pearson_loss_zeta"] = optional_number(a.pearson_loss_zeta);
  agg["pearson_staleness_zeta"] = optional_number(a.pearson_staleness_zeta);
  agg["pearson_psi_zeta"] = optional_number(a.pearson_psi_zeta);
  agg["recall_fraction"] = optional_number(a.recall_fraction);
  agg["std_online_perf"] = a.std_online_perf;
  agg["min_online_perf"] = a.min_online_perf;
  agg["max_online_perf"] = a.max_online_perf;
  agg["T_alpha"] = a.t_alpha ? Json(*a.t_alpha) : Json(nullptr);
  agg["T_total"] = a.t_total;
  agg["explore_converged"] = a.explore_converged;
  doc["aggregate"] = agg;

  Json nodes = Json::array();
  for (const auto& n : report.per_node) {
    Json j;
    j["node_id"] = n.node_id;
    j["zeta"] = n.zeta;
    j["psi_final"] = optional_number(n.psi_final);
    j["avg_staleness"] = n.avg_staleness;
    j["online_perf"] = n.online_perf;
    j["final_perf"] = n.final_perf;
    nodes.push_back(j);
  }
  doc["per_node"] = nodes;
  return doc.dump(2) + "\n";
}

std::string trajectory_csv(const RunReport& report) {
  std::string out = "iteration,phase,global_loss,p_value,delta_psi";
  for (int i = 0; i < report.n_nodes; ++i) out += ",loss_" + std::to_string(i);
  for (int i = 0; i < report.n_nodes; ++i) out += ",staleness_" + std::to_string(i);
  out += '\n';
  for (const auto& r : report.trajectory) {
    out += std::to_string(r.iteration);
    out += ',';
    out += to_string(r.phase);
    out += ',' + format_double(r.global_loss);
    out += ',' + (r.p_value ? format_double(*r.p_value) : std::string());
    out += ',' + (r.delta_psi ? format_double(*r.delta_psi) : std::string());
    for (double v : r.node_loss) out += ',' + format_double(v);
    for (int v : r.staleness) out += ',' + std::to_string(v);
    out += '\n';
  }
  return out;
}

RunReport parse_report(const std::string& summary, const std::string& csv) {
  RunReport report;
  const Json doc = Json::parse(summary);
  report.mode = doc.at("mode").get<std::string>();
  report.seed = doc.at("seed").get<std::uint64_t>();
  report.n_nodes = doc.at("n_nodes").get<int>();

  const auto& agg = doc.at("aggregate");
  auto& a = report.aggregate;
  a.pearson_loss_zeta = read_optional(agg.at("pearson_loss_zeta"));
  a.pearson_staleness_zeta = read_optional(agg.at("pearson_staleness_zeta"));
  a.pearson_psi_zeta = read_optional(agg.at("pearson_psi_zeta"));
  a.recall_fraction = read_optional(agg.at("recall_fraction"));
  a.std_online_perf = agg.at("std_online_perf").get<double>();
  a.min_online_perf = agg.at("min_online_perf").get<double>();
  a.max_online_perf = agg.at("max_online_perf").get<double>();
  if (!agg.at("T_alpha").is_null()) a.t_alpha = agg.at("T_alpha").get<int>();
  a.t_total = agg.at("T_total").get<int>();
  a.explore_converged = agg.at("explore_converged").get<bool>();

  for (const auto& j : doc.at("per_node")) {
    NodeSummary n;
    n.node_id = j.at("node_id").get<int>();
    n.zeta = j.at("zeta").get<double>();
    n.psi_final = read_optional(j.at("psi_final"));
    n.avg_staleness = j.at("avg_staleness").get<double>();
    n.online_perf = j.at("online_perf").get<double>();
    n.final_perf = j.at("final_perf").get<double>();
    report.per_node.push_back(n);
  }

  std::stringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  const auto n = static_cast<std::size_t>(report.n_nodes);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 5 + 2 * n) throw ConfigError("report csv: wrong column count");
    IterationRecord r;
    r.iteration = std::stoi(cells[0]);
    r.phase = parse_phase(cells[1]);
    r.global_loss = parse_double(cells[2]);
    if (!cells[3].empty()) r.p_value = parse_double(cells[3]);
    if (!cells[4].empty()) r.delta_psi = parse_double(cells[4]);
    for (std::size_t i = 0; i < n; ++i) r.node_loss.push_back(parse_double(cells[5 + i]));
    for (std::size_t i = 0; i < n; ++i) r.staleness.push_back(std::stoi(cells[5 + n + i]));
    report.trajectory.push_back(std::move(r));
  }
  return report;
}

void write_report(const RunReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  std::ofstream(dir / kSummaryFile, std::ios::binary) << summary_json(report);
  std::ofstream(dir / kMetricsFile, std::ios::binary) << trajectory_csv(report);
}

RunReport read_report(const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  return parse_report(slurp(dir / kSummaryFile), slurp(dir / kMetricsFile));
}

}  // namespace equifl
