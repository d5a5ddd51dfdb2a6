// Command-line front end: run, beta-range, calibrate-test, sweep.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "equifl/config.hpp"
#include "equifl/incentive.hpp"
#include "equifl/metrics.hpp"
#include "equifl/orchestrator.hpp"
#include "equifl/stopping.hpp"

namespace {

using Json = nlohmann::ordered_json;

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

Json run_summary(const equifl::RunReport& report, const std::string& out_dir) {
  Json j;
  j["status"] = "ok";
  j["out_dir"] = out_dir;
  j["mode"] = report.mode;
  j["seed"] = report.seed;
  j["T_alpha"] = report.aggregate.t_alpha ? Json(*report.aggregate.t_alpha) : Json(nullptr);
  j["T_total"] = report.aggregate.t_total;
  return j;
}

int emit_error(const std::string& kind, const std::string& message, int code) {
  Json j;
  j["error"] = kind;
  j["message"] = message;
  std::cout << j.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated-learning client-sampling simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run one experiment and write summary.json + metrics.csv");
  run->add_option("--config", config_path, "Config file (key = value)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--out-dir", out_dir, "Output directory");

  double m1 = 0, m2 = 0, r1 = 0, r2 = 0, tol = 1e-6;
  int n = 0, k = 0;
  auto* range = app.add_subcommand("beta-range", "Solve for the beta band that keeps psi*Gamma in [r1, r2]");
  range->add_option("--m1", m1, "Lower psi bound")->required();
  range->add_option("--m2", m2, "Upper psi bound")->required();
  range->add_option("--n", n, "Number of nodes")->required();
  range->add_option("--k", k, "Draws per round")->required();
  range->add_option("--r1", r1, "Lower band edge")->required();
  range->add_option("--r2", r2, "Upper band edge")->required();
  range->add_option("--tol", tol, "Bisection tolerance");

  std::string alphas = "0.05,0.5", df_name = "ts";
  int runs = 2000, dim = 5, t_s = 60, tau = 20;
  std::uint64_t cal_seed = 1;
  auto* calib = app.add_subcommand("calibrate-test", "Null rejection rate of the stopping test");
  calib->add_option("--alpha", alphas, "Comma-separated significance levels");
  calib->add_option("--runs", runs, "Histories per level");
  calib->add_option("--dim", dim, "Coordinates per row");
  calib->add_option("--ts", t_s, "Rows per history");
  calib->add_option("--tau", tau, "Window length");
  calib->add_option("--df", df_name, "Degrees-of-freedom rule: ts or tau");
  calib->add_option("--seed", cal_seed, "Seed");

  std::vector<std::string> params, values;
  std::string sweep_config, sweep_out = "sweep";
  auto* sweep = app.add_subcommand("sweep", "Cross-product of config overrides, one run per combination");
  sweep->add_option("--config", sweep_config, "Base config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--param", params, "Config key to vary (repeatable)")->required();
  sweep->add_option("--values", values, "Comma-separated values for the matching --param")->required();
  sweep->add_option("--out-dir", sweep_out, "Root output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return emit_error("usage", e.what(), 64);
  }

  try {
    if (*run) {
      auto map = equifl::load_config_file(config_path);
      if (seed) equifl::set_config_value(map, "seed", std::to_string(*seed));
      const auto report = equifl::run_experiment(equifl::build_config(map));
      equifl::write_report(report, out_dir);
      std::cout << run_summary(report, out_dir).dump() << std::endl;
    } else if (*range) {
      const auto b = equifl::beta_range(m1, m2, n, k, r1, r2, tol);
      Json j;
      j["lo"] = b.lo;
      j["hi"] = b.hi;
      j["lower_root"] = b.lower_root;
      j["upper_root"] = b.upper_root;
      std::cout << j.dump() << std::endl;
    } else if (*calib) {
      const auto df = equifl::parse_degrees_of_freedom(df_name);
      Json out = Json::array();
      for (const auto& a : split_commas(alphas)) {
        const double alpha = std::stod(a);
        const auto res = equifl::calibrate_null(alpha, runs, dim, t_s, tau, df, cal_seed);
        Json j;
        j["alpha"] = alpha;
        j["runs"] = res.runs;
        j["rejections"] = res.rejections;
        j["rejection_rate"] = res.rejection_rate();
        out.push_back(j);
      }
      std::cout << out.dump() << std::endl;
    } else if (*sweep) {
      if (params.size() != values.size())
        throw equifl::ConfigError("sweep: every --param needs one --values list");
      const auto base = equifl::load_config_file(sweep_config);
      std::vector<std::vector<std::string>> grids;
      for (const auto& v : values) grids.push_back(split_commas(v));
      std::vector<std::size_t> idx(grids.size(), 0);
      Json out = Json::array();
      for (bool more = true; more;) {
        auto map = base;
        std::string name;
        for (std::size_t p = 0; p < params.size(); ++p) {
          equifl::set_config_value(map, params[p], grids[p][idx[p]]);
          name += (name.empty() ? "" : "_") + params[p] + "=" + grids[p][idx[p]];
        }
        const std::string dir = (std::filesystem::path(sweep_out) / name).string();
        const auto report = equifl::run_experiment(equifl::build_config(map));
        equifl::write_report(report, dir);
        out.push_back(run_summary(report, dir));
        more = false;
        for (std::size_t p = grids.size(); p-- > 0;) {
          if (++idx[p] < grids[p].size()) {
            more = true;
            break;
          }
          idx[p] = 0;
        }
      }
      std::cout << out.dump() << std::endl;
    }
  } catch (const equifl::Error& e) {
    return emit_error(e.kind(), e.what(), 2);
  } catch (const std::exception& e) {
    return emit_error("runtime_error", e.what(), 1);
  }
  return 0;
}
