#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "coneflow/experiments.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

std::string default_expectations() {
  if (const char* dir = std::getenv("CONEFLOW_DATA_DIR")) return std::string(dir) + "/expectations.json";
  return std::string(CONEFLOW_DATA_DIR) + "/expectations.json";
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw coneflow::ConfigError("cannot write " + path);
  out << text;
}

int cmd_list() {
  for (const auto& e : coneflow::experiment_catalog()) std::printf("%-13s %s\n", e.name, e.statement);
  return kExitPass;
}

int cmd_run(const std::string& config_path, const std::string& out_path, const std::string& csv_path,
            const std::optional<std::uint64_t>& seed, double tol_scale, const std::string& expectations_path) {
  using coneflow::Json;
  std::ifstream in(config_path);
  if (!in) throw coneflow::ConfigError("cannot open config " + config_path);
  Json config;
  try {
    config = Json::parse(in);
  } catch (const Json::exception& e) {
    throw coneflow::ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  // "output" names the report path when --out is absent.
  std::string report_path = out_path;
  if (report_path.empty() && config.is_object() && config.contains("output")) {
    if (!config["output"].is_string()) throw coneflow::ConfigError("'output' must be a path string");
    const std::filesystem::path p = config["output"].get<std::string>();
    report_path = (p.is_absolute() ? p : std::filesystem::path(config_path).parent_path() / p).string();
  }

  const auto table = coneflow::ExpectationTable::load(expectations_path);
  coneflow::RunOptions options;
  options.seed = seed;
  options.tol_scale = tol_scale;
  const coneflow::RunResult result = coneflow::run(config, table, options);

  const std::string text = result.report.dump(2) + "\n";
  if (report_path.empty()) {
    std::cout << text;
  } else {
    write_file(report_path, text);
  }
  if (!csv_path.empty()) write_file(csv_path, coneflow::to_csv(result.rows));

  std::ostream& log = report_path.empty() ? std::cerr : std::cout;
  for (const auto& e : result.report["experiments"]) {
    for (const auto& v : e["verdicts"]) {
      char line[512];
      std::snprintf(line, sizeof line, "%s %-12s %-44s %.3e %s %.3e\n", v["pass"].get<bool>() ? "PASS" : "FAIL",
                    e["experiment"].get<std::string>().c_str(), v["check"].get<std::string>().c_str(),
                    v["value"].get<double>(), v["relation"].get<std::string>().c_str(), v["threshold"].get<double>());
      log << line;
    }
  }
  log << (result.pass ? "overall: pass" : "overall: FAIL") << "\n";
  return result.pass ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coneflow: numerical checks for CCR flows over cones"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run the experiment(s) described by a JSON config");
  std::string config_path;
  std::string out_path;
  std::string csv_path;
  std::int64_t seed = -1;
  double tol_scale = 1.0;
  std::string expectations = default_expectations();
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_path, "write the JSON report here instead of stdout");
  run->add_option("--csv", csv_path, "write the dimension/residual table as CSV");
  run->add_option("--seed", seed, "override the config seed")->check(CLI::NonNegativeNumber);
  run->add_option("--tol-scale", tol_scale, "multiply every residual tolerance")->check(CLI::PositiveNumber);
  run->add_option("--expectations", expectations, "expectations table")->capture_default_str();

  app.add_subcommand("list", "list experiments and the statements they check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (app.got_subcommand("list")) return cmd_list();
    std::optional<std::uint64_t> s;
    if (seed >= 0) s = static_cast<std::uint64_t>(seed);
    return cmd_run(config_path, out_path, csv_path, s, tol_scale, expectations);
  } catch (const coneflow::ConfigError& e) {
    std::cerr << "coneflow: " << e.what() << "\n";
    return kExitUsage;
  } catch (const coneflow::Error& e) {
    std::cerr << "coneflow: invalid input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "coneflow: " << e.what() << "\n";
    return kExitUsage;
  }
}
