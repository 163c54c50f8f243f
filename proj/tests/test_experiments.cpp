#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "coneflow/experiments.hpp"

namespace coneflow {
namespace {

const ExpectationTable& table() {
  static const ExpectationTable t = ExpectationTable::load(std::string(CONEFLOW_DATA_DIR) + "/expectations.json");
  return t;
}

Json config(const char* text) { return Json::parse(text); }

template <class Fn>
void expect_config_error(Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "no error";
  } catch (const ConfigError&) {
  }
}

TEST(Expectations, TableIsWellFormed) {
  EXPECT_GE(table().version(), 1);
  EXPECT_GT(table().size(), 0u);
  const Expectation* e = table().find("cocycles", "orthant:1", "", 2, "dimension");
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->value.get<int>(), 2);
  EXPECT_TRUE(e->provenance == "theory-consistent" || e->provenance == "oracle");
  EXPECT_EQ(table().find("cocycles", "orthant:1", "", 7, "dimension"), nullptr);
  std::ifstream in(std::string(CONEFLOW_DATA_DIR) + "/expectations.json");
  for (const auto& entry : Json::parse(in)["entries"]) {
    const std::string p = entry["provenance"];
    EXPECT_TRUE(p == "theory-consistent" || p == "oracle") << entry["id"];
  }
}

TEST(Catalog, MatchesDispatch) {
  const auto& dispatch = experiment_table();
  EXPECT_EQ(experiment_catalog().size(), dispatch.size());
  for (const auto& e : experiment_catalog()) EXPECT_TRUE(dispatch.count(e.name)) << e.name;
}

TEST(Run, RejectsInvalidConfigs) {
  expect_config_error([] { run(config(R"({"experiment": "teleport"})"), table()); });
  expect_config_error([] { run(config(R"({"module": "orthant:2"})"), table()); });
  expect_config_error([] { run(config(R"({"experiment": "cocycles", "windws": [8]})"), table()); });
  expect_config_error([] { run(config(R"({"experiment": "cocycles", "k": 0})"), table()); });
  expect_config_error([] { run(config(R"({"experiment": "cocycles", "delta": -1.0})"), table()); });
  expect_config_error([] { run(config(R"({"experiment": "cocycles", "windows": []})"), table()); });
  expect_config_error([] { run(config(R"({"experiment": "ccr", "seed": -4})"), table()); });
  expect_config_error([] { run(config(R"({"experiments": []})"), table()); });
  expect_config_error([] { run(config(R"({"experiment": "ccr", "tolerances": {"ccr": 0}})"), table()); });
  expect_config_error([] { run(config(R"({"experiment": "distinguish", "a_values": [-1, 2]})"), table()); });
  expect_config_error([] { run(config(R"({"experiment": "ccr"})"), table(), RunOptions{std::nullopt, 0.0}); });
  try {
    run(config(R"({"experiment": "cocycles", "module": "cube:2"})"), table());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
  }
}

TEST(Run, CocycleDimensionAgainstTable) {
  const RunResult r = run(config(R"({"experiment": "cocycles", "module": "orthant:1", "k": 2, "windows": [8, 10]})"), table());
  EXPECT_TRUE(r.pass);
  const Json& e = r.report["experiments"][0];
  EXPECT_EQ(e["results"]["dimension"], 2);
  EXPECT_EQ(e["results"]["expected"], 2);
  EXPECT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].dimension, 2);
  bool saw_provenance = false;
  for (const auto& v : e["verdicts"])
    if (v["check"] == "dimension@8") saw_provenance = v["provenance"] == "theory-consistent";
  EXPECT_TRUE(saw_provenance);
}

TEST(Run, WrongExpectationFails) {
  const RunResult r =
      run(config(R"({"experiment": "cocycles", "module": "orthant:1", "windows": [8], "expected": 2})"), table());
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.report["pass"], false);
  EXPECT_EQ(r.report["experiments"][0]["verdicts"].back()["provenance"], "config");
}

TEST(Run, EmbedsScaledTolerances) {
  const RunResult a = run(config(R"({"experiment": "multiplier", "triples": 5, "matrices": 4})"), table());
  const RunResult b = run(config(R"({"experiment": "multiplier", "triples": 5, "matrices": 4,
                                     "tolerances": {"cocycle": 1e-6}})"),
                          table(), RunOptions{std::nullopt, 10.0});
  EXPECT_DOUBLE_EQ(a.report["experiments"][0]["tolerances"]["cocycle"].get<double>(), 1e-12);
  EXPECT_DOUBLE_EQ(b.report["experiments"][0]["tolerances"]["cocycle"].get<double>(), 1e-5);
  EXPECT_DOUBLE_EQ(b.report["experiments"][0]["tolerances"]["round_trip"].get<double>(), 1e-11);
  EXPECT_DOUBLE_EQ(b.report["tol_scale"].get<double>(), 10.0);
}

TEST(Run, ToleranceViolationFails) {
  const RunResult r =
      run(config(R"({"experiment": "ccr", "pairs": 5, "vectors": 3, "tolerances": {"ccr": 1e-300}})"), table());
  EXPECT_FALSE(r.pass);
}

TEST(Run, DeterministicGivenSeed) {
  const Json c = config(R"({"seed": 5, "experiments": [
      {"experiment": "ccr", "pairs": 8, "vectors": 4},
      {"experiment": "gauge", "elements": 2, "pairs": 3, "vectors": 3},
      {"experiment": "purity", "samples": 5}]})");
  const RunResult a = run(c, table());
  const RunResult b = run(c, table());
  EXPECT_EQ(without_timing(a.report).dump(), without_timing(b.report).dump());
  EXPECT_EQ(to_csv(a.rows), to_csv(b.rows));
  EXPECT_EQ(a.report["experiments"][1]["seed"], 6);
  const RunResult other = run(c, table(), RunOptions{99, 1.0});
  EXPECT_EQ(other.report["seed"], 99);
  EXPECT_NE(without_timing(a.report).dump(), without_timing(other.report).dump());
}

TEST(Run, BatchOrderIsConfigOrder) {
  const RunResult r = run(config(R"({"experiments": [
      {"experiment": "nonconjugacy", "label": "first"},
      {"experiment": "multiplier", "triples": 3, "matrices": 2, "label": "second"}]})"),
                          table());
  ASSERT_EQ(r.report["experiments"].size(), 2u);
  EXPECT_EQ(r.report["experiments"][0]["label"], "first");
  EXPECT_EQ(r.report["experiments"][1]["label"], "second");
}

TEST(Run, NonconjugacyReportsWitnessAndControl) {
  const RunResult r = run(config(R"({"experiment": "nonconjugacy"})"), table());
  EXPECT_TRUE(r.pass);
  const Json& res = r.report["experiments"][0]["results"];
  EXPECT_EQ(res["witness"]["s"], Json::array({1, 0}));
  EXPECT_EQ(res["witness"]["t"], Json::array({0, 1}));
  EXPECT_EQ(res["witness"]["f"]["cell"], Json::array({-1, 1}));
  EXPECT_EQ(res["control_witness"], "none found");
}

TEST(Csv, QuotesFieldsWithCommas) {
  std::vector<CsvRow> rows{{"cocycles", "staircase:-1,1", 1, 8, 0, 0.0, true}, {"x", "say \"hi\"", std::nullopt, std::nullopt, std::nullopt, std::nullopt, false}};
  const std::string csv = to_csv(rows);
  EXPECT_EQ(csv,
            "experiment,module,k,window,dimension,residual,verdict\n"
            "cocycles,\"staircase:-1,1\",1,8,0,0.000000e+00,pass\n"
            "x,\"say \"\"hi\"\"\",,,,,fail\n");
}

int run_cli(const std::string& args, const std::string& log) {
  const std::string cmd = std::string(CONEFLOW_CLI_PATH) + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  std::filesystem::path dir = std::filesystem::temp_directory_path() / ("coneflow_cli_" + std::to_string(::getpid()));
  void SetUp() override { std::filesystem::create_directories(dir); }
  void TearDown() override { std::filesystem::remove_all(dir); }
  std::string path(const char* name) const { return (dir / name).string(); }
  void write(const char* name, const std::string& text) const { std::ofstream(path(name)) << text; }
  std::string read(const char* name) const {
    std::ifstream in(path(name));
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }
};

TEST_F(Cli, ExitCodes) {
  const std::string log = path("log.txt");
  EXPECT_EQ(run_cli("list", log), 0);
  EXPECT_NE(read("log.txt").find("distinguish"), std::string::npos);
  EXPECT_EQ(run_cli("", log), 2);
  EXPECT_EQ(run_cli("run", log), 2);
  EXPECT_EQ(run_cli("run " + path("missing.json"), log), 2);
  write("bad.json", "{\"experiment\": \"teleport\"}");
  EXPECT_EQ(run_cli("run " + path("bad.json"), log), 2);
  write("broken.json", "{not json");
  EXPECT_EQ(run_cli("run " + path("broken.json"), log), 2);
  write("ok.json", "{\"experiment\": \"multiplier\", \"triples\": 5, \"matrices\": 4}");
  EXPECT_EQ(run_cli("run " + path("ok.json") + " --out " + path("r.json") + " --csv " + path("t.csv"), log), 0);
  EXPECT_EQ(read("t.csv").rfind("experiment,module,k,window,dimension,residual,verdict\n", 0), 0u);
  EXPECT_EQ(Json::parse(read("r.json"))["pass"], true);
  EXPECT_EQ(run_cli("run " + path("ok.json") + " --tol-scale 0", log), 2);
  write("fail.json", "{\"experiment\": \"cocycles\", \"module\": \"orthant:1\", \"windows\": [8], \"expected\": 5}");
  EXPECT_EQ(run_cli("run " + path("fail.json") + " --out " + path("f.json"), log), 1);
  EXPECT_EQ(Json::parse(read("f.json"))["pass"], false);
}

TEST_F(Cli, OutputKeyAndSeedOverride) {
  const std::string log = path("log.txt");
  write("cfg.json", "{\"experiment\": \"ccr\", \"pairs\": 4, \"vectors\": 3, \"output\": \"from_config.json\"}");
  EXPECT_EQ(run_cli("run " + path("cfg.json") + " --seed 17", log), 0);
  const Json r = Json::parse(read("from_config.json"));
  EXPECT_EQ(r["seed"], 17);
  EXPECT_EQ(r["experiments"][0]["seed"], 17);
}

TEST(SampleConfigs, AllPass) {
  for (const auto& entry : std::filesystem::directory_iterator(CONEFLOW_CONFIG_DIR)) {
    if (entry.path().extension() != ".json" || entry.path().stem() == "suite") continue;
    std::ifstream in(entry.path());
    const RunResult r = run(Json::parse(in), table());
    EXPECT_TRUE(r.pass) << entry.path();
  }
}

}  // namespace
}  // namespace coneflow
