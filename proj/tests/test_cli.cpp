#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "anchorplace/cli.hpp"
#include "test_support.hpp"

using namespace anchorplace;
using namespace anchorplace::cli;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("anchorplace_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_scenario(const Scenario& s, const std::string& name = "scenario.json") {
    const fs::path p = dir_ / name;
    save_scenario(s, p);
    return p;
  }

  static Scenario small_owa() {
    Scenario s = testutil::unit_scenario();
    s.name = "small";
    s.anchor_points = {{0, 0}, {10, 0}, {0, 10}, {10, 10}, {5, -3}, {-3, 5}};
    s.sensor_points = {{4.5, 4.5}, {5.5, 4.0}, {5.0, 6.0}};
    s.accuracy = {0.05, 0.95, Distribution::Gaussian};
    s.energy_bound = 1e6;
    return s;
  }

  static Scenario small_ows() {
    Scenario s = small_owa();
    s.mode = Mode::OwS;
    s.sensor_energy = 1e6;
    return s;
  }

  static nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
  }

  static std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  int run_cli(const std::string& args) {
    const std::string cmd = std::string(ANCHORPLACE_CLI_PATH) + " " + args + " >" +
                            (dir_ / "stdout.txt").string() + " 2>" + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, MissingScenarioFileIsIoError) {
  SolveArgs args;
  args.scenario_file = dir_ / "nope.json";
  args.output_dir = dir_ / "out";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_solve(args, out, err), kIoError);
  EXPECT_NE(err.str().find("nope.json"), std::string::npos);
}

TEST_F(CliTest, MalformedScenarioIsIoError) {
  std::ofstream(dir_ / "bad.json") << "{\"mode\": ";
  EXPECT_EQ(run_cli("solve " + (dir_ / "bad.json").string() + " -o " + dir_.string()), kIoError);
}

TEST_F(CliTest, TinyRadiusIsInfeasible) {
  Scenario s = small_owa();
  s.accuracy.radius = 1e-6;
  SolveArgs args;
  args.scenario_file = write_scenario(s);
  args.output_dir = dir_ / "out";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_solve(args, out, err), kInfeasible);
  EXPECT_NE(err.str().find("sensor point"), std::string::npos);
}

TEST_F(CliTest, BadUsageExitCodes) {
  const fs::path sc = write_scenario(small_owa());
  EXPECT_EQ(run_cli("solve"), kUsage);
  EXPECT_EQ(run_cli("solve " + sc.string() + " --method simplex"), kUsage);
  EXPECT_EQ(run_cli("verify " + sc.string() + " " + sc.string() + " --trials 0"), kUsage);
  EXPECT_EQ(run_cli("solve " + sc.string() + " --k-max 0 -o " + dir_.string()), kUsage);
}

TEST_F(CliTest, SolveVerifyPlotdataRoundTrip) {
  const fs::path sc = write_scenario(small_owa());
  const fs::path out = dir_ / "run";
  ASSERT_EQ(run_cli("solve " + sc.string() + " -o " + out.string() + " --coverage-trials 200"), kOk);
  const nlohmann::json res = read_json(out / "result.json");
  EXPECT_EQ(res["format"], kResultFormat);
  EXPECT_EQ(res["mode"], "owa");
  const double lambda = res["feasibility"]["lambda_per_m2"];
  EXPECT_GE(res["feasibility"]["margin_per_m2"].get<double>(), -1e-6 * lambda);
  EXPECT_TRUE(res.contains("coverage"));
  EXPECT_FALSE(res["trace"].empty());

  ASSERT_EQ(run_cli("verify " + sc.string() + " " + (out / "result.json").string() + " -o " +
                    out.string() + " --trials 500"),
            kOk);
  const nlohmann::json cov = read_json(out / "coverage.json");
  EXPECT_EQ(cov["format"], kCoverageFormat);
  EXPECT_EQ(cov["coverage"]["trials"], 500);

  ASSERT_EQ(run_cli("plotdata " + (out / "result.json").string() + " -o " + out.string()), kOk);
  std::ifstream in(out / "anchors.csv");
  std::string line;
  double total = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("index", 0) == 0) continue;
    std::stringstream ss(line);
    std::string field;
    for (int c = 0; c < 6 && std::getline(ss, field, ','); ++c) {
      if (c == 5) total += std::stod(field);
    }
    ++rows;
  }
  EXPECT_EQ(rows, 6);
  EXPECT_NEAR(total, res["placement"]["total_energy_j"].get<double>(), 1e-9);
  for (const char* f : {"anchors.csv", "sensors.csv", "trace.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
}

TEST_F(CliTest, VerifyRejectsPlacementMissingAnAnchor) {
  SolveArgs args;
  args.scenario_file = write_scenario(small_owa());
  args.output_dir = dir_;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_solve(args, out, err), kOk);
  nlohmann::json res = read_json(dir_ / "result.json");
  std::vector<double> e = res["placement"]["energies_j"];
  const auto it = std::max_element(e.begin(), e.end());
  *it = 0.0;
  res["placement"]["energies_j"] = e;
  std::ofstream(dir_ / "edited.json") << res.dump();

  VerifyArgs v;
  v.scenario_file = args.scenario_file;
  v.result_file = dir_ / "edited.json";
  v.output_dir = dir_;
  v.trials = 100;
  EXPECT_EQ(cmd_verify(v, out, err), kInfeasible);
  EXPECT_NE(err.str().find("infeasible"), std::string::npos);
}

TEST_F(CliTest, VerifyRejectsDimensionMismatch) {
  SolveArgs args;
  args.scenario_file = write_scenario(small_owa());
  args.output_dir = dir_;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_solve(args, out, err), kOk);
  Scenario other = small_owa();
  other.anchor_points.pop_back();
  VerifyArgs v;
  v.scenario_file = write_scenario(other, "other.json");
  v.result_file = dir_ / "result.json";
  v.output_dir = dir_;
  EXPECT_NE(cmd_verify(v, out, err), kOk);
}

TEST_F(CliTest, PlotdataWithEmptySelection) {
  SolveArgs args;
  args.scenario_file = write_scenario(small_owa());
  args.output_dir = dir_;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_solve(args, out, err), kOk);
  nlohmann::json res = read_json(dir_ / "result.json");
  res["placement"]["energies_j"] = std::vector<double>(6, 0.0);
  res["placement"]["selected"] = nlohmann::json::array();
  std::ofstream(dir_ / "empty.json") << res.dump();
  PlotArgs p;
  p.result_file = dir_ / "empty.json";
  p.output_dir = dir_ / "plot";
  ASSERT_EQ(cmd_plotdata(p, out, err), kOk);
  std::ifstream in(dir_ / "plot" / "anchors.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("index", 0) == 0) continue;
    std::stringstream ss(line);
    std::string field;
    for (int c = 0; c < 4; ++c) std::getline(ss, field, ',');
    EXPECT_EQ(field, "0");
    ++rows;
  }
  EXPECT_EQ(rows, 6);
}

TEST_F(CliTest, SolveIsDeterministicModuloTimestamp) {
  const Scenario s = small_ows();
  SolveArgs args;
  args.scenario_file = write_scenario(s);
  args.draws = 50;
  args.seed = 42;
  args.coverage_trials = 100;
  std::ostringstream out, err;
  args.output_dir = dir_ / "a";
  ASSERT_EQ(cmd_solve(args, out, err), kOk);
  args.output_dir = dir_ / "b";
  ASSERT_EQ(cmd_solve(args, out, err), kOk);
  nlohmann::json a = read_json(dir_ / "a" / "result.json");
  nlohmann::json b = read_json(dir_ / "b" / "result.json");
  a.erase("created_utc");
  b.erase("created_utc");
  EXPECT_EQ(a.dump(), b.dump());
}

TEST_F(CliTest, OwsResultCarriesRoundingAndHeaders) {
  const Scenario s = small_ows();
  SolveArgs args;
  args.scenario_file = write_scenario(s);
  args.output_dir = dir_;
  args.draws = 50;
  args.seed = 9;
  args.optimize_sensor_energy = true;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_solve(args, out, err), kOk);
  const nlohmann::json res = read_json(dir_ / "result.json");
  for (const char* key : {"format", "tool_version", "created_utc", "scenario_hash", "seed", "parameters"}) {
    EXPECT_TRUE(res.contains(key)) << key;
  }
  EXPECT_EQ(res["scenario_hash"], scenario_hash(s));
  EXPECT_EQ(res["seed"], 9);
  EXPECT_EQ(res["tool_version"], kToolVersion);
  const auto& pl = res["placement"];
  EXPECT_TRUE(pl["rounding"]["feasible"].get<bool>());
  EXPECT_LE(pl["sensor_energy_j"].get<double>(), s.sensor_energy);
  EXPECT_GE(res["feasibility"]["margin_per_m2"].get<double>(), 0.0);

  PlotArgs p;
  p.result_file = dir_ / "result.json";
  p.output_dir = dir_;
  ASSERT_EQ(cmd_plotdata(p, out, err), kOk);
  for (const char* f : {"anchors.csv", "sensors.csv", "trace.csv"}) {
    const std::string text = read_text(dir_ / f);
    EXPECT_NE(text.find("# scenario_hash " + scenario_hash(s)), std::string::npos) << f;
    EXPECT_NE(text.find("# tool_version"), std::string::npos) << f;
    EXPECT_NE(text.find("# seed 9"), std::string::npos) << f;
    EXPECT_NE(text.find("# parameters"), std::string::npos) << f;
  }
}

TEST_F(CliTest, DumpProgramWritesSdpa) {
  const fs::path sc = write_scenario(small_owa());
  const fs::path dump = dir_ / "program.dat-s";
  ASSERT_EQ(run_cli("solve " + sc.string() + " -m l1 -o " + dir_.string() + " --dump-program " +
                    dump.string()),
            kOk);
  const std::string text = read_text(dump);
  EXPECT_NE(text.find("6 = mDIM"), std::string::npos);
  EXPECT_NE(text.find("4 = nBLOCK"), std::string::npos);
}
