#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "anchorplace/cli.hpp"
#include "test_support.hpp"

using namespace anchorplace;
namespace fs = std::filesystem;

namespace {

struct OwaRun {
  Scenario scenario;
  EnergyPlacement l1;
  EnergyPlacement reweighted;
};

struct OwsRun {
  Scenario scenario;
  LiftedSolution plain;
  LiftedSolution reweighted;
  RoundedSelection rounded;
};

// Each shipped scenario is solved once per process.
class Shipped : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    owa_ = std::make_unique<OwaRun>();
    owa_->scenario = load_scenario(testutil::shipped("owa_fig1.json"));
    owa_->l1 = solve_l1(owa_->scenario);
    owa_->reweighted = solve_reweighted(owa_->scenario, 1e-8, 15);

    ows_ = std::make_unique<OwsRun>();
    ows_->scenario = load_scenario(testutil::shipped("ows_fig2.json"));
    ows_->plain = solve_sdp_relaxation(ows_->scenario);
    ows_->reweighted = solve_reweighted_sdp(ows_->scenario, 1e-8, 15);
    ows_->rounded = randomize_round(ows_->scenario, ows_->reweighted, 500, 1);
  }
  static void TearDownTestSuite() {
    owa_.reset();
    ows_.reset();
  }

  static double lambda(const Scenario& s) { return accuracy_threshold(s.accuracy); }

  static std::unique_ptr<OwaRun> owa_;
  static std::unique_ptr<OwsRun> ows_;
};

std::unique_ptr<OwaRun> Shipped::owa_;
std::unique_ptr<OwsRun> Shipped::ows_;

}  // namespace

TEST_F(Shipped, OwaScenarioShape) {
  const Scenario& s = owa_->scenario;
  EXPECT_EQ(s.num_anchors(), 80);
  EXPECT_EQ(s.sensor_points.size(), 608u);
  EXPECT_DOUBLE_EQ(s.energy_bound, 10.0);
  EXPECT_DOUBLE_EQ(s.accuracy.radius, 0.04);
  EXPECT_DOUBLE_EQ(s.accuracy.probability, 0.95);
}

TEST_F(Shipped, OwaPlacementsFeasible) {
  const Scenario& s = owa_->scenario;
  for (const EnergyPlacement* p : {&owa_->l1, &owa_->reweighted}) {
    EXPECT_GE(feasibility_report(s, p->energies).margin, -1e-6 * lambda(s));
    EXPECT_GE(p->energies.minCoeff(), 0.0);
    EXPECT_LE(p->energies.maxCoeff(), s.energy_bound);
  }
}

TEST_F(Shipped, OwaL1EnergyNearSensorArea) {
  const Scenario& s = owa_->scenario;
  const std::vector<bool> near = testutil::nearest_quartile(s);
  double inside = 0.0;
  for (int m = 0; m < s.num_anchors(); ++m) {
    if (near[m]) inside += owa_->l1.energies[m];
  }
  EXPECT_GE(inside, 0.9 * owa_->l1.total_energy);
}

TEST_F(Shipped, OwaReweightedSparserThanL1) {
  const auto rw = owa_->reweighted.support.size();
  EXPECT_LE(rw, owa_->l1.support.size());
  EXPECT_GE(rw, 11u);
  EXPECT_LE(rw, 17u);
}

TEST_F(Shipped, OwaReweightedSelectsNearestAnchors) {
  const std::vector<bool> near = testutil::nearest_quartile(owa_->scenario);
  int inside = 0;
  for (int m : owa_->reweighted.support) inside += near[m];
  EXPECT_GE(inside, 0.8 * owa_->reweighted.support.size());
}

TEST_F(Shipped, OwaProgramCheckAcceptsSolution) {
  const Scenario& s = owa_->scenario;
  const ConeProgram p = build_owa_program(s, Eigen::VectorXd::Ones(s.num_anchors()));
  EXPECT_TRUE(check_solution(p, owa_->l1.energies, 1e-6 * lambda(s)).feasible);
}

TEST_F(Shipped, OwsScenarioShape) {
  const Scenario& s = ows_->scenario;
  EXPECT_EQ(s.num_anchors(), 80);
  EXPECT_EQ(s.sensor_points.size(), 25u);
  EXPECT_DOUBLE_EQ(s.sensor_energy, 10.0);
  EXPECT_DOUBLE_EQ(s.accuracy.radius, 0.05);
}

TEST_F(Shipped, OwsRelaxationsFeasible) {
  const Scenario& s = ows_->scenario;
  for (const LiftedSolution* l : {&ows_->plain, &ows_->reweighted}) {
    EXPECT_GE(feasibility_report(s, l->w).margin, -1e-6 * lambda(s));
    EXPECT_LE((l->W.diagonal() - l->w).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST_F(Shipped, OwsReweightingSparsifiesRelaxation) {
  EXPECT_GE(ows_->plain.support.size(), 40u);
  EXPECT_LT(ows_->reweighted.support.size(), ows_->plain.support.size());
}

TEST_F(Shipped, OwsRoundedSelectionFacesSensorPatch) {
  const Scenario& s = ows_->scenario;
  const RoundedSelection& r = ows_->rounded;
  ASSERT_TRUE(r.feasible);
  EXPECT_GE(feasibility_report(s, detail::as_weights(r.selected)).margin, 0.0);
  int facing = 0;
  for (int m = 0; m < s.num_anchors(); ++m) {
    if (r.selected[m] && s.anchor_points[m].x() > 0.0) ++facing;
  }
  EXPECT_GE(facing, 0.8 * r.cardinality);
}

TEST(ShippedCli, OwaSolveWritesSupportWithinTolerance) {
  const fs::path dir = fs::temp_directory_path() / "anchorplace_shipped_cli";
  fs::remove_all(dir);
  cli::SolveArgs args;
  args.scenario_file = testutil::shipped("owa_fig1.json");
  args.output_dir = dir;
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_solve(args, out, err), cli::kOk) << err.str();
  std::ifstream in(dir / "result.json");
  const nlohmann::json res = nlohmann::json::parse(in);
  const int support = res["placement"]["support_size"];
  EXPECT_GE(support, 11);
  EXPECT_LE(support, 17);
  const double lam = res["feasibility"]["lambda_per_m2"];
  EXPECT_GE(res["feasibility"]["margin_per_m2"].get<double>(), -1e-6 * lam);
  fs::remove_all(dir);
}
