#include <numbers>
#include <random>

#include <gtest/gtest.h>
#include <Eigen/Eigenvalues>

#include "test_support.hpp"

using namespace anchorplace;

namespace {

/// Unit-distance anchors at equal angular spacing around the origin.
Scenario ring(int count, double lambda, Mode mode = Mode::OwS) {
  Scenario s = testutil::unit_scenario(mode);
  s.anchor_points = make_circle({0, 0}, 1.0, count, 0.0);
  s.sensor_points = {{0, 0}};
  testutil::set_lambda(s, lambda);
  return s;
}

LiftedSolution boolean_lift(const std::vector<bool>& sel) {
  LiftedSolution l;
  l.w = detail::as_weights(sel);
  l.W = l.w * l.w.transpose();
  return l;
}

bool contains(const std::vector<int>& support, const std::vector<bool>& mask) {
  for (std::size_t m = 0; m < mask.size(); ++m) {
    if (mask[m] && std::find(support.begin(), support.end(), static_cast<int>(m)) == support.end()) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST(LiftedIndex, PackedUpperTriangle) {
  EXPECT_EQ(lifted_size(3), 9);
  EXPECT_EQ(lifted_index(3, 0, 0), 3);
  EXPECT_EQ(lifted_index(3, 0, 1), 4);
  EXPECT_EQ(lifted_index(3, 1, 1), 5);
  EXPECT_EQ(lifted_index(3, 2, 0), 6);
  EXPECT_EQ(lifted_index(3, 2, 2), 8);
}

TEST(SdpRelaxation, SaturatedThreeAnchorRing) {
  // The full ring reaches min eigenvalue exactly 1.5 and only w = 1 attains it.
  const LiftedSolution l = solve_sdp_relaxation(ring(3, 1.5 * (1 - 1e-9)));
  for (int m = 0; m < 3; ++m) EXPECT_NEAR(l.w[m], 1.0, 1e-6);
  EXPECT_NEAR(l.objective, 3.0, 1e-6);
}

TEST(SdpRelaxation, LowerBoundsOracleOnConstructedInstance) {
  const Scenario s = ring(3, 0.49);
  const CardinalityOracleResult o = exhaustive_min_cardinality(s);
  ASSERT_EQ(o.cardinality, 2);
  const LiftedSolution l = solve_sdp_relaxation(s);
  EXPECT_LE(l.objective, o.cardinality + 1e-6);
}

TEST(SdpRelaxation, SingleAnchorIsInfeasible) {
  Scenario s = ring(1, 1e-6);
  s.sensor_points = {{0.3, 0.0}};
  EXPECT_THROW(solve_sdp_relaxation(s), InfeasibleScenarioError);
}

TEST(SdpRelaxation, LiftedStructureInvariantsProperty) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 15; ++trial) {
    const Scenario s = testutil::random_instance(rng, 7, 3, Mode::OwS, 0.4);
    const LiftedSolution l = solve_sdp_relaxation(s);
    ASSERT_EQ(l.W.rows(), 7);
    EXPECT_LE((l.W.diagonal() - l.w).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_GE(l.w.minCoeff(), 0.0);
    EXPECT_LE(l.w.maxCoeff(), 1.0);
    Eigen::MatrixXd bordered(8, 8);
    bordered << l.W, l.w, l.w.transpose(), 1.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(bordered, Eigen::EigenvaluesOnly);
    EXPECT_GE(es.eigenvalues()[0], -1e-6 * (1.0 + es.eigenvalues().maxCoeff()));
    EXPECT_GE(feasibility_report(s, l.w).margin, -1e-6 * accuracy_threshold(s.accuracy));
  }
}

TEST(SdpRelaxation, MatchesBoxRelaxation) {
  // Any w in [0,1] lifts via W = ww' + diag(w - w^2), so the lifted optimum
  // equals the plain box-constrained relaxation.
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 8; ++trial) {
    const Scenario s = testutil::random_instance(rng, 6, 2, Mode::OwS, 0.5);
    const LiftedSolution l = solve_sdp_relaxation(s);
    Scenario box = s;
    box.mode = Mode::OwA;
    box.energy_bound = 1.0;
    box.physics.alpha *= s.sensor_energy;
    const EnergyPlacement p = solve_l1(box);
    EXPECT_NEAR(l.objective, p.total_energy, 1e-6 * std::max(1.0, p.total_energy));
  }
}

TEST(SdpRelaxation, BoundAndMonotoneAlongLambdaLadder) {
  std::mt19937_64 rng(23);
  Scenario s = testutil::random_instance(rng, 8, 3, Mode::OwS, 0.5);
  const double base = testutil::full_set_min_eig(s);
  int prev_card = 0;
  double prev_obj = 0.0;
  for (double f : {0.05, 0.15, 0.3, 0.6, 0.95}) {
    testutil::set_lambda(s, f * base);
    const CardinalityOracleResult o = exhaustive_min_cardinality(s);
    ASSERT_TRUE(o.feasible);
    const LiftedSolution l = solve_sdp_relaxation(s);
    EXPECT_GE(o.cardinality, prev_card);
    EXPECT_GE(l.objective, prev_obj - 1e-6);
    EXPECT_LE(l.objective, o.cardinality + 1e-6);
    prev_card = o.cardinality;
    prev_obj = l.objective;
  }
}

TEST(SdpReweighted, OneIterationEqualsRelaxation) {
  std::mt19937_64 rng(24);
  const Scenario s = testutil::random_instance(rng, 6, 2, Mode::OwS, 0.4);
  const LiftedSolution a = solve_reweighted_sdp(s, 1e-8, 1);
  const LiftedSolution b = solve_sdp_relaxation(s);
  EXPECT_EQ(a.w, b.w);
  EXPECT_EQ(a.W, b.W);
  EXPECT_EQ(a.trace.size(), 1u);
}

TEST(SdpReweighted, SupportContainsOracleSubset) {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> frac(0.1, 0.6);
  int hits = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Scenario s = testutil::random_instance(rng, 10, 3, Mode::OwS, frac(rng));
    const LiftedSolution l = solve_reweighted_sdp(s, 1e-8, 15);
    const CardinalityOracleResult o = exhaustive_min_cardinality(s);
    ASSERT_TRUE(o.feasible);
    for (const auto& mask : o.witnesses) {
      if (contains(l.support, mask)) {
        ++hits;
        break;
      }
    }
  }
  RecordProperty("hits_of_50", hits);
  EXPECT_GE(hits, 40);
}

TEST(RandomizeRound, BooleanFeasibleInputIsFixedPoint) {
  std::mt19937_64 rng(26);
  const Scenario s = testutil::random_instance(rng, 7, 2, Mode::OwS, 0.4);
  const CardinalityOracleResult o = exhaustive_min_cardinality(s);
  ASSERT_TRUE(o.feasible);
  const std::vector<bool> sel = o.witnesses.front();
  const RoundedSelection r = randomize_round(s, boolean_lift(sel), 50, 9);
  EXPECT_EQ(r.selected, sel);
  EXPECT_TRUE(r.feasible);
  EXPECT_EQ(r.cardinality, o.cardinality);
  EXPECT_EQ(r.draws_used, 0);
}

TEST(RandomizeRound, UniformHalfOnHexagon) {
  // Opposite hexagon anchors share a direction; one per opposite pair gives
  // min eigenvalue 1.5, while no pair exceeds 0.5. Oracle optimum: 3 of 6.
  const Scenario s = ring(6, 1.0);
  ASSERT_EQ(exhaustive_min_cardinality(s).cardinality, 3);
  LiftedSolution l;
  l.w = Eigen::VectorXd::Constant(6, 0.5);
  l.W = l.w * l.w.transpose();
  l.W.diagonal() = l.w;
  int good = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const RoundedSelection r = randomize_round(s, l, 200, seed);
    if (r.feasible && (r.cardinality == 3 || r.cardinality == 4)) ++good;
  }
  EXPECT_GE(good, 45);
}

TEST(RandomizeRound, ReproducibleAndIndependentlyVerified) {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 5; ++trial) {
    const Scenario s = testutil::random_instance(rng, 8, 3, Mode::OwS, 0.3);
    const LiftedSolution l = solve_sdp_relaxation(s);
    const RoundedSelection a = randomize_round(s, l, 100, 1234 + trial);
    const RoundedSelection b = randomize_round(s, l, 100, 1234 + trial);
    EXPECT_EQ(a.selected, b.selected);
    EXPECT_EQ(a.margin, b.margin);
    EXPECT_EQ(a.draws_used, b.draws_used);
    EXPECT_EQ(a.seed, 1234u + trial);
    const FeasibilityReport rep = feasibility_report(s, detail::as_weights(a.selected));
    EXPECT_EQ(a.feasible, rep.margin >= 0.0);
    EXPECT_EQ(a.margin, rep.margin);
  }
}

TEST(RandomizeRound, RejectsZeroDraws) {
  const Scenario s = ring(3, 0.4);
  EXPECT_THROW(randomize_round(s, boolean_lift({true, true, true}), 0, 1), PreconditionError);
}

TEST(RandomizeRound, WarnsOnCollinearSelection) {
  Scenario s = testutil::unit_scenario(Mode::OwS);
  s.anchor_points = {{-1, 0}, {1, 0}, {0, 1}};
  s.sensor_points = {{0, -1}};
  testutil::set_lambda(s, 0.1);
  const RoundedSelection r = randomize_round(s, boolean_lift({true, true, false}), 1, 0);
  EXPECT_TRUE(r.feasible);
  EXPECT_TRUE(r.collinear_warning);
}

TEST(OptimizeSensorEnergy, SmallestFeasibleEnergy) {
  Scenario s = ring(3, 0.9);
  s.sensor_energy = 10.0;
  const std::vector<bool> all{true, true, true};
  const double e = optimize_sensor_energy(s, all);
  EXPECT_NEAR(e, 0.9 / 1.5, 1e-12);
  Scenario t = s;
  t.sensor_energy = e;
  EXPECT_GE(feasibility_report(t, detail::as_weights(all)).margin, 0.0);
  t.sensor_energy = e * (1 - 1e-9);
  EXPECT_LT(feasibility_report(t, detail::as_weights(all)).margin, 0.0);
}

TEST(OptimizeSensorEnergy, SingularSelectionIsInfeasible) {
  const Scenario s = ring(3, 0.9);
  EXPECT_THROW(optimize_sensor_energy(s, {true, false, false}), InfeasibleScenarioError);
}
