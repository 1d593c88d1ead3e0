#pragma once

// Anchor-transmit placement: joint anchor selection and ranging-energy design.
//
//   minimize   u' e
//   s.t.       sum_m e_m F_m(s) >= lambda I   for every sensor grid point s
//              0 <= e <= e_b
//
// with u = 1 for the plain l1 relaxation and u_i = 1/(eps + e_i) on later
// passes of the reweighted loop.

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "anchorplace/cone_solver.hpp"
#include "anchorplace/errors.hpp"
#include "anchorplace/placement.hpp"
#include "anchorplace/ranging_model.hpp"
#include "anchorplace/scenario.hpp"

namespace anchorplace {

struct EnergyPlacement {
  Eigen::VectorXd energies;
  std::vector<int> support;
  double total_energy = 0.0;
  std::vector<IterationRecord> trace;
  SolveOutcome last_solve;
};

/// Cone program for one weighted pass. Each LMI is divided by lambda.
inline ConeProgram build_owa_program(const Scenario& scenario, const Eigen::VectorXd& u) {
  if (scenario.mode != Mode::OwA) throw PreconditionError("build_owa_program: scenario must be owa");
  const int m_count = scenario.num_anchors();
  if (u.size() != m_count) throw PreconditionError("build_owa_program: weight length mismatch");
  const double lambda = accuracy_threshold(scenario.accuracy);
  ConeProgram program(m_count);
  program.objective = u;
  program.lower.setZero();
  program.upper.setConstant(scenario.energy_bound);
  program.blocks.reserve(scenario.sensor_points.size());
  for (const auto& s : scenario.sensor_points) {
    PsdBlock block(2);
    block.constant = -Eigen::MatrixXd::Identity(2, 2);
    for (int m = 0; m < m_count; ++m) {
      const Mat2 f = fim_matrix(scenario, scenario.anchor_points[m], s) / lambda;
      block.add_term(m, f);
    }
    program.blocks.push_back(std::move(block));
  }
  return program;
}

namespace detail {

inline void require_feasible_at_bound(const Scenario& scenario) {
  const Eigen::VectorXd full = Eigen::VectorXd::Constant(scenario.num_anchors(), scenario.weight_bound());
  const FeasibilityReport rep = feasibility_report(scenario, full);
  if (rep.margin < 0.0) throw InfeasibleScenarioError(rep.worst_sensor_index, rep.margin);
}

inline void require_optimal(const SolveOutcome& outcome, const char* who) {
  if (outcome.status != SolveStatus::Optimal) {
    throw SolverError(std::string(who) + ": cone solver returned " + to_string(outcome.status) +
                      (outcome.certificate.empty() ? "" : " (" + outcome.certificate + ")"));
  }
}

}  // namespace detail

/// Reweighted l1 loop. k_max = 1 is the plain l1 relaxation.
inline EnergyPlacement solve_reweighted(const Scenario& scenario, const ReweightOptions& options) {
  if (scenario.mode != Mode::OwA) throw PreconditionError("solve_reweighted: scenario must be owa");
  if (!(options.epsilon > 0.0)) throw PreconditionError("solve_reweighted: epsilon must be > 0");
  if (options.k_max < 1) throw PreconditionError("solve_reweighted: k_max must be >= 1");
  detail::require_feasible_at_bound(scenario);

  const int m_count = scenario.num_anchors();
  const double support_tol = options.support_tol * scenario.energy_bound;
  EnergyPlacement result;
  Eigen::VectorXd u = Eigen::VectorXd::Ones(m_count);
  std::vector<int> prev_support;
  for (int k = 0; k < options.k_max; ++k) {
    const ConeProgram program = build_owa_program(scenario, u);
    SolveOutcome outcome = solve(program, options.solver);
    detail::require_optimal(outcome, "solve_reweighted");
    Eigen::VectorXd e = outcome.x.cwiseMax(0.0).cwiseMin(scenario.energy_bound);

    IterationRecord rec;
    rec.iteration = k;
    rec.weights = u;
    rec.objective = e.sum();
    rec.weighted_objective = u.dot(e);
    rec.status = outcome.status;
    rec.solver_iterations = outcome.iterations;
    rec.duality_gap = outcome.duality_gap;
    std::vector<int> support = support_of(e, support_tol);
    rec.support_size = static_cast<int>(support.size());
    result.trace.push_back(rec);

    result.energies = e;
    result.support = support;
    result.total_energy = e.sum();
    result.last_solve = std::move(outcome);

    if (detail::reweight_converged(result.trace, prev_support, support, options.objective_rtol)) break;
    prev_support = std::move(support);
    u = reweight(e, options.epsilon);
  }
  return result;
}

inline EnergyPlacement solve_reweighted(const Scenario& scenario, double epsilon, int k_max) {
  ReweightOptions options;
  options.epsilon = epsilon;
  options.k_max = k_max;
  return solve_reweighted(scenario, options);
}

/// Plain l1 relaxation: minimum total ranging energy.
inline EnergyPlacement solve_l1(const Scenario& scenario, ReweightOptions options = {}) {
  options.k_max = 1;
  return solve_reweighted(scenario, options);
}

}  // namespace anchorplace
