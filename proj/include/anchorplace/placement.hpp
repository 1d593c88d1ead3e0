#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "anchorplace/cone_solver.hpp"

namespace anchorplace {

/// One pass of a (re)weighted l1 loop.
struct IterationRecord {
  int iteration = 0;
  Eigen::VectorXd weights;  // u used in this pass
  double objective = 0.0;   // 1'x of the pass's minimizer (total energy / selection mass)
  double weighted_objective = 0.0;
  int support_size = 0;
  SolveStatus status = SolveStatus::Optimal;
  int solver_iterations = 0;
  double duality_gap = 0.0;
};

struct ReweightOptions {
  double epsilon = 1e-8;
  int k_max = 15;
  double support_tol = 1e-6;      // relative to the per-anchor bound
  double objective_rtol = 1e-8;   // convergence test on 1'x between passes
  SolverSettings solver;
};

/// Indices with value > tol.
inline std::vector<int> support_of(const Eigen::VectorXd& v, double tol) {
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] > tol) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

/// u_i = 1 / (epsilon + |x_i|)
inline Eigen::VectorXd reweight(const Eigen::VectorXd& x, double epsilon) {
  return (x.cwiseAbs().array() + epsilon).inverse().matrix();
}

namespace detail {

/// Support unchanged and 1'x stable.
inline bool reweight_converged(const std::vector<IterationRecord>& trace,
                               const std::vector<int>& prev_support,
                               const std::vector<int>& support, double rtol) {
  if (trace.size() < 2 || prev_support != support) return false;
  const double a = trace[trace.size() - 2].objective;
  const double b = trace.back().objective;
  return std::abs(a - b) <= rtol * std::max(1.0, std::abs(b));
}

}  // namespace detail

}  // namespace anchorplace
