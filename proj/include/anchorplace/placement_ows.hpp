#pragma once

// Sensor-transmit placement: Boolean anchor selection through the lifted SDP
//
//   minimize   u' w
//   s.t.       sum_m w_m F_m(s) >= lambda I     for every sensor grid point s
//              W_mm = w_m
//              [W w; w' 1] >= 0
//
// followed by randomized rounding to a Boolean vector.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "anchorplace/cone_solver.hpp"
#include "anchorplace/errors.hpp"
#include "anchorplace/placement.hpp"
#include "anchorplace/placement_owa.hpp"
#include "anchorplace/ranging_model.hpp"
#include "anchorplace/scenario.hpp"

namespace anchorplace {

struct LiftedSolution {
  Eigen::VectorXd w;
  Eigen::MatrixXd W;
  std::vector<IterationRecord> trace;
  std::vector<int> support;
  double objective = 0.0;  // 1'w
  SolveOutcome last_solve;
};

/// Column of W_ij (i <= j) in the decision vector (w, packed upper triangle of W).
inline int lifted_index(int m_count, int i, int j) {
  if (i > j) std::swap(i, j);
  return m_count + j * (j + 1) / 2 + i;
}

inline int lifted_size(int m_count) { return m_count + m_count * (m_count + 1) / 2; }

inline ConeProgram build_ows_program(const Scenario& scenario, const Eigen::VectorXd& u) {
  if (scenario.mode != Mode::OwS) throw PreconditionError("build_ows_program: scenario must be ows");
  const int m_count = scenario.num_anchors();
  if (u.size() != m_count) throw PreconditionError("build_ows_program: weight length mismatch");
  const double lambda = accuracy_threshold(scenario.accuracy);

  ConeProgram program(lifted_size(m_count));
  program.objective.head(m_count) = u;

  for (const auto& s : scenario.sensor_points) {
    PsdBlock block(2);
    block.constant = -Eigen::MatrixXd::Identity(2, 2);
    for (int m = 0; m < m_count; ++m) {
      block.add_term(m, fim_matrix(scenario, scenario.anchor_points[m], s) / lambda);
    }
    program.blocks.push_back(std::move(block));
  }

  PsdBlock border(m_count + 1);
  border.constant(m_count, m_count) = 1.0;
  for (int m = 0; m < m_count; ++m) border.add_entry(m, m, m_count, 1.0);
  for (int j = 0; j < m_count; ++j) {
    for (int i = 0; i <= j; ++i) border.add_entry(lifted_index(m_count, i, j), i, j, 1.0);
  }
  program.blocks.push_back(std::move(border));

  for (int m = 0; m < m_count; ++m) {
    program.equalities.push_back({{{lifted_index(m_count, m, m), 1.0}, {m, -1.0}}, 0.0});
  }
  return program;
}

namespace detail {

inline void unpack_lifted(const Eigen::VectorXd& x, int m_count, LiftedSolution& out) {
  out.w = x.head(m_count).cwiseMax(0.0).cwiseMin(1.0);
  out.W.resize(m_count, m_count);
  for (int j = 0; j < m_count; ++j) {
    for (int i = 0; i <= j; ++i) out.W(i, j) = out.W(j, i) = x[lifted_index(m_count, i, j)];
  }
}

}  // namespace detail

/// Defaults for the lifted program. The zero-cost off-diagonal entries of W
/// make the primal optimum non-unique, and the reduced KKT matrix then limits
/// the attainable dual residual to about 1e-7.
inline ReweightOptions lifted_options() {
  ReweightOptions options;
  options.solver.feas_tol = 1e-7;
  return options;
}

inline LiftedSolution solve_reweighted_sdp(const Scenario& scenario, const ReweightOptions& options) {
  if (scenario.mode != Mode::OwS) throw PreconditionError("solve_reweighted_sdp: scenario must be ows");
  if (!(options.epsilon > 0.0)) throw PreconditionError("solve_reweighted_sdp: epsilon must be > 0");
  if (options.k_max < 1) throw PreconditionError("solve_reweighted_sdp: k_max must be >= 1");
  detail::require_feasible_at_bound(scenario);

  const int m_count = scenario.num_anchors();
  LiftedSolution result;
  Eigen::VectorXd u = Eigen::VectorXd::Ones(m_count);
  std::vector<int> prev_support;
  for (int k = 0; k < options.k_max; ++k) {
    SolveOutcome outcome = solve(build_ows_program(scenario, u), options.solver);
    detail::require_optimal(outcome, "solve_reweighted_sdp");
    detail::unpack_lifted(outcome.x, m_count, result);

    IterationRecord rec;
    rec.iteration = k;
    rec.weights = u;
    rec.objective = result.w.sum();
    rec.weighted_objective = u.dot(result.w);
    rec.status = outcome.status;
    rec.solver_iterations = outcome.iterations;
    rec.duality_gap = outcome.duality_gap;
    std::vector<int> support = support_of(result.w, options.support_tol);
    rec.support_size = static_cast<int>(support.size());
    result.trace.push_back(rec);
    result.support = support;
    result.objective = rec.objective;
    result.last_solve = std::move(outcome);

    if (detail::reweight_converged(result.trace, prev_support, support, options.objective_rtol)) break;
    prev_support = std::move(support);
    u = reweight(result.w, options.epsilon);
  }
  return result;
}

inline LiftedSolution solve_reweighted_sdp(const Scenario& scenario, double epsilon, int k_max) {
  ReweightOptions options = lifted_options();
  options.epsilon = epsilon;
  options.k_max = k_max;
  return solve_reweighted_sdp(scenario, options);
}

inline LiftedSolution solve_sdp_relaxation(const Scenario& scenario,
                                           ReweightOptions options = lifted_options()) {
  options.k_max = 1;
  return solve_reweighted_sdp(scenario, options);
}

struct RoundedSelection {
  std::vector<bool> selected;
  int cardinality = 0;
  bool feasible = false;
  double margin = 0.0;
  int draws_used = 0;
  std::uint64_t seed = 0;
  bool collinear_warning = false;  // every selected anchor on one line
};

namespace detail {

inline Eigen::VectorXd as_weights(const std::vector<bool>& sel) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(sel.size()));
  for (std::size_t i = 0; i < sel.size(); ++i) v[static_cast<Eigen::Index>(i)] = sel[i] ? 1.0 : 0.0;
  return v;
}

inline bool all_collinear(const std::vector<Vec2>& pts, double tol = 1e-9) {
  if (pts.size() < 3) return pts.size() == 2;
  const Vec2& p0 = pts[0];
  Vec2 dir = Vec2::Zero();
  double scale = 0.0;
  for (const auto& p : pts) {
    const Vec2 d = p - p0;
    if (d.norm() > dir.norm()) dir = d;
    scale = std::max(scale, d.norm());
  }
  if (scale == 0.0) return true;
  dir.normalize();
  for (const auto& p : pts) {
    const Vec2 d = p - p0;
    if (std::abs(dir.x() * d.y() - dir.y() * d.x()) > tol * scale) return false;
  }
  return true;
}

struct Candidate {
  std::vector<bool> sel;
  int cardinality = 0;
  bool feasible = false;
  double margin = 0.0;
};

/// Feasible first, then fewer anchors, then larger margin, then lexicographic.
/// Without any feasible candidate the best margin wins.
inline bool better(const Candidate& a, const Candidate& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.feasible && a.cardinality != b.cardinality) return a.cardinality < b.cardinality;
  if (a.margin != b.margin) return a.margin > b.margin;
  if (a.cardinality != b.cardinality) return a.cardinality < b.cardinality;
  return a.sel < b.sel;
}

}  // namespace detail

/// Threshold sweep, Bernoulli(w) draws, and Gaussian draws N(w, W - ww')
/// thresholded at 1/2. Every candidate is checked with feasibility_report.
inline RoundedSelection randomize_round(const Scenario& scenario, const LiftedSolution& lifted,
                                        int draws, std::uint64_t seed) {
  if (draws < 1) throw PreconditionError("randomize_round: draws must be >= 1");
  const int m_count = scenario.num_anchors();
  if (lifted.w.size() != m_count) throw PreconditionError("randomize_round: dimension mismatch");

  auto evaluate = [&](std::vector<bool> sel) {
    detail::Candidate c;
    c.cardinality = static_cast<int>(std::count(sel.begin(), sel.end(), true));
    c.margin = feasibility_report(scenario, detail::as_weights(sel)).margin;
    c.feasible = c.margin >= 0.0;
    c.sel = std::move(sel);
    return c;
  };

  detail::Candidate best;
  bool have = false;
  auto offer = [&](detail::Candidate c) {
    if (!have || detail::better(c, best)) {
      best = std::move(c);
      have = true;
    }
  };

  // Prefixes of the anchors sorted by w (descending, ties by index).
  std::vector<int> order(static_cast<std::size_t>(m_count));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return lifted.w[a] > lifted.w[b]; });
  std::vector<bool> prefix(static_cast<std::size_t>(m_count), false);
  for (int k = 0; k < m_count; ++k) {
    prefix[order[k]] = true;
    detail::Candidate c = evaluate(prefix);
    const bool feasible = c.feasible;
    offer(std::move(c));
    if (feasible) break;  // longer prefixes are supersets
  }

  const bool near_boolean =
      (lifted.w.array() * (1.0 - lifted.w.array())).abs().maxCoeff() <= 1e-6;
  int used = 0;
  if (!near_boolean) {
    Eigen::MatrixXd cov = lifted.W.size() == m_count * m_count
                              ? Eigen::MatrixXd(lifted.W - lifted.w * lifted.w.transpose())
                              : Eigen::MatrixXd::Zero(m_count, m_count);
    cov = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::MatrixXd factor =
        es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    for (int d = 0; d < draws; ++d) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(d)};
      std::mt19937_64 rng(seq);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      std::normal_distribution<double> normal(0.0, 1.0);

      std::vector<bool> bern(static_cast<std::size_t>(m_count));
      for (int m = 0; m < m_count; ++m) bern[m] = unif(rng) < lifted.w[m];
      offer(evaluate(std::move(bern)));

      Eigen::VectorXd g(m_count);
      for (int m = 0; m < m_count; ++m) g[m] = normal(rng);
      const Eigen::VectorXd sample = lifted.w + factor * g;
      std::vector<bool> gauss(static_cast<std::size_t>(m_count));
      for (int m = 0; m < m_count; ++m) gauss[m] = sample[m] > 0.5;
      offer(evaluate(std::move(gauss)));
      ++used;
    }
  }

  RoundedSelection out;
  out.selected = best.sel;
  out.cardinality = best.cardinality;
  out.feasible = best.feasible;
  out.margin = best.margin;
  out.draws_used = used;
  out.seed = seed;
  std::vector<Vec2> pts;
  for (int m = 0; m < m_count; ++m) {
    if (out.selected[m]) pts.push_back(scenario.anchor_points[m]);
  }
  out.collinear_warning = !pts.empty() && detail::all_collinear(pts);
  return out;
}

/// Smallest sensor energy keeping the selection feasible. The FIM is linear in
/// e_s, so this is e_s * lambda / (worst min eigenvalue).
inline double optimize_sensor_energy(const Scenario& scenario, const std::vector<bool>& selected) {
  if (scenario.mode != Mode::OwS) throw PreconditionError("optimize_sensor_energy: scenario must be ows");
  if (static_cast<int>(selected.size()) != scenario.num_anchors()) {
    throw PreconditionError("optimize_sensor_energy: dimension mismatch");
  }
  const FeasibilityReport rep = feasibility_report(scenario, detail::as_weights(selected));
  const double worst = rep.min_eig_by_sensor[rep.worst_sensor_index];
  if (!(worst > 1e-12 * std::max(1.0, rep.threshold))) {
    throw InfeasibleScenarioError(rep.worst_sensor_index, rep.margin);
  }
  Scenario reduced = scenario;
  reduced.sensor_energy = scenario.sensor_energy * rep.threshold / worst;
  // Round-off can leave the margin a few ulps below zero.
  for (int i = 0; i < 64 && feasibility_report(reduced, detail::as_weights(selected)).margin < 0.0; ++i) {
    reduced.sensor_energy *= 1.0 + 1e-14;
  }
  return reduced.sensor_energy;
}

}  // namespace anchorplace
