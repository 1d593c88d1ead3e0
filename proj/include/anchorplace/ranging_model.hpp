#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "anchorplace/errors.hpp"
#include "anchorplace/scenario.hpp"

namespace anchorplace {

struct SymEig2 {
  double min = 0.0;
  double max = 0.0;
};

/// Closed-form eigenvalues of a symmetric 2x2 matrix (mean -/+ radius).
inline SymEig2 eig_sym2(const Mat2& m) {
  const double mean = 0.5 * (m(0, 0) + m(1, 1));
  const double radius = std::hypot(0.5 * (m(0, 0) - m(1, 1)), 0.5 * (m(0, 1) + m(1, 0)));
  return {mean - radius, mean + radius};
}

/// Rank-1 Fisher information contribution of one anchor at one sensor point.
/// Units: 1/(m^2 J) in OwA mode, 1/m^2 in OwS mode (sensor energy folded in).
struct FimTerm {
  Mat2 matrix = Mat2::Zero();
  int anchor_index = -1;
  int sensor_index = -1;
};

struct FeasibilityReport {
  Eigen::VectorXd min_eig_by_sensor;
  int worst_sensor_index = -1;
  double threshold = 0.0;  // lambda
  double margin = 0.0;     // min_eig_by_sensor.minCoeff() - lambda

  bool feasible() const { return margin >= 0.0; }
};

/// Variance of a one-way range estimate, e^-1 rho d^beta / alpha.
inline double range_variance(const Scenario& scenario, int anchor_index, const Vec2& sensor,
                             double energy) {
  if (anchor_index < 0 || anchor_index >= scenario.num_anchors()) {
    throw PreconditionError("range_variance: anchor index out of range");
  }
  if (!(energy > 0.0)) throw DomainError("range_variance: energy must be > 0");
  const double d = (scenario.anchor_points[anchor_index] - sensor).norm();
  if (!(d > 0.0)) throw DomainError("range_variance: zero anchor-sensor distance");
  const auto& ph = scenario.physics;
  return ph.rho() * std::pow(d, ph.beta) / (ph.alpha * energy);
}

/// alpha rho^-1 d^(-beta-2) (s - a)(s - a)^T, times e_s in OwS mode.
inline Mat2 fim_matrix(const Scenario& scenario, const Vec2& anchor, const Vec2& sensor) {
  const Vec2 diff = sensor - anchor;
  const double d = diff.norm();
  if (!(d > 0.0)) throw DomainError("fim_term: zero anchor-sensor distance");
  const auto& ph = scenario.physics;
  double scale = ph.alpha / ph.rho() * std::pow(d, -ph.beta - 2.0);
  if (scenario.mode == Mode::OwS) scale *= scenario.sensor_energy;
  const double xy = scale * diff.x() * diff.y();
  Mat2 f;
  f << scale * diff.x() * diff.x(), xy, xy, scale * diff.y() * diff.y();
  return f;
}

inline FimTerm fim_term(const Scenario& scenario, int anchor_index, int sensor_index) {
  if (anchor_index < 0 || anchor_index >= scenario.num_anchors() || sensor_index < 0 ||
      sensor_index >= scenario.num_sensor_points()) {
    throw PreconditionError("fim_term: index out of range");
  }
  return {fim_matrix(scenario, scenario.anchor_points[anchor_index],
                     scenario.sensor_points[sensor_index]),
          anchor_index, sensor_index};
}

namespace detail {

inline void check_weights(const Scenario& scenario, const Eigen::VectorXd& weights,
                          const char* who) {
  if (weights.size() != scenario.num_anchors()) {
    throw PreconditionError(std::string(who) + ": weight vector length must equal anchor count");
  }
  for (Eigen::Index m = 0; m < weights.size(); ++m) {
    if (!(weights[m] >= 0.0) || !std::isfinite(weights[m])) {
      throw PreconditionError(std::string(who) + ": weights must be finite and >= 0");
    }
  }
}

}  // namespace detail

/// Sum of weights[m] * F_m(s) over all anchors; zero weights are skipped.
inline Mat2 assemble_fim(const Scenario& scenario, const Eigen::VectorXd& weights,
                         int sensor_index) {
  detail::check_weights(scenario, weights, "assemble_fim");
  if (sensor_index < 0 || sensor_index >= scenario.num_sensor_points()) {
    throw PreconditionError("assemble_fim: sensor index out of range");
  }
  Mat2 fim = Mat2::Zero();
  const Vec2& s = scenario.sensor_points[sensor_index];
  for (int m = 0; m < scenario.num_anchors(); ++m) {
    if (weights[m] == 0.0) continue;
    fim += weights[m] * fim_matrix(scenario, scenario.anchor_points[m], s);
  }
  return fim;
}

/// lambda such that lambda_min(F) >= lambda guarantees Pr(|xi| <= R_e) >= P_e.
inline double accuracy_threshold(const AccuracyTarget& target) {
  const double r2 = target.radius * target.radius;
  const double q = 1.0 / (1.0 - target.probability);
  if (target.distribution == Distribution::Gaussian) return 2.0 / r2 * std::log(q);
  return 2.0 / r2 * q;
}

inline FeasibilityReport feasibility_report(const Scenario& scenario,
                                            const Eigen::VectorXd& weights) {
  detail::check_weights(scenario, weights, "feasibility_report");
  FeasibilityReport report;
  report.threshold = accuracy_threshold(scenario.accuracy);
  const int num_sensors = scenario.num_sensor_points();
  report.min_eig_by_sensor.resize(num_sensors);
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < num_sensors; ++k) {
    const double e = eig_sym2(assemble_fim(scenario, weights, k)).min;
    report.min_eig_by_sensor[k] = e;
    if (e < worst) {
      worst = e;
      report.worst_sensor_index = k;
    }
  }
  report.margin = worst - report.threshold;
  return report;
}

/// Inverse of the assembled FIM. Throws SingularFimError when
/// lambda_min <= 1e-12 * trace.
inline Mat2 crb_matrix(const Scenario& scenario, const Eigen::VectorXd& weights,
                       int sensor_index) {
  const Mat2 fim = assemble_fim(scenario, weights, sensor_index);
  const double trace = fim.trace();
  const double lo = eig_sym2(fim).min;
  if (!(trace > 0.0) || lo <= 1e-12 * trace) throw SingularFimError(sensor_index, lo, trace);
  const double det = fim(0, 0) * fim(1, 1) - fim(0, 1) * fim(1, 0);
  Mat2 inv;
  inv << fim(1, 1), -fim(0, 1), -fim(1, 0), fim(0, 0);
  return inv / det;
}

}  // namespace anchorplace
