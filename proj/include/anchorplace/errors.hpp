#pragma once

#include <stdexcept>
#include <string>

namespace anchorplace {

/// Malformed scenario / result file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A field of an otherwise well-formed input violates an invariant.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Zero distance, non-positive energy and similar model-domain violations.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The assembled FIM is (numerically) singular, so the CRB is unbounded.
class SingularFimError : public std::runtime_error {
 public:
  SingularFimError(int sensor_index, double min_eigenvalue, double trace)
      : std::runtime_error("singular Fisher information at sensor point " +
                           std::to_string(sensor_index) + " (min eigenvalue " +
                           std::to_string(min_eigenvalue) + ", trace " + std::to_string(trace) +
                           ")"),
        sensor_index_(sensor_index) {}

  int sensor_index() const noexcept { return sensor_index_; }

 private:
  int sensor_index_;
};

/// Even the most capable allocation (all energies at the bound, or every
/// anchor selected) misses the accuracy threshold somewhere in the sensor area.
class InfeasibleScenarioError : public std::runtime_error {
 public:
  InfeasibleScenarioError(int worst_sensor_index, double margin)
      : std::runtime_error("scenario is infeasible: worst sensor point " +
                           std::to_string(worst_sensor_index) + " misses the threshold by " +
                           std::to_string(-margin)),
        worst_sensor_index_(worst_sensor_index),
        margin_(margin) {}

  int worst_sensor_index() const noexcept { return worst_sensor_index_; }
  double margin() const noexcept { return margin_; }

 private:
  int worst_sensor_index_;
  double margin_;
};

/// The cone solver did not reach an optimal point.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exhaustive enumeration refused because the instance is too large.
class SizeCapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace anchorplace
