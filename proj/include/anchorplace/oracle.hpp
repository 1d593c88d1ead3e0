#pragma once

// Exhaustive ground truth for small instances.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "anchorplace/errors.hpp"
#include "anchorplace/placement_owa.hpp"
#include "anchorplace/ranging_model.hpp"
#include "anchorplace/scenario.hpp"

namespace anchorplace {

struct CardinalityOracleResult {
  bool feasible = false;  // false: even the full anchor set fails
  int cardinality = 0;
  std::vector<std::vector<bool>> witnesses;  // every feasible subset of that size, lexicographic
};

struct EnergyOracleResult {
  bool feasible = false;
  int cardinality = 0;
  std::vector<int> support;
  Eigen::VectorXd energies;  // length M, zero off the support
  double total_energy = 0.0;
};

namespace detail {

/// Precomputed weighted FIM terms; sums them in the same order as
/// assemble_fim, so margins agree bit for bit with feasibility_report.
class SubsetChecker {
 public:
  SubsetChecker(const Scenario& scenario, double weight)
      : m_(scenario.num_anchors()),
        k_(scenario.num_sensor_points()),
        lambda_(accuracy_threshold(scenario.accuracy)),
        terms_(static_cast<std::size_t>(m_ * k_)) {
    for (int k = 0; k < k_; ++k) {
      for (int m = 0; m < m_; ++m) {
        terms_[static_cast<std::size_t>(k * m_ + m)] =
            weight * fim_matrix(scenario, scenario.anchor_points[m], scenario.sensor_points[k]);
      }
    }
  }

  bool feasible(const std::vector<int>& subset) const {
    for (int k = 0; k < k_; ++k) {
      Mat2 f = Mat2::Zero();
      for (int m : subset) f += terms_[static_cast<std::size_t>(k * m_ + m)];
      if (eig_sym2(f).min - lambda_ < 0.0) return false;
    }
    return true;
  }

 private:
  int m_;
  int k_;
  double lambda_;
  std::vector<Mat2> terms_;
};

inline void check_cap(const Scenario& scenario, int max_m, const char* who) {
  if (scenario.num_anchors() > max_m) {
    throw SizeCapError(std::string(who) + ": " + std::to_string(scenario.num_anchors()) +
                       " anchors exceed the enumeration cap of " + std::to_string(max_m));
  }
}

/// Calls f(subset) for every k-subset of {0..n-1} in lexicographic order.
template <typename F>
void for_each_subset(int n, int k, F&& f) {
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    f(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

inline std::vector<bool> to_mask(const std::vector<int>& subset, int n) {
  std::vector<bool> mask(static_cast<std::size_t>(n), false);
  for (int m : subset) mask[m] = true;
  return mask;
}

}  // namespace detail

/// Smallest number of anchors, each at the per-anchor bound (1 in OwS mode,
/// e_b in OwA mode), that meets the accuracy threshold at every sensor point.
inline CardinalityOracleResult exhaustive_min_cardinality(const Scenario& scenario, int max_m = 16) {
  detail::check_cap(scenario, max_m, "exhaustive_min_cardinality");
  const int n = scenario.num_anchors();
  const detail::SubsetChecker checker(scenario, scenario.weight_bound());
  CardinalityOracleResult result;

  // Subsets of an infeasible full set are infeasible.
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[i] = i;
  if (!checker.feasible(all)) return result;

  for (int k = 1; k <= n; ++k) {
    detail::for_each_subset(n, k, [&](const std::vector<int>& subset) {
      if (checker.feasible(subset)) result.witnesses.push_back(detail::to_mask(subset, n));
    });
    if (!result.witnesses.empty()) {
      result.feasible = true;
      result.cardinality = k;
      return result;
    }
  }
  return result;
}

/// Minimum-energy OwA allocation on the smallest feasible support.
inline EnergyOracleResult exhaustive_min_energy_owa(const Scenario& scenario, int max_m = 16,
                                                    const SolverSettings& solver = {}) {
  if (scenario.mode != Mode::OwA) {
    throw PreconditionError("exhaustive_min_energy_owa: scenario must be owa");
  }
  detail::check_cap(scenario, max_m, "exhaustive_min_energy_owa");
  const CardinalityOracleResult card = exhaustive_min_cardinality(scenario, max_m);
  EnergyOracleResult result;
  result.energies = Eigen::VectorXd::Zero(scenario.num_anchors());
  if (!card.feasible) return result;

  result.feasible = true;
  result.cardinality = card.cardinality;
  result.total_energy = std::numeric_limits<double>::infinity();
  ReweightOptions options;
  options.solver = solver;
  for (const auto& mask : card.witnesses) {
    Scenario reduced = scenario;
    reduced.anchor_points.clear();
    std::vector<int> support;
    for (int m = 0; m < scenario.num_anchors(); ++m) {
      if (mask[m]) {
        reduced.anchor_points.push_back(scenario.anchor_points[m]);
        support.push_back(m);
      }
    }
    const EnergyPlacement p = solve_l1(reduced, options);
    if (p.total_energy < result.total_energy) {
      result.total_energy = p.total_energy;
      result.support = support;
      result.energies.setZero();
      for (std::size_t i = 0; i < support.size(); ++i) {
        result.energies[support[i]] = p.energies[static_cast<Eigen::Index>(i)];
      }
    }
  }
  return result;
}

}  // namespace anchorplace
