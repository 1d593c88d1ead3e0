#pragma once

// Monte-Carlo check of the accuracy guarantee: draw Gaussian range estimates,
// localize, and count how often the estimate lands within R_e.
//
// Negative simulated ranges are kept as drawn. The Gaussian model permits
// them, and truncating would bias the comparison against the CRB.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "anchorplace/errors.hpp"
#include "anchorplace/ranging_model.hpp"
#include "anchorplace/scenario.hpp"

namespace anchorplace {

namespace detail {

inline std::vector<int> positive_support(const Eigen::VectorXd& weights) {
  std::vector<int> idx;
  for (Eigen::Index m = 0; m < weights.size(); ++m) {
    if (weights[m] > 0.0) idx.push_back(static_cast<int>(m));
  }
  return idx;
}

/// Ranging energy of anchor m: e_m in OwA mode, w_m e_s in OwS mode.
inline double link_energy(const Scenario& scenario, const Eigen::VectorXd& weights, int m) {
  return scenario.mode == Mode::OwA ? weights[m] : weights[m] * scenario.sensor_energy;
}

inline std::mt19937_64 seeded_rng(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

inline std::vector<double> draw_ranges(const Scenario& scenario, const Eigen::VectorXd& weights,
                                       const std::vector<int>& support, const Vec2& sensor,
                                       std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> ranges;
  ranges.reserve(support.size());
  for (int m : support) {
    const double d = (scenario.anchor_points[m] - sensor).norm();
    const double var = range_variance(scenario, m, sensor, link_energy(scenario, weights, m));
    ranges.push_back(d + std::sqrt(var) * normal(rng));
  }
  return ranges;
}

}  // namespace detail

/// One range estimate per anchor with positive weight, in anchor order.
inline std::vector<double> simulate_ranges(const Scenario& scenario, const Eigen::VectorXd& weights,
                                           const Vec2& true_sensor, std::uint64_t seed) {
  detail::check_weights(scenario, weights, "simulate_ranges");
  const std::vector<int> support = detail::positive_support(weights);
  if (support.empty()) throw PreconditionError("simulate_ranges: empty support");
  std::mt19937_64 rng = detail::seeded_rng({seed});
  return detail::draw_ranges(scenario, weights, support, true_sensor, rng);
}

struct LocalizeOptions {
  int grid_points = 41;       // per axis, initial search
  int max_iterations = 50;
  double step_tol = 1e-10;    // m
};

struct LocalizeResult {
  Vec2 position = Vec2::Zero();
  bool diverged = false;
  int iterations = 0;
};

/// Search area: sensor bounding box dilated by max(half its extent, 10 R_e).
inline BoundingBox search_box(const Scenario& scenario) {
  BoundingBox b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& p : scenario.sensor_points) {
    b.xmin = std::min(b.xmin, p.x());
    b.xmax = std::max(b.xmax, p.x());
    b.ymin = std::min(b.ymin, p.y());
    b.ymax = std::max(b.ymax, p.y());
  }
  const double extent = std::max(b.xmax - b.xmin, b.ymax - b.ymin);
  const double margin = std::max(0.5 * extent, 10.0 * scenario.accuracy.radius);
  return {b.xmin - margin, b.xmax + margin, b.ymin - margin, b.ymax + margin};
}

/// Variance-weighted Gauss-Newton on the range residuals, started from the
/// best point of a coarse grid over the search box. Weights are re-evaluated
/// at the current estimate.
inline LocalizeResult localize(const Scenario& scenario, const Eigen::VectorXd& weights,
                               const std::vector<double>& ranges,
                               const LocalizeOptions& options = {}) {
  detail::check_weights(scenario, weights, "localize");
  const std::vector<int> support = detail::positive_support(weights);
  if (support.size() < 2) throw PreconditionError("localize: at least 2 anchors required");
  if (ranges.size() != support.size()) throw PreconditionError("localize: one range per selected anchor");

  const auto& ph = scenario.physics;
  std::vector<double> gain(support.size());  // 1/variance = gain / d^beta
  for (std::size_t i = 0; i < support.size(); ++i) {
    gain[i] = ph.alpha * detail::link_energy(scenario, weights, support[i]) / ph.rho();
  }
  auto cost = [&](const Vec2& p) {
    double c = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
      const double d = (scenario.anchor_points[support[i]] - p).norm();
      const double r = ranges[i] - d;
      c += gain[i] / std::pow(std::max(d, 1e-12), ph.beta) * r * r;
    }
    return c;
  };

  const BoundingBox box = search_box(scenario);
  const int g = std::max(2, options.grid_points);
  const std::vector<Vec2> grid = make_grid(box, {g, g});
  Vec2 p = grid.front();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : grid) {
    const double c = cost(q);
    if (c < best) {
      best = c;
      p = q;
    }
  }

  LocalizeResult out;
  for (int it = 1; it <= options.max_iterations; ++it) {
    out.iterations = it;
    Mat2 normal = Mat2::Zero();
    Vec2 rhs = Vec2::Zero();
    for (std::size_t i = 0; i < support.size(); ++i) {
      const Vec2 diff = p - scenario.anchor_points[support[i]];
      const double d = diff.norm();
      if (!(d > 0.0)) continue;
      const Vec2 jac = diff / d;
      const double wt = gain[i] / std::pow(d, ph.beta);
      normal += wt * jac * jac.transpose();
      rhs += wt * jac * (ranges[i] - d);
    }
    const double tr = normal.trace();
    if (!(tr > 0.0) || eig_sym2(normal).min <= 1e-12 * tr) {
      out.diverged = true;
      break;
    }
    const Vec2 step = normal.ldlt().solve(rhs);
    p += step;
    if (!p.allFinite() || p.x() < box.xmin || p.x() > box.xmax || p.y() < box.ymin ||
        p.y() > box.ymax) {
      out.diverged = true;
      break;
    }
    if (step.norm() <= options.step_tol) break;
    if (it == options.max_iterations) out.diverged = true;
  }
  out.position = p;
  return out;
}

struct CoverageReport {
  std::vector<int> sensor_indices;  // tested points
  std::vector<double> per_sensor_coverage;
  double worst_coverage = 0.0;
  int trials = 0;
  int estimator_divergences = 0;
  std::uint64_t seed = 0;
};

enum class CoveragePoints { All, WorstMargin };

struct CoverageOptions {
  CoveragePoints points = CoveragePoints::All;
  unsigned threads = 0;  // 0: hardware concurrency
  LocalizeOptions localize;
};

/// Empirical Pr(|s_hat - s| <= R_e). Trial t at tested point k draws from
/// seed_seq{seed, k, t}, so results do not depend on the thread count.
/// A diverged estimate counts as a miss.
inline CoverageReport coverage(const Scenario& scenario, const Eigen::VectorXd& weights, int trials,
                               std::uint64_t seed, const CoverageOptions& options = {}) {
  if (trials < 1) throw PreconditionError("coverage: trials must be >= 1");
  const FeasibilityReport rep = feasibility_report(scenario, weights);
  if (rep.margin < -1e-6 * rep.threshold) {
    throw PreconditionError("coverage: placement does not meet the accuracy threshold");
  }
  const std::vector<int> support = detail::positive_support(weights);

  CoverageReport report;
  report.trials = trials;
  report.seed = seed;
  if (options.points == CoveragePoints::WorstMargin) {
    report.sensor_indices.push_back(rep.worst_sensor_index);
  } else {
    for (int k = 0; k < scenario.num_sensor_points(); ++k) report.sensor_indices.push_back(k);
  }

  const std::size_t npts = report.sensor_indices.size();
  const std::size_t total = npts * static_cast<std::size_t>(trials);
  std::vector<unsigned char> hit(total, 0);
  std::vector<unsigned char> div(total, 0);
  const double r2 = scenario.accuracy.radius * scenario.accuracy.radius;

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t job = begin; job < end; ++job) {
      const std::size_t pi = job / static_cast<std::size_t>(trials);
      const std::size_t t = job % static_cast<std::size_t>(trials);
      const int k = report.sensor_indices[pi];
      const Vec2& s = scenario.sensor_points[k];
      std::mt19937_64 rng = detail::seeded_rng({seed, static_cast<std::uint64_t>(k), t});
      const auto ranges = detail::draw_ranges(scenario, weights, support, s, rng);
      const LocalizeResult est = localize(scenario, weights, ranges, options.localize);
      div[job] = est.diverged ? 1 : 0;
      hit[job] = (!est.diverged && (est.position - s).squaredNorm() <= r2) ? 1 : 0;
    }
  };

  unsigned nthreads = options.threads ? options.threads : std::thread::hardware_concurrency();
  nthreads = std::max(1u, std::min<unsigned>(nthreads, static_cast<unsigned>(std::min<std::size_t>(total, 64))));
  if (nthreads == 1) {
    work(0, total);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (total + nthreads - 1) / nthreads;
    for (unsigned i = 0; i < nthreads; ++i) {
      const std::size_t b = std::min(total, i * chunk);
      const std::size_t e = std::min(total, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  report.worst_coverage = 1.0;
  for (std::size_t pi = 0; pi < npts; ++pi) {
    int hits = 0;
    for (int t = 0; t < trials; ++t) {
      const std::size_t job = pi * static_cast<std::size_t>(trials) + static_cast<std::size_t>(t);
      hits += hit[job];
      report.estimator_divergences += div[job];
    }
    const double cov = static_cast<double>(hits) / trials;
    report.per_sensor_coverage.push_back(cov);
    report.worst_coverage = std::min(report.worst_coverage, cov);
  }
  return report;
}

}  // namespace anchorplace
