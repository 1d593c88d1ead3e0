#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace anchorplace {

/// One upper-triangle entry (row <= col) of a symmetric coefficient matrix.
/// The entry stands for both (row, col) and (col, row).
struct SymEntry {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Coefficient matrix of one decision variable inside a PSD block.
struct BlockTerm {
  int variable = 0;
  std::vector<SymEntry> entries;
};

/// Affine matrix constraint  constant + sum_i x_i A_i  >= 0  (PSD).
struct PsdBlock {
  int size = 0;
  Eigen::MatrixXd constant;
  std::vector<BlockTerm> terms;

  PsdBlock() = default;
  explicit PsdBlock(int n) : size(n), constant(Eigen::MatrixXd::Zero(n, n)) {}

  /// Adds a dense symmetric coefficient; entries with |a| <= drop_tol are skipped.
  void add_term(int variable, const Eigen::MatrixXd& coefficient, double drop_tol = 0.0) {
    BlockTerm term{variable, {}};
    for (int c = 0; c < size; ++c) {
      for (int r = 0; r <= c; ++r) {
        const double a = coefficient(r, c);
        if (std::abs(a) > drop_tol) term.entries.push_back({r, c, a});
      }
    }
    if (!term.entries.empty()) terms.push_back(std::move(term));
  }

  void add_entry(int variable, int row, int col, double value) {
    if (row > col) std::swap(row, col);
    if (terms.empty() || terms.back().variable != variable) terms.push_back({variable, {}});
    terms.back().entries.push_back({row, col, value});
  }

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd m = constant;
    for (const auto& t : terms) {
      const double xi = x[t.variable];
      for (const auto& e : t.entries) {
        m(e.row, e.col) += xi * e.value;
        if (e.row != e.col) m(e.col, e.row) += xi * e.value;
      }
    }
    return m;
  }
};

/// sum_k coefficients[k].second * x[coefficients[k].first] == rhs
struct LinearEquality {
  std::vector<std::pair<int, double>> coefficients;
  double rhs = 0.0;
};

/// minimize  objective' x
/// s.t.      lower <= x <= upper            (entries may be infinite)
///           constant_j + sum_i x_i A_ji >= 0 for every PSD block j
///           equalities
struct ConeProgram {
  Eigen::VectorXd objective;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<PsdBlock> blocks;
  std::vector<LinearEquality> equalities;

  ConeProgram() = default;
  explicit ConeProgram(int n)
      : objective(Eigen::VectorXd::Zero(n)),
        lower(Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity())),
        upper(Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity())) {}

  int num_variables() const { return static_cast<int>(objective.size()); }

  /// Throws std::invalid_argument on a malformed program.
  void validate() const {
    const int n = num_variables();
    if (n < 1) throw std::invalid_argument("ConeProgram: no variables");
    if (lower.size() != n || upper.size() != n) {
      throw std::invalid_argument("ConeProgram: bound vectors must match objective length");
    }
    if (!objective.allFinite()) throw std::invalid_argument("ConeProgram: objective not finite");
    for (int i = 0; i < n; ++i) {
      if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i] ||
          lower[i] == std::numeric_limits<double>::infinity() ||
          upper[i] == -std::numeric_limits<double>::infinity()) {
        throw std::invalid_argument("ConeProgram: invalid bounds for variable " +
                                    std::to_string(i));
      }
    }
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      const auto& b = blocks[j];
      const std::string where = "ConeProgram: block " + std::to_string(j);
      if (b.size < 1) throw std::invalid_argument(where + " has size < 1");
      if (b.constant.rows() != b.size || b.constant.cols() != b.size) {
        throw std::invalid_argument(where + " constant has wrong shape");
      }
      if (!b.constant.allFinite() ||
          (b.constant - b.constant.transpose()).cwiseAbs().maxCoeff() >
              1e-12 * (1.0 + b.constant.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument(where + " constant is not symmetric");
      }
      std::vector<char> seen(static_cast<std::size_t>(n), 0);
      for (const auto& t : b.terms) {
        if (t.variable < 0 || t.variable >= n) {
          throw std::invalid_argument(where + " references an unknown variable");
        }
        if (seen[t.variable]) {
          throw std::invalid_argument(where + " lists variable " + std::to_string(t.variable) +
                                      " twice");
        }
        seen[t.variable] = 1;
        for (const auto& e : t.entries) {
          if (e.row < 0 || e.col < e.row || e.col >= b.size || !std::isfinite(e.value)) {
            throw std::invalid_argument(where + " has an invalid coefficient entry");
          }
        }
      }
    }
    for (const auto& eq : equalities) {
      if (!std::isfinite(eq.rhs)) throw std::invalid_argument("ConeProgram: equality rhs");
      for (const auto& [i, a] : eq.coefficients) {
        if (i < 0 || i >= n || !std::isfinite(a)) {
          throw std::invalid_argument("ConeProgram: invalid equality coefficient");
        }
      }
    }
  }
};

struct BoundViolation {
  int variable = 0;
  bool upper = false;
  double magnitude = 0.0;
};

/// Constraint residuals recomputed from scratch at a candidate x.
struct ConstraintReport {
  std::vector<double> block_min_eigenvalues;
  std::vector<double> block_norms;  // spectral norm of the evaluated block
  std::vector<BoundViolation> bound_violations;
  std::vector<double> equality_residuals;
  double worst_relative_block = 0.0;  // min_j lambda_min_j / (1 + |block_j|)
  double max_equality_violation = 0.0;
  double max_bound_violation = 0.0;
  bool feasible = true;
};

/// Independent verifier: a dense eigendecomposition per block, direct bound
/// and equality evaluation. Shares no code with the solver.
inline ConstraintReport check_solution(const ConeProgram& program, const Eigen::VectorXd& x,
                                       double tol) {
  const int n = program.num_variables();
  if (x.size() != n) throw std::invalid_argument("check_solution: dimension mismatch");
  ConstraintReport report;
  report.worst_relative_block = std::numeric_limits<double>::infinity();
  for (const auto& block : program.blocks) {
    const Eigen::MatrixXd m = block.evaluate(x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
    report.block_min_eigenvalues.push_back(lo);
    report.block_norms.push_back(norm);
    report.worst_relative_block = std::min(report.worst_relative_block, lo / (1.0 + norm));
    if (lo < -tol * (1.0 + norm)) report.feasible = false;
  }
  if (program.blocks.empty()) report.worst_relative_block = 0.0;
  for (int i = 0; i < n; ++i) {
    if (x[i] < program.lower[i]) {
      const double v = program.lower[i] - x[i];
      report.max_bound_violation = std::max(report.max_bound_violation, v);
      if (v > tol) report.bound_violations.push_back({i, false, v});
    }
    if (x[i] > program.upper[i]) {
      const double v = x[i] - program.upper[i];
      report.max_bound_violation = std::max(report.max_bound_violation, v);
      if (v > tol) report.bound_violations.push_back({i, true, v});
    }
  }
  if (!report.bound_violations.empty()) report.feasible = false;
  for (const auto& eq : program.equalities) {
    double lhs = 0.0;
    for (const auto& [i, a] : eq.coefficients) lhs += a * x[i];
    const double r = lhs - eq.rhs;
    report.equality_residuals.push_back(r);
    report.max_equality_violation = std::max(report.max_equality_violation, std::abs(r));
    if (std::abs(r) > tol * (1.0 + std::abs(eq.rhs))) report.feasible = false;
  }
  return report;
}

/// Writes the program in SDPA sparse format (".dat-s") so it can be handed to
/// an external SDP solver. SDPA's form is  min c'x  s.t.  sum_i x_i F_i - F_0 >= 0,
/// so F_0 = -constant and F_i = A_i. Finite bounds and equalities go into one
/// trailing diagonal (LP) block; each equality contributes two rows.
inline void write_sdpa(const ConeProgram& program, std::ostream& out) {
  const int n = program.num_variables();
  struct LpRow {
    std::vector<std::pair<int, double>> coeffs;
    double constant;  // row value is constant + sum coeffs * x
  };
  std::vector<LpRow> lp;
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(program.lower[i])) lp.push_back({{{i, 1.0}}, -program.lower[i]});
    if (std::isfinite(program.upper[i])) lp.push_back({{{i, -1.0}}, program.upper[i]});
  }
  for (const auto& eq : program.equalities) {
    LpRow plus{eq.coefficients, -eq.rhs};
    LpRow minus{{}, eq.rhs};
    for (const auto& [i, a] : eq.coefficients) minus.coeffs.emplace_back(i, -a);
    lp.push_back(std::move(plus));
    lp.push_back(std::move(minus));
  }
  const int num_blocks = static_cast<int>(program.blocks.size()) + (lp.empty() ? 0 : 1);
  out << "* anchorplace cone program, SDPA sparse format\n";
  out << n << " = mDIM\n" << num_blocks << " = nBLOCK\n";
  for (const auto& b : program.blocks) out << b.size << ' ';
  if (!lp.empty()) out << -static_cast<int>(lp.size());
  out << " = bLOCKsTRUCT\n";
  out << std::setprecision(17);
  for (int i = 0; i < n; ++i) out << program.objective[i] << (i + 1 < n ? ' ' : '\n');
  for (std::size_t j = 0; j < program.blocks.size(); ++j) {
    const auto& b = program.blocks[j];
    for (int c = 0; c < b.size; ++c) {
      for (int r = 0; r <= c; ++r) {
        if (b.constant(r, c) != 0.0) {
          out << 0 << ' ' << j + 1 << ' ' << r + 1 << ' ' << c + 1 << ' ' << -b.constant(r, c)
              << '\n';
        }
      }
    }
    for (const auto& t : b.terms) {
      for (const auto& e : t.entries) {
        out << t.variable + 1 << ' ' << j + 1 << ' ' << e.row + 1 << ' ' << e.col + 1 << ' '
            << e.value << '\n';
      }
    }
  }
  const int lp_block = static_cast<int>(program.blocks.size()) + 1;
  for (std::size_t r = 0; r < lp.size(); ++r) {
    const int idx = static_cast<int>(r) + 1;
    if (lp[r].constant != 0.0) {
      out << 0 << ' ' << lp_block << ' ' << idx << ' ' << idx << ' ' << -lp[r].constant << '\n';
    }
    for (const auto& [i, a] : lp[r].coeffs) {
      out << i + 1 << ' ' << lp_block << ' ' << idx << ' ' << idx << ' ' << a << '\n';
    }
  }
}

}  // namespace anchorplace
