#pragma once

// Dense primal-dual interior-point method for ConeProgram.
//
// The program is brought to conic form
//
//     minimize c'x   s.t.  G x + s = h,  A x = b,  s in K
//
// with K a product of a nonnegative orthant (finite box bounds) and PSD blocks
// (G x = -sum_i x_i A_ji, h = constant_j). It is solved through the
// homogeneous self-dual embedding (variables x, y, z, s, tau, kappa), so
// infeasible and unbounded programs terminate with a certificate instead of
// looping. Each iteration uses Nesterov-Todd scaling and a Mehrotra
// predictor-corrector step. The Newton system is reduced to the Schur
// complement S = G' H^-1 G (dense, Cholesky) plus a small p x p system for the
// equality multipliers; a few rounds of iterative refinement are applied on
// the full KKT system.
//
// Internally every PSD block is divided by its largest coefficient and the
// objective by its largest entry; residuals and gaps are measured on that
// normalized program. x itself is never rescaled.
//
// Near the optimum the tau direction comes from a difference of O(1) terms
// whose true value is O(mu), so double precision runs out before the 1e-8
// targets on degenerate programs. Small programs therefore run in long double
// by default, and a breakdown triggers a rerun with shorter steps.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "anchorplace/cone_program.hpp"

namespace anchorplace {

enum class SolveStatus { Optimal, Infeasible, MaxIterations, NumericalFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

enum class Precision { Automatic, Double, Extended };

/// Programs up to this many variables run in long double under Precision::Automatic.
inline constexpr int kExtendedPrecisionMaxVariables = 500;

struct SolverSettings {
  double gap_tol = 1e-8;   // relative duality gap
  double feas_tol = 1e-8;  // relative primal / dual residual
  int max_iterations = 100;
  int refinement_steps = 3;
  double step_fraction = 0.99;
  Precision precision = Precision::Automatic;
  bool retry_on_failure = true;  // rerun with shorter steps after a breakdown
  std::ostream* log = nullptr;
};

struct SolveOutcome {
  Eigen::VectorXd x;
  SolveStatus status = SolveStatus::NumericalFailure;
  double duality_gap = std::numeric_limits<double>::infinity();
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double primal_objective = std::numeric_limits<double>::quiet_NaN();
  double dual_objective = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  int attempts = 1;
  std::string certificate;  // set when status == Infeasible (or on failure)
};

namespace cone_detail {

/// Element of the cone's ambient space: orthant part plus one symmetric matrix per block.
template <class Real>
struct ConeVec {
  using VectorXd = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  using MatrixXd = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  VectorXd orth;
  std::vector<MatrixXd> psd;

  ConeVec& operator+=(const ConeVec& o) {
    orth += o.orth;
    for (std::size_t j = 0; j < psd.size(); ++j) psd[j] += o.psd[j];
    return *this;
  }
  ConeVec& operator*=(Real a) {
    orth *= a;
    for (auto& m : psd) m *= a;
    return *this;
  }
  void axpy(Real a, const ConeVec& o) {
    orth += a * o.orth;
    for (std::size_t j = 0; j < psd.size(); ++j) psd[j] += a * o.psd[j];
  }
};

template <class Real>
Real dot(const ConeVec<Real>& a, const ConeVec<Real>& b) {
  Real d = a.orth.dot(b.orth);
  for (std::size_t j = 0; j < a.psd.size(); ++j) d += a.psd[j].cwiseProduct(b.psd[j]).sum();
  return d;
}

template <class Real>
ConeVec<Real> operator-(const ConeVec<Real>& a, const ConeVec<Real>& b) {
  ConeVec<Real> r = a;
  r.axpy(-1.0, b);
  return r;
}

template <class Real>
ConeVec<Real> operator+(const ConeVec<Real>& a, const ConeVec<Real>& b) {
  ConeVec<Real> r = a;
  r += b;
  return r;
}

template <class Real>
ConeVec<Real> operator*(Real a, const ConeVec<Real>& v) {
  ConeVec<Real> r = v;
  r *= a;
  return r;
}

/// Nesterov-Todd scaling point data. For the orthant W = diag(omega); for a
/// PSD block W(u) = R' u R with R' z R = R^-1 s R^-T = diag(lambda).
template <class Real>
struct Scaling {
  using VectorXd = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  using MatrixXd = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  VectorXd omega;
  VectorXd lambda_orth;
  std::vector<MatrixXd> r;      // R
  std::vector<MatrixXd> r_it;   // R^-T
  std::vector<MatrixXd> q;      // R^-T R^-1   (H^-1 u = Q u Q)
  std::vector<MatrixXd> rrt;    // R R'        (H u = RR' u RR')
  std::vector<VectorXd> lambda;
};

/// Interior-point engine; `Real` is the working precision.
template <class Real>
class Engine {
 public:
  using VectorXd = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  using MatrixXd = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using ConeVec = cone_detail::ConeVec<Real>;
  using Scaling = cone_detail::Scaling<Real>;

  Engine(const ConeProgram& program, const SolverSettings& settings)
      : settings_(settings), n_(program.num_variables()) {
    build(program);
  }

  SolveOutcome run();

 private:
  // ----- problem data (normalized) -----
  SolverSettings settings_;
  int n_ = 0;
  int p_ = 0;
  VectorXd c_;
  Real c_scale_ = 1.0;
  Eigen::VectorXd c_orig_;
  std::vector<int> orth_var_;
  VectorXd orth_sign_;
  VectorXd h_orth_;
  std::vector<PsdBlock> blocks_;
  MatrixXd a_;
  VectorXd b_;
  int degree_ = 0;
  Real hb_norm_ = 0.0;
  Real c_norm_ = 0.0;
  VectorXd x0_;

  // ----- factorization of the reduced KKT system -----
  Eigen::LLT<MatrixXd> s_llt_;
  Eigen::LDLT<MatrixXd> s_ldlt_;
  bool use_ldlt_ = false;
  bool augmented_ = false;
  MatrixXd s_inv_at_;
  Eigen::LDLT<MatrixXd> m_ldlt_;

  void build(const ConeProgram& program);

  ConeVec zero_cone() const {
    ConeVec v;
    v.orth = VectorXd::Zero(static_cast<Eigen::Index>(orth_var_.size()));
    v.psd.reserve(blocks_.size());
    for (const auto& b : blocks_) v.psd.push_back(MatrixXd::Zero(b.size, b.size));
    return v;
  }

  ConeVec identity_cone() const {
    ConeVec v;
    v.orth = VectorXd::Ones(static_cast<Eigen::Index>(orth_var_.size()));
    for (const auto& b : blocks_) v.psd.push_back(MatrixXd::Identity(b.size, b.size));
    return v;
  }

  ConeVec h_cone() const {
    ConeVec v;
    v.orth = h_orth_;
    for (const auto& b : blocks_) v.psd.push_back(b.constant.template cast<Real>());
    return v;
  }

  ConeVec apply_g(const VectorXd& x) const {
    ConeVec v = zero_cone();
    for (std::size_t k = 0; k < orth_var_.size(); ++k) v.orth[k] = orth_sign_[k] * x[orth_var_[k]];
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      MatrixXd& m = v.psd[j];
      for (const auto& t : blocks_[j].terms) {
        const Real xi = x[t.variable];
        if (xi == 0.0) continue;
        for (const auto& e : t.entries) {
          m(e.row, e.col) -= xi * e.value;
          if (e.row != e.col) m(e.col, e.row) -= xi * e.value;
        }
      }
    }
    return v;
  }

  VectorXd apply_gt(const ConeVec& z) const {
    VectorXd out = VectorXd::Zero(n_);
    for (std::size_t k = 0; k < orth_var_.size(); ++k) out[orth_var_[k]] += orth_sign_[k] * z.orth[k];
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      const MatrixXd& m = z.psd[j];
      for (const auto& t : blocks_[j].terms) {
        Real acc = 0.0;
        for (const auto& e : t.entries) {
          acc += e.value * (e.row == e.col ? m(e.row, e.row) : 2.0 * m(e.row, e.col));
        }
        out[t.variable] -= acc;
      }
    }
    return out;
  }

  // W, W', W^-T, H, H^-1 and the Jordan-algebra helpers.
  ConeVec scale_w(const Scaling& w, const ConeVec& u) const {
    ConeVec v;
    v.orth = w.omega.cwiseProduct(u.orth);
    for (std::size_t j = 0; j < u.psd.size(); ++j) v.psd.push_back(w.r[j].transpose() * u.psd[j] * w.r[j]);
    return v;
  }
  ConeVec scale_wt(const Scaling& w, const ConeVec& u) const {
    ConeVec v;
    v.orth = w.omega.cwiseProduct(u.orth);
    for (std::size_t j = 0; j < u.psd.size(); ++j) v.psd.push_back(w.r[j] * u.psd[j] * w.r[j].transpose());
    return v;
  }
  ConeVec scale_winvt(const Scaling& w, const ConeVec& u) const {
    ConeVec v;
    v.orth = u.orth.cwiseQuotient(w.omega);
    for (std::size_t j = 0; j < u.psd.size(); ++j) v.psd.push_back(w.r_it[j].transpose() * u.psd[j] * w.r_it[j]);
    return v;
  }
  ConeVec apply_h(const Scaling& w, const ConeVec& u) const {
    ConeVec v;
    v.orth = w.omega.cwiseAbs2().cwiseProduct(u.orth);
    for (std::size_t j = 0; j < u.psd.size(); ++j) v.psd.push_back(w.rrt[j] * u.psd[j] * w.rrt[j]);
    return v;
  }
  ConeVec apply_hinv(const Scaling& w, const ConeVec& u) const {
    ConeVec v;
    v.orth = u.orth.cwiseQuotient(w.omega.cwiseAbs2());
    for (std::size_t j = 0; j < u.psd.size(); ++j) v.psd.push_back(w.q[j] * u.psd[j] * w.q[j]);
    return v;
  }
  static ConeVec jordan(const ConeVec& a, const ConeVec& b) {
    ConeVec v;
    v.orth = a.orth.cwiseProduct(b.orth);
    for (std::size_t j = 0; j < a.psd.size(); ++j) {
      MatrixXd ab = a.psd[j] * b.psd[j];
      v.psd.push_back(0.5 * (ab + ab.transpose()));
    }
    return v;
  }
  /// lambda o lambda for the diagonal scaled point.
  static ConeVec lambda_sq(const Scaling& w) {
    ConeVec v;
    v.orth = w.lambda_orth.cwiseAbs2();
    for (const auto& l : w.lambda) v.psd.push_back(l.cwiseAbs2().asDiagonal());
    return v;
  }
  /// Solves lambda o u = v for u.
  static ConeVec lambda_div(const Scaling& w, const ConeVec& v) {
    ConeVec u;
    u.orth = v.orth.cwiseQuotient(w.lambda_orth);
    for (std::size_t j = 0; j < v.psd.size(); ++j) {
      const VectorXd& l = w.lambda[j];
      MatrixXd m = v.psd[j];
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) *= 2.0 / (l[r] + l[c]);
      }
      u.psd.push_back(std::move(m));
    }
    return u;
  }

  bool compute_scaling(const ConeVec& s, const ConeVec& z, Scaling& w) const;
  bool factor(const Scaling& w);
  void solve_reduced(const Scaling& w, const VectorXd& bx, const VectorXd& by, const ConeVec& bz,
                     VectorXd& dx, VectorXd& dy, ConeVec& dz) const;
  void solve_kkt(const Scaling& w, const VectorXd& bx, const VectorXd& by, const ConeVec& bz,
                 VectorXd& dx, VectorXd& dy, ConeVec& dz) const;
  Real max_step(const Scaling& w, const ConeVec& ds_scaled, const ConeVec& dz_scaled) const;
};

template <class Real>
inline void Engine<Real>::build(const ConeProgram& program) {
  program.validate();
  c_orig_ = program.objective;
  const Real cmax = program.objective.cwiseAbs().maxCoeff();
  c_scale_ = cmax > 0.0 ? cmax : 1.0;
  c_ = program.objective.template cast<Real>() / c_scale_;

  for (int i = 0; i < n_; ++i) {
    if (std::isfinite(program.lower[i])) {
      orth_var_.push_back(i);
      h_orth_.conservativeResize(static_cast<Eigen::Index>(orth_var_.size()));
      orth_sign_.conservativeResize(static_cast<Eigen::Index>(orth_var_.size()));
      orth_sign_[orth_sign_.size() - 1] = -1.0;
      h_orth_[h_orth_.size() - 1] = -program.lower[i];
    }
    if (std::isfinite(program.upper[i])) {
      orth_var_.push_back(i);
      h_orth_.conservativeResize(static_cast<Eigen::Index>(orth_var_.size()));
      orth_sign_.conservativeResize(static_cast<Eigen::Index>(orth_var_.size()));
      orth_sign_[orth_sign_.size() - 1] = 1.0;
      h_orth_[h_orth_.size() - 1] = program.upper[i];
    }
  }
  if (orth_var_.empty()) {
    h_orth_.resize(0);
    orth_sign_.resize(0);
  }

  blocks_ = program.blocks;
  for (auto& b : blocks_) {
    Real scale = b.constant.cwiseAbs().maxCoeff();
    for (const auto& t : b.terms) {
      for (const auto& e : t.entries) scale = std::max<Real>(scale, std::abs(e.value));
    }
    if (!(scale > 0.0)) scale = 1.0;
    b.constant /= scale;
    for (auto& t : b.terms) {
      for (auto& e : t.entries) e.value /= scale;
    }
  }

  p_ = static_cast<int>(program.equalities.size());
  a_ = MatrixXd::Zero(p_, n_);
  b_ = VectorXd::Zero(p_);
  for (int k = 0; k < p_; ++k) {
    const auto& eq = program.equalities[k];
    Real scale = 0.0;
    for (const auto& [i, v] : eq.coefficients) {
      a_(k, i) += v;
      scale = std::max<Real>(scale, std::abs(v));
    }
    if (!(scale > 0.0)) scale = 1.0;
    a_.row(k) /= scale;
    b_[k] = eq.rhs / scale;
  }

  degree_ = static_cast<int>(orth_var_.size());
  for (const auto& b : blocks_) degree_ += b.size;
  c_norm_ = c_.norm();
  hb_norm_ = std::sqrt(b_.squaredNorm() + dot(h_cone(), h_cone()));

  // Box midpoint, or one unit inside a single finite bound, or 1 when free.
  x0_ = VectorXd::Ones(n_);
  for (int i = 0; i < n_; ++i) {
    const bool lo = std::isfinite(program.lower[i]);
    const bool hi = std::isfinite(program.upper[i]);
    if (lo && hi) {
      x0_[i] = 0.5 * (program.lower[i] + program.upper[i]);
    } else if (lo) {
      x0_[i] = program.lower[i] + 1.0;
    } else if (hi) {
      x0_[i] = program.upper[i] - 1.0;
    }
  }
}

template <class Real>
inline bool Engine<Real>::compute_scaling(const ConeVec& s, const ConeVec& z, Scaling& w) const {
  for (Eigen::Index k = 0; k < s.orth.size(); ++k) {
    if (!(s.orth[k] > 0.0) || !(z.orth[k] > 0.0)) return false;
  }
  w.omega = s.orth.cwiseQuotient(z.orth).cwiseSqrt();
  w.lambda_orth = s.orth.cwiseProduct(z.orth).cwiseSqrt();
  const std::size_t nb = blocks_.size();
  w.r.resize(nb);
  w.r_it.resize(nb);
  w.q.resize(nb);
  w.rrt.resize(nb);
  w.lambda.resize(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    Eigen::LLT<MatrixXd> ls(s.psd[j]);
    Eigen::LLT<MatrixXd> lz(z.psd[j]);
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
    const MatrixXd l_s = ls.matrixL();
    const MatrixXd l_z = lz.matrixL();
    Eigen::JacobiSVD<MatrixXd> svd(l_z.transpose() * l_s, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VectorXd sv = svd.singularValues();
    if (!(sv.minCoeff() > 0.0) || !sv.allFinite()) return false;
    const VectorXd inv_sqrt = sv.cwiseSqrt().cwiseInverse();
    w.r[j] = l_s * svd.matrixV() * inv_sqrt.asDiagonal();
    w.r_it[j] = l_z * svd.matrixU() * inv_sqrt.asDiagonal();
    w.q[j] = w.r_it[j] * w.r_it[j].transpose();
    w.rrt[j] = w.r[j] * w.r[j].transpose();
    w.lambda[j] = sv;
  }
  return true;
}

template <class Real>
inline bool Engine<Real>::factor(const Scaling& w) {
  MatrixXd schur = MatrixXd::Zero(n_, n_);
  for (std::size_t k = 0; k < orth_var_.size(); ++k) {
    schur(orth_var_[k], orth_var_[k]) += 1.0 / (w.omega[k] * w.omega[k]);
  }
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const MatrixXd& q = w.q[j];
    const auto& terms = blocks_[j].terms;
    const std::size_t nt = terms.size();
    for (std::size_t a = 0; a < nt; ++a) {
      const auto& ta = terms[a];
      for (std::size_t b = a; b < nt; ++b) {
        const auto& tb = terms[b];
        Real acc = 0.0;
        for (const auto& e : ta.entries) {
          const int p = e.row;
          const int qq = e.col;
          const Real fe = (p != qq) ? 1.0 : 0.5;
          for (const auto& f : tb.entries) {
            const int r = f.row;
            const int s = f.col;
            const Real ff = (r != s) ? 2.0 : 1.0;
            acc += e.value * f.value * fe * ff * (q(qq, r) * q(p, s) + q(qq, s) * q(p, r));
          }
        }
        schur(ta.variable, tb.variable) += acc;
        if (ta.variable != tb.variable) schur(tb.variable, ta.variable) += acc;
      }
    }
  }

  augmented_ = false;
  use_ldlt_ = false;
  s_llt_.compute(schur);
  if (s_llt_.info() != Eigen::Success && p_ > 0) {
    augmented_ = true;
    s_llt_.compute(schur + a_.transpose() * a_);
  }
  if (s_llt_.info() != Eigen::Success) {
    MatrixXd reg = augmented_ ? MatrixXd(schur + a_.transpose() * a_) : schur;
    const Real delta = 1e-13 * std::max<Real>(1, reg.diagonal().cwiseAbs().maxCoeff());
    reg.diagonal().array() += delta;
    s_llt_.compute(reg);
    if (s_llt_.info() != Eigen::Success) {
      use_ldlt_ = true;
      s_ldlt_.compute(reg);
      if (s_ldlt_.info() != Eigen::Success) return false;
    }
  }
  if (p_ > 0) {
    const MatrixXd at = a_.transpose();
    s_inv_at_ = use_ldlt_ ? MatrixXd(s_ldlt_.solve(at)) : MatrixXd(s_llt_.solve(at));
    m_ldlt_.compute(a_ * s_inv_at_);
    if (m_ldlt_.info() != Eigen::Success) return false;
  }
  return s_inv_at_.allFinite() || p_ == 0;
}

template <class Real>
inline void Engine<Real>::solve_reduced(const Scaling& w, const VectorXd& bx, const VectorXd& by,
                                  const ConeVec& bz, VectorXd& dx, VectorXd& dy,
                                  ConeVec& dz) const {
  VectorXd rhs = bx + apply_gt(apply_hinv(w, bz));
  if (augmented_) rhs += a_.transpose() * by;
  const VectorXd t = use_ldlt_ ? VectorXd(s_ldlt_.solve(rhs)) : VectorXd(s_llt_.solve(rhs));
  if (p_ > 0) {
    dy = m_ldlt_.solve(a_ * t - by);
    dx = t - s_inv_at_ * dy;
  } else {
    dy.resize(0);
    dx = t;
  }
  dz = apply_hinv(w, apply_g(dx) - bz);
}

template <class Real>
inline void Engine<Real>::solve_kkt(const Scaling& w, const VectorXd& bx, const VectorXd& by,
                              const ConeVec& bz, VectorXd& dx, VectorXd& dy, ConeVec& dz) const {
  solve_reduced(w, bx, by, bz, dx, dy, dz);
  // Residual of  [0 A' G'; A 0 0; G 0 -H] [dx; dy; dz] = [bx; by; bz],
  // measured in the H^-1 metric on the cone part.
  auto residual = [&](const VectorXd& sx, const VectorXd& sy, const ConeVec& sz, VectorXd& ex,
                      VectorXd& ey, ConeVec& ez) {
    ex = bx - apply_gt(sz);
    if (p_ > 0) ex -= a_.transpose() * sy;
    ey = p_ > 0 ? VectorXd(by - a_ * sx) : VectorXd(0);
    ez = bz - (apply_g(sx) - apply_h(w, sz));
    return std::sqrt(ex.squaredNorm() + ey.squaredNorm() + dot(ez, apply_hinv(w, ez)));
  };
  VectorXd ex, ey;
  ConeVec ez;
  Real err = residual(dx, dy, dz, ex, ey, ez);
  for (int it = 0; it < settings_.refinement_steps && err > 0.0; ++it) {
    VectorXd cx, cy;
    ConeVec cz;
    solve_reduced(w, ex, ey, ez, cx, cy, cz);
    VectorXd nx = dx + cx;
    VectorXd ny = p_ > 0 ? VectorXd(dy + cy) : dy;
    ConeVec nz = dz + cz;
    VectorXd fx, fy;
    ConeVec fz;
    const Real next = residual(nx, ny, nz, fx, fy, fz);
    if (!(next < err)) break;
    dx = std::move(nx);
    dy = std::move(ny);
    dz = std::move(nz);
    ex = std::move(fx);
    ey = std::move(fy);
    ez = std::move(fz);
    err = next;
  }
}

template <class Real>
inline Real Engine<Real>::max_step(const Scaling& w, const ConeVec& ds, const ConeVec& dz) const {
  Real alpha = std::numeric_limits<Real>::infinity();
  for (Eigen::Index k = 0; k < ds.orth.size(); ++k) {
    const Real l = w.lambda_orth[k];
    if (ds.orth[k] < 0.0) alpha = std::min(alpha, -l / ds.orth[k]);
    if (dz.orth[k] < 0.0) alpha = std::min(alpha, -l / dz.orth[k]);
  }
  for (std::size_t j = 0; j < ds.psd.size(); ++j) {
    const VectorXd isq = w.lambda[j].cwiseSqrt().cwiseInverse();
    for (const MatrixXd* d : {&ds.psd[j], &dz.psd[j]}) {
      MatrixXd m = isq.asDiagonal() * (*d) * isq.asDiagonal();
      m = 0.5 * (m + m.transpose()).eval();
      Real lo;
      if (m.rows() == 1) {
        lo = m(0, 0);
      } else {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
        lo = es.eigenvalues().minCoeff();
      }
      if (lo < 0.0) alpha = std::min(alpha, -1.0 / lo);
    }
  }
  return alpha;
}

template <class Real>
inline SolveOutcome Engine<Real>::run() {
  SolveOutcome out;
  VectorXd x = x0_;
  VectorXd y = VectorXd::Zero(p_);
  ConeVec s = identity_cone();
  ConeVec z = identity_cone();
  Real tau = 1.0;
  Real kappa = 1.0;
  const ConeVec h = h_cone();
  int tiny_steps = 0;

  auto finish = [&](SolveStatus status, int iterations) {
    out.status = status;
    out.iterations = iterations;
    out.x = (x / tau).template cast<double>();
    out.primal_objective = c_orig_.dot(out.x);
    return out;
  };

  for (int iter = 0;; ++iter) {
    // Residuals of the embedding.
    const ConeVec gx = apply_g(x);
    const VectorXd gtz = apply_gt(z);
    VectorXd r1 = gtz + c_ * tau;
    if (p_ > 0) r1 += a_.transpose() * y;
    VectorXd r2 = p_ > 0 ? VectorXd(b_ * tau - a_ * x) : VectorXd(0);
    ConeVec r3 = tau * h - gx - s;
    const Real cx = c_.dot(x);
    const Real by = p_ > 0 ? b_.dot(y) : 0.0;
    const Real hz = dot(h, z);
    const Real r4 = -cx - by - hz - kappa;

    const Real pres =
        std::sqrt(r2.squaredNorm() + dot(r3, r3)) / tau / std::max<Real>(1, hb_norm_);
    const Real dres = r1.norm() / tau / std::max<Real>(1, c_norm_);
    const Real pobj = cx / tau;
    const Real dobj = -(by + hz) / tau;
    const Real gap = dot(s, z) / (tau * tau);
    const Real relgap = gap / std::max<Real>(1, std::abs(pobj));
    out.primal_residual = pres;
    out.dual_residual = dres;
    out.duality_gap = relgap;
    out.dual_objective = dobj * c_scale_;

    if (settings_.log) {
      char line[200];
      std::snprintf(line, sizeof(line),
                    "%3d  pobj % .9e  dobj % .9e  gap %.2e  pres %.2e  dres %.2e  tau %.2e  kappa %.2e\n",
                    iter, static_cast<double>(pobj * c_scale_), static_cast<double>(dobj * c_scale_),
                    static_cast<double>(relgap), static_cast<double>(pres), static_cast<double>(dres),
                    static_cast<double>(tau), static_cast<double>(kappa));
      *settings_.log << line;
    }

    if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(gap)) {
      out.certificate = "non-finite iterate";
      return finish(SolveStatus::NumericalFailure, iter);
    }
    if (pres <= settings_.feas_tol && dres <= settings_.feas_tol && relgap <= settings_.gap_tol) {
      return finish(SolveStatus::Optimal, iter);
    }
    // Certificates: (y, z) with b'y + h'z < 0, A'y + G'z ~ 0 proves the primal
    // infeasible; x with c'x < 0, Ax ~ 0, Gx + s ~ 0 proves the dual infeasible.
    if (tau < kappa) {
      const Real t = -(by + hz);
      if (t > 0.0) {
        VectorXd ray = gtz;
        if (p_ > 0) ray += a_.transpose() * y;
        const Real res = ray.norm() / t / std::max<Real>(1, c_norm_);
        if (res <= settings_.feas_tol) {
          out.certificate = "primal infeasible: dual ray with b'y + h'z = -1 and |A'y + G'z| = " +
                            std::to_string(res);
          return finish(SolveStatus::Infeasible, iter);
        }
      }
      if (cx < 0.0) {
        ConeVec gxs = gx + s;
        const Real ax = p_ > 0 ? (a_ * x).squaredNorm() : 0.0;
        const Real res = std::sqrt(ax + dot(gxs, gxs)) / (-cx) / std::max<Real>(1, hb_norm_);
        if (res <= settings_.feas_tol) {
          out.certificate = "dual infeasible: objective unbounded below along a primal ray";
          return finish(SolveStatus::Infeasible, iter);
        }
      }
    }
    if (iter >= settings_.max_iterations) return finish(SolveStatus::MaxIterations, iter);

    Scaling w;
    if (!compute_scaling(s, z, w)) {
      out.certificate = "iterate left the cone interior";
      return finish(SolveStatus::NumericalFailure, iter);
    }
    if (!factor(w)) {
      out.certificate = "KKT factorization failed";
      return finish(SolveStatus::NumericalFailure, iter);
    }

    // Direction for tau: K d = [-c; b; h].
    VectorXd d1x, d1y;
    ConeVec d1z;
    solve_kkt(w, -c_, b_, h, d1x, d1y, d1z);
    const Real d1_dot = c_.dot(d1x) + (p_ > 0 ? b_.dot(d1y) : 0.0) + dot(h, d1z);

    const Real mu = (dot(s, z) + tau * kappa) / (degree_ + 1);
    const ConeVec lsq = lambda_sq(w);

    // One Newton solve for a given complementarity target (ds, dkappa) and
    // residual reduction (1 - sigma).
    struct Step {
      VectorXd dx, dy;
      ConeVec dz, ds, ds_scaled, dz_scaled;
      Real dtau = 0.0, dkappa = 0.0;
    };
    auto newton = [&](const ConeVec& ds_target, Real dkappa_target, Real sigma) {
      Step st;
      const Real keep = 1.0 - sigma;
      const ConeVec ldiv = lambda_div(w, ds_target);
      ConeVec bz = keep * r3 - scale_wt(w, ldiv);
      VectorXd bx = -keep * r1;
      VectorXd byv = keep * r2;
      VectorXd px, py;
      ConeVec pz;
      solve_kkt(w, bx, byv, bz, px, py, pz);
      const Real p_dot = c_.dot(px) + (p_ > 0 ? b_.dot(py) : 0.0) + dot(h, pz);
      st.dtau = (-keep * r4 + dkappa_target / tau + p_dot) / (kappa / tau - d1_dot);
      st.dx = px + st.dtau * d1x;
      st.dy = p_ > 0 ? VectorXd(py + st.dtau * d1y) : VectorXd(0);
      st.dz = pz + st.dtau * d1z;
      st.dz_scaled = scale_w(w, st.dz);
      // Taken from the linearized primal equation rather than through the
      // scaling, so the primal residual contracts exactly even when the
      // scaled blocks are badly conditioned.
      st.ds = keep * r3 - apply_g(st.dx) + st.dtau * h;
      st.ds_scaled = scale_winvt(w, st.ds);
      st.dkappa = (dkappa_target - kappa * st.dtau) / tau;
      return st;
    };
    auto step_length = [&](const Step& st) {
      Real a = max_step(w, st.ds_scaled, st.dz_scaled);
      if (st.dtau < 0.0) a = std::min(a, -tau / st.dtau);
      if (st.dkappa < 0.0) a = std::min(a, -kappa / st.dkappa);
      return a;
    };

    // Predictor.
    const Step aff = newton(Real(-1) * lsq, -tau * kappa, 0.0);
    const Real alpha_aff = std::min<Real>(1, step_length(aff));
    const Real sigma = std::pow(std::max<Real>(0, 1 - alpha_aff), 3);

    // Corrector.
    ConeVec ds_target = Real(-1) * lsq - jordan(aff.ds_scaled, aff.dz_scaled);
    ds_target.orth.array() += sigma * mu;
    for (auto& m : ds_target.psd) m.diagonal().array() += sigma * mu;
    const Real dk_target = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
    const Step st = newton(ds_target, dk_target, sigma);
    const Real alpha = std::min<Real>(1, settings_.step_fraction * step_length(st));

    if (!std::isfinite(alpha) || alpha < 1e-12) {
      if (++tiny_steps >= 3) {
        out.certificate = "step length collapsed";
        return finish(SolveStatus::NumericalFailure, iter);
      }
    } else {
      tiny_steps = 0;
    }

    x += alpha * st.dx;
    if (p_ > 0) y += alpha * st.dy;
    s.axpy(alpha, st.ds);
    z.axpy(alpha, st.dz);
    tau += alpha * st.dtau;
    kappa += alpha * st.dkappa;
    for (auto& m : s.psd) m = 0.5 * (m + m.transpose()).eval();
    for (auto& m : z.psd) m = 0.5 * (m + m.transpose()).eval();
    if (!(tau > 0.0) || !(kappa > 0.0)) {
      out.certificate = "homogenizing variables left the cone";
      return finish(SolveStatus::NumericalFailure, iter + 1);
    }
  }
}

}  // namespace cone_detail

/// Solves `program`. Never throws on solver trouble; inspect `status`.
/// Throws std::invalid_argument for a malformed program.
inline SolveOutcome solve(const ConeProgram& program, const SolverSettings& settings = {}) {
  const bool extended =
      settings.precision == Precision::Extended ||
      (settings.precision == Precision::Automatic &&
       program.num_variables() <= kExtendedPrecisionMaxVariables);
  auto attempt = [&](const SolverSettings& s) {
    if (extended) return cone_detail::Engine<long double>(program, s).run();
    return cone_detail::Engine<double>(program, s).run();
  };
  SolveOutcome out = attempt(settings);
  int attempts = 1;
  if (settings.retry_on_failure) {
    // Shorter steps keep the iterates further from the cone boundary, which
    // usually carries a breakdown near the optimum through.
    for (double fraction : {0.95, 0.9, 0.8}) {
      if (out.status != SolveStatus::NumericalFailure && out.status != SolveStatus::MaxIterations) break;
      if (fraction >= settings.step_fraction) continue;
      SolverSettings s = settings;
      s.step_fraction = fraction;
      out = attempt(s);
      ++attempts;
    }
  }
  out.attempts = attempts;
  return out;
}

}  // namespace anchorplace
