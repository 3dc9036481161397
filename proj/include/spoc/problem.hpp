#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "coeff_matrix.hpp"

namespace spoc {

/// Singularly perturbed LQ problem with box-constrained control.
///
///   slow:  z1' = A11 z1 + A12 z2 + b1 u
///   fast:  eps z2' = A21 z1 + A22 z2 + eps b2 u
///   cost:  1/2 int_0^T (z'Qz + u'Ru) dt + 1/2 z(T)' diag(pi11, eps pi22) z(T)
///   box:   alpha(t) <= u(t) <= beta(t)
struct SpocProblem {
  int m = 0;
  int n = 0;
  int k = 0;
  double T = 1.0;
  double eps_star = 1.0;
  CoeffMatrix A11, A12, A21, A22;
  CoeffMatrix b1, b2;
  CoeffMatrix Q11, Q12, Q21, Q22;
  CoeffMatrix R;  ///< k x 1, the diagonal of R
  CoeffMatrix pi11, pi22;
  CoeffMatrix alpha, beta;  ///< k x 1, functions of t only
  Eigen::VectorXd z0;

  int dim() const { return m + n; }

  Eigen::MatrixXd A(double t, double eps) const {
    Eigen::MatrixXd out(m + n, m + n);
    out << A11.eval(t, eps), A12.eval(t, eps), A21.eval(t, eps), A22.eval(t, eps);
    return out;
  }

  Eigen::MatrixXd b(double t, double eps) const {
    Eigen::MatrixXd out(m + n, k);
    out << b1.eval(t, eps), b2.eval(t, eps);
    return out;
  }

  Eigen::MatrixXd Q(double t, double eps) const {
    Eigen::MatrixXd out(m + n, m + n);
    out << Q11.eval(t, eps), Q12.eval(t, eps), Q21.eval(t, eps), Q22.eval(t, eps);
    return out;
  }

  Eigen::VectorXd Rdiag(double t, double eps) const { return R.eval(t, eps).col(0); }
  Eigen::VectorXd lower(double t) const { return alpha.eval(t, 0.0).col(0); }
  Eigen::VectorXd upper(double t) const { return beta.eval(t, 0.0).col(0); }

  /// Diagonal of I^eps = diag(I_m, eps I_n).
  Eigen::VectorXd Ieps(double eps) const {
    Eigen::VectorXd d(m + n);
    d.head(m).setOnes();
    d.tail(n).setConstant(eps);
    return d;
  }

  /// blockdiag(pi11, pi22): the terminal weight with the eps on pi22 cancelled.
  Eigen::MatrixXd pi_unscaled(double eps) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m + n, m + n);
    out.topLeftCorner(m, m) = pi11.eval(0.0, eps);
    out.bottomRightCorner(n, n) = pi22.eval(0.0, eps);
    return out;
  }

  /// The terminal weight pi = blockdiag(pi11, eps pi22).
  Eigen::MatrixXd pi(double eps) const {
    Eigen::MatrixXd out = pi_unscaled(eps);
    out.bottomRightCorner(n, n) *= eps;
    return out;
  }

  bool time_invariant() const {
    for (const CoeffMatrix* c : coefficients())
      if (!c->time_invariant()) return false;
    return true;
  }

  std::vector<const CoeffMatrix*> coefficients() const {
    return {&A11, &A12, &A21, &A22, &b1, &b2, &Q11, &Q12, &Q21, &Q22, &R, &pi11, &pi22, &alpha, &beta};
  }

  /// Throws DimensionMismatch when a block disagrees with (m, n, k).
  void check_dimensions() const {
    if (m < 1 || n < 1 || k < 1) throw Error(ErrorCode::DimensionMismatch, "m, n, k must be positive");
    auto want = [](const CoeffMatrix& c, int r, int cl, const char* name) {
      if (c.rows() != r || c.cols() != cl) {
        std::ostringstream os;
        os << name << " is " << c.rows() << "x" << c.cols() << ", expected " << r << "x" << cl;
        throw Error(ErrorCode::DimensionMismatch, os.str());
      }
    };
    want(A11, m, m, "A11");
    want(A12, m, n, "A12");
    want(A21, n, m, "A21");
    want(A22, n, n, "A22");
    want(b1, m, k, "b1");
    want(b2, n, k, "b2");
    want(Q11, m, m, "Q11");
    want(Q12, m, n, "Q12");
    want(Q21, n, m, "Q21");
    want(Q22, n, n, "Q22");
    want(R, k, 1, "R");
    want(pi11, m, m, "pi11");
    want(pi22, n, n, "pi22");
    want(alpha, k, 1, "alpha");
    want(beta, k, 1, "beta");
    if (z0.size() != m + n) throw Error(ErrorCode::DimensionMismatch, "z0 length differs from m+n");
    if (pi11.Dt() != 0 || pi22.Dt() != 0)
      throw Error(ErrorCode::DimensionMismatch, "pi11/pi22 may depend on eps only (Dt = 0)");
    if (alpha.De() != 0 || beta.De() != 0)
      throw Error(ErrorCode::DimensionMismatch, "alpha/beta may depend on t only (De = 0)");
    if (!(T > 0.0) || !std::isfinite(T)) throw Error(ErrorCode::DimensionMismatch, "T must be positive");
    if (!(eps_star > 0.0)) throw Error(ErrorCode::DimensionMismatch, "eps_star must be positive");
  }
};

/// Constant-coefficient problem from full matrices; A, b, Q are split into the slow/fast blocks.
inline SpocProblem constant_problem(int m, int n, const Eigen::MatrixXd& A, const Eigen::MatrixXd& b,
                                    const Eigen::MatrixXd& Q, const Eigen::VectorXd& R, const Eigen::MatrixXd& pi11,
                                    const Eigen::MatrixXd& pi22, const Eigen::VectorXd& alpha,
                                    const Eigen::VectorXd& beta, const Eigen::VectorXd& z0, double T,
                                    double eps_star = 1.0) {
  SpocProblem p;
  p.m = m;
  p.n = n;
  p.k = static_cast<int>(b.cols());
  p.T = T;
  p.eps_star = eps_star;
  p.A11 = CoeffMatrix::constant(A.topLeftCorner(m, m));
  p.A12 = CoeffMatrix::constant(A.topRightCorner(m, n));
  p.A21 = CoeffMatrix::constant(A.bottomLeftCorner(n, m));
  p.A22 = CoeffMatrix::constant(A.bottomRightCorner(n, n));
  p.b1 = CoeffMatrix::constant(b.topRows(m));
  p.b2 = CoeffMatrix::constant(b.bottomRows(n));
  p.Q11 = CoeffMatrix::constant(Q.topLeftCorner(m, m));
  p.Q12 = CoeffMatrix::constant(Q.topRightCorner(m, n));
  p.Q21 = CoeffMatrix::constant(Q.bottomLeftCorner(n, m));
  p.Q22 = CoeffMatrix::constant(Q.bottomRightCorner(n, n));
  p.R = CoeffMatrix::constant(R);
  p.pi11 = CoeffMatrix::constant(pi11);
  p.pi22 = CoeffMatrix::constant(pi22);
  p.alpha = CoeffMatrix::constant(alpha);
  p.beta = CoeffMatrix::constant(beta);
  p.z0 = z0;
  p.check_dimensions();
  return p;
}

struct CheckResult {
  std::string name;
  bool pass = true;
  bool required = true;  ///< informational checks do not affect ok()
  double margin = 0.0;   ///< worst value found; sign convention is per check
  double t = 0.0;        ///< sample attaining the margin
  double eps = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  std::vector<double> t_grid;
  std::vector<double> eps_grid;

  bool ok() const {
    for (const auto& c : checks)
      if (c.required && !c.pass) return false;
    return true;
  }

  const CheckResult* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(6);
    for (const auto& c : checks) {
      os << (c.pass ? "PASS " : (c.required ? "FAIL " : "NOTE ")) << c.name << ": margin " << c.margin
         << " at t=" << c.t << " eps=" << c.eps;
      if (!c.detail.empty()) os << " (" << c.detail << ")";
      os << '\n';
    }
    os << "grid: " << t_grid.size() << " t-points x " << eps_grid.size() << " eps-points\n";
    return os.str();
  }
};

namespace detail {

inline double min_sym_eig(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_sym_eig(const Eigen::MatrixXd& M) { return -min_sym_eig(-M); }

inline double spectral_abscissa(const Eigen::MatrixXd& M) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  return es.eigenvalues().real().maxCoeff();
}

inline double coeff_asymmetry(const CoeffMatrix& a, const CoeffMatrix& b_transposed_of) {
  // max |a - b'| over all coefficients; shapes are assumed compatible
  CoeffMatrix d = a + (-1.0) * b_transposed_of.transpose();
  double worst = 0.0;
  for (int p = 0; p <= d.Dt(); ++p)
    for (int q = 0; q <= d.De(); ++q) worst = std::max(worst, d.coeff(p, q).cwiseAbs().maxCoeff());
  return worst;
}

}  // namespace detail

/// Checks the structural assumptions on a t x eps sample grid (eps = 0 always included).
///
/// Assumption (a) is judged by the spectral abscissa of A22; the symmetric-part
/// eigenvalue is reported as an informational entry.
inline ValidationReport validate(const SpocProblem& p, int t_points = 17, int eps_points = 5) {
  p.check_dimensions();
  if (t_points < 2 || eps_points < 2)
    throw Error(ErrorCode::InvalidArgument, "validation grid needs at least 2 points per axis");
  ValidationReport rep;
  for (int i = 0; i < t_points; ++i) rep.t_grid.push_back(p.T * i / (t_points - 1));
  for (int j = 0; j < eps_points; ++j) rep.eps_grid.push_back(p.eps_star * j / (eps_points - 1));

  const double inf = std::numeric_limits<double>::infinity();
  CheckResult finite{"coefficients finite", true, true, 0.0, 0.0, 0.0, {}};
  CheckResult rpos{"R positive diagonal", true, true, inf, 0.0, 0.0, {}};
  CheckResult qsym{"Q symmetric", true, true, 0.0, 0.0, 0.0, {}};
  CheckResult qpd{"Q positive definite", true, true, inf, 0.0, 0.0, {}};
  CheckResult p11{"pi11 positive definite", true, true, inf, 0.0, 0.0, {}};
  CheckResult p22{"pi22 positive definite", true, true, inf, 0.0, 0.0, {}};
  CheckResult a22{"A22 stable (assumption (a))", true, true, -inf, 0.0, 0.0, {}};
  CheckResult a22s{"A22 symmetric part negative definite", true, false, -inf, 0.0, 0.0, {}};
  CheckResult box{"control box nonempty", true, true, inf, 0.0, 0.0, {}};

  auto track_min = [](CheckResult& c, double v, double t, double e) {
    if (v < c.margin) { c.margin = v; c.t = t; c.eps = e; }
  };
  auto track_max = [](CheckResult& c, double v, double t, double e) {
    if (v > c.margin) { c.margin = v; c.t = t; c.eps = e; }
  };

  for (const CoeffMatrix* c : p.coefficients())
    for (int a = 0; a <= c->Dt(); ++a)
      for (int b = 0; b <= c->De(); ++b)
        if (!c->coeff(a, b).allFinite()) finite.pass = false;
  if (!p.z0.allFinite()) finite.pass = false;

  qsym.margin = std::max({detail::coeff_asymmetry(p.Q12, p.Q21), detail::coeff_asymmetry(p.Q11, p.Q11),
                          detail::coeff_asymmetry(p.Q22, p.Q22)});
  qsym.pass = qsym.margin == 0.0;

  for (double e : rep.eps_grid) {
    track_min(p11, detail::min_sym_eig(p.pi11.eval(0.0, e)), 0.0, e);
    track_min(p22, detail::min_sym_eig(p.pi22.eval(0.0, e)), 0.0, e);
    for (double t : rep.t_grid) {
      track_min(rpos, p.Rdiag(t, e).minCoeff(), t, e);
      track_min(qpd, detail::min_sym_eig(p.Q(t, e)), t, e);
      const Eigen::MatrixXd A22 = p.A22.eval(t, e);
      track_max(a22, detail::spectral_abscissa(A22), t, e);
      track_max(a22s, detail::max_sym_eig(A22), t, e);
    }
  }
  for (double t : rep.t_grid) track_min(box, (p.upper(t) - p.lower(t)).minCoeff(), t, 0.0);

  for (const CoeffMatrix* c : {&p.pi11, &p.pi22}) {
    const double asym = detail::coeff_asymmetry(*c, *c);
    if (asym != 0.0) {
      CheckResult& target = (c == &p.pi11) ? p11 : p22;
      target.pass = false;
      target.detail = "not symmetric";
    }
  }

  rpos.pass = rpos.margin > 0.0;
  qpd.pass = qpd.pass && qpd.margin > 0.0;
  p11.pass = p11.pass && p11.margin > 0.0;
  p22.pass = p22.pass && p22.margin > 0.0;
  a22.pass = a22.margin < 0.0;
  a22.detail = "max real part of eigenvalues";
  a22s.pass = a22s.margin < 0.0;
  a22s.detail = "max eigenvalue of (A22 + A22')/2";
  box.pass = box.margin >= 0.0;
  box.detail = "min of beta - alpha";

  rep.checks = {finite, rpos, qsym, qpd, p11, p22, a22, a22s, box};
  return rep;
}

}  // namespace spoc
