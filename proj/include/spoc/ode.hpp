#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dual_model.hpp"
#include "mesh.hpp"
#include "problem.hpp"
#include "trajectory.hpp"

namespace spoc {

struct IntegratorConfig {
  double rtol = 1e-9;
  double atol = 1e-11;
  int order = 5;              ///< informational; the scheme is fixed
  int refinement_limit = 6;   ///< number of global halvings before giving up
  int base_intervals = 200;   ///< uniform base mesh, merged with the layer meshes and channel breakpoints
  double layer_first_step = 0.05;  ///< first layer step, in units of eps / spectral radius of A22
  double layer_ratio = 1.03;       ///< growth factor of the geometric layer steps
  double layer_decay_lengths = 40.0;

  void check() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw Error(ErrorCode::InvalidArgument, "integrator tolerances must be positive");
  }
};

/// Nodal solution, the accumulated functional and its Richardson error estimate.
struct IntegrationResult {
  Trajectory traj;
  double functional = 0.0;
  double error = 0.0;
  int refinements = 0;
};

namespace detail {

/// Three-stage Radau IIA: order 5, stage order 3, L-stable and stiffly accurate.
struct Radau3 {
  double a[3][3]{};
  double c[3]{};
  Radau3() {
    const double r = std::sqrt(6.0);
    a[0][0] = (88.0 - 7.0 * r) / 360.0;
    a[0][1] = (296.0 - 169.0 * r) / 1800.0;
    a[0][2] = (-2.0 + 3.0 * r) / 225.0;
    a[1][0] = (296.0 + 169.0 * r) / 1800.0;
    a[1][1] = (88.0 + 7.0 * r) / 360.0;
    a[1][2] = (-2.0 - 3.0 * r) / 225.0;
    a[2][0] = (16.0 - r) / 36.0;
    a[2][1] = (16.0 + r) / 36.0;
    a[2][2] = 1.0 / 9.0;
    c[0] = (4.0 - r) / 10.0;
    c[1] = (4.0 + r) / 10.0;
    c[2] = 1.0;
  }
};

/// Eigenbasis of diag(E)^{-1} M for a constant M: y = V w decouples the stage system mode by mode.
struct ModalForm {
  Eigen::VectorXcd lambda;
  Eigen::MatrixXcd V;
  Eigen::MatrixXcd P;   ///< V^{-1}
  Eigen::MatrixXcd PE;  ///< V^{-1} diag(E)^{-1}
};

/// Empty when the eigenvectors are too ill-conditioned for the rounding to stay below the tolerances.
inline std::optional<ModalForm> modal_form(const Eigen::VectorXd& E, const Eigen::MatrixXd& M, double max_cond = 1e6) {
  const Eigen::MatrixXd S = E.cwiseInverse().asDiagonal() * M;
  if (!S.allFinite()) return std::nullopt;
  Eigen::EigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) return std::nullopt;
  ModalForm mf;
  mf.lambda = es.eigenvalues();
  mf.V = es.eigenvectors();
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(mf.V).singularValues();
  if (!(sv(sv.size() - 1) > 0.0) || sv(0) / sv(sv.size() - 1) > max_cond) return std::nullopt;
  mf.P = mf.V.inverse();
  mf.PE = mf.P * E.cwiseInverse().cast<std::complex<double>>().asDiagonal();
  return mf;
}

/// diag(E) y' = M(s) y + f(s) on the given mesh, with the running cost integrated by the same stages.
struct LinearSystem {
  Eigen::VectorXd E;
  std::function<Eigen::MatrixXd(double)> M;
  std::function<Eigen::VectorXd(double)> f;
  std::function<double(double, const Eigen::VectorXd&)> cost;
  bool constant_M = false;
  std::optional<ModalForm> modal;  ///< set by use_modal_form when constant_M holds

  void use_modal_form() {
    if (constant_M) modal = modal_form(E, M(0.0));
  }
};

/// radau_run in the eigenbasis: each mode solves (I - h lambda a) W = w + h a g for its three stage values.
inline std::pair<Eigen::MatrixXd, double> radau_run_modal(const LinearSystem& sys, const Eigen::VectorXd& y0,
                                                         const std::vector<double>& mesh) {
  static const Radau3 tab;
  using cplx = std::complex<double>;
  const ModalForm& mf = *sys.modal;
  const Eigen::Index d = y0.size();
  Eigen::Matrix3d a;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a(r, c) = tab.a[r][c];
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(mesh.size()), d);
  Y.row(0) = y0.transpose();
  Eigen::VectorXcd w = mf.P * y0.cast<cplx>();
  Eigen::MatrixXcd G(d, 3), W(d, 3);
  Eigen::VectorXd Ys(d);
  double J = 0.0;
  for (size_t i = 0; i + 1 < mesh.size(); ++i) {
    const double s0 = mesh[i], h = mesh[i + 1] - s0;
    for (int st = 0; st < 3; ++st) G.col(st) = mf.PE * sys.f(s0 + tab.c[st] * h).cast<cplx>();
    for (Eigen::Index q = 0; q < d; ++q) {
      const Eigen::Matrix3cd Mq = Eigen::Matrix3cd::Identity() - (h * mf.lambda(q)) * a.cast<cplx>();
      const Eigen::Vector3cd rhs = Eigen::Vector3cd::Constant(w(q)) + h * (a.cast<cplx>() * G.row(q).transpose());
      W.row(q) = Mq.partialPivLu().solve(rhs).transpose();
    }
    double inc = 0.0;
    for (int st = 0; st < 3; ++st) {
      Ys = (mf.V * W.col(st)).real();
      if (sys.cost) inc += tab.a[2][st] * sys.cost(s0 + tab.c[st] * h, Ys);
    }
    w = W.col(2);
    J += h * inc;
    Y.row(static_cast<Eigen::Index>(i) + 1) = Ys.transpose();
  }
  return {Y, J};
}

/// One pass over a fixed mesh. The stage system (E - h a_ij M_i) K_j = M_i y + f_i is solved as one block.
inline std::pair<Eigen::MatrixXd, double> radau_run(const LinearSystem& sys, const Eigen::VectorXd& y0,
                                                   const std::vector<double>& mesh) {
  if (sys.constant_M && sys.modal) return radau_run_modal(sys, y0, mesh);
  static const Radau3 tab;
  const Eigen::Index d = y0.size();
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(mesh.size()), d);
  Y.row(0) = y0.transpose();
  Eigen::VectorXd y = y0;
  double J = 0.0;
  Eigen::MatrixXd Ms[3];
  if (sys.constant_M) Ms[0] = Ms[1] = Ms[2] = sys.M(mesh.front());
  Eigen::MatrixXd big(3 * d, 3 * d);
  Eigen::VectorXd rhs(3 * d), K(3 * d), Ys(d);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  double lu_h = -1.0;
  for (size_t i = 0; i + 1 < mesh.size(); ++i) {
    const double s0 = mesh[i], h = mesh[i + 1] - s0;
    if (!sys.constant_M)
      for (int st = 0; st < 3; ++st) Ms[st] = sys.M(s0 + tab.c[st] * h);
    if (!sys.constant_M || h != lu_h) {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
          auto blk = big.block(r * d, c * d, d, d);
          blk = -h * tab.a[r][c] * Ms[r];
          if (r == c) blk.diagonal() += sys.E;
        }
      lu.compute(big);
      lu_h = sys.constant_M ? h : -1.0;
    }
    for (int st = 0; st < 3; ++st) rhs.segment(st * d, d) = Ms[st] * y + sys.f(s0 + tab.c[st] * h);
    K = lu.solve(rhs);
    double inc = 0.0;
    for (int st = 0; st < 3; ++st) {
      Ys = y;
      for (int j = 0; j < 3; ++j) Ys += h * tab.a[st][j] * K.segment(j * d, d);
      if (sys.cost) inc += tab.a[2][st] * sys.cost(s0 + tab.c[st] * h, Ys);
    }
    y = Ys;  // stiffly accurate: the last stage is the step result
    J += h * inc;
    Y.row(static_cast<Eigen::Index>(i) + 1) = y.transpose();
  }
  return {Y, J};
}

/// Runs on successively halved meshes until two consecutive functionals agree; returns the finer run.
inline std::pair<std::pair<Eigen::MatrixXd, double>, std::pair<std::vector<double>, double>> richardson(
    const LinearSystem& sys, const Eigen::VectorXd& y0, std::vector<double> mesh, const IntegratorConfig& cfg,
    const std::function<double(const Eigen::MatrixXd&)>& boundary, int* refinements) {
  auto total = [&](const std::pair<Eigen::MatrixXd, double>& r) { return r.second + boundary(r.first); };
  auto coarse = radau_run(sys, y0, mesh);
  double Jc = total(coarse);
  for (int r = 0; r <= cfg.refinement_limit; ++r) {
    std::vector<double> fine_mesh = halve(mesh);
    auto fine = radau_run(sys, y0, fine_mesh);
    const double Jf = total(fine);
    // the divisor assumes order 3, not 5: stiff components lose order near the layers
    const double err = std::abs(Jf - Jc) / 7.0;
    // the functional barely sees a thin layer, so the nodal values are held to the tolerances as well, each
    // component against its largest magnitude; coarse node i is fine node 2i
    const Eigen::RowVectorXd scale = cfg.rtol * fine.first.cwiseAbs().colwise().maxCoeff().array() + cfg.atol;
    double nodal = 0.0;
    for (Eigen::Index i = 0; i < coarse.first.rows(); ++i)
      nodal = std::max(nodal, ((fine.first.row(2 * i) - coarse.first.row(i)).cwiseAbs().array() / scale.array()).maxCoeff() / 7.0);
    if (err <= cfg.rtol * std::abs(Jf) + cfg.atol && nodal <= 1.0) {
      *refinements = r;
      return {std::move(fine), {std::move(fine_mesh), err}};
    }
    mesh = std::move(fine_mesh);
    coarse = std::move(fine);
    Jc = Jf;
  }
  throw Error(ErrorCode::ToleranceNotMet, "functional did not settle after " + std::to_string(cfg.refinement_limit) +
                                              " refinements");
}

/// b, Q, R and the box at one time, evaluated once when the problem is time invariant.
class FrozenCoefficients {
 public:
  FrozenCoefficients(const SpocProblem& p, double eps) : p_(&p), eps_(eps), constant_(p.time_invariant()) { load(0.0); }

  const FrozenCoefficients& at(double t) {
    if (!constant_ && t != t_) load(t);
    return *this;
  }

  Eigen::MatrixXd b, Q;
  Eigen::VectorXd R, lo, hi;

 private:
  void load(double t) {
    t_ = t;
    b = p_->b(t, eps_);
    Q = p_->Q(t, eps_);
    R = p_->Rdiag(t, eps_);
    lo = p_->lower(t);
    hi = p_->upper(t);
  }

  const SpocProblem* p_;
  double eps_;
  bool constant_;
  double t_ = 0.0;
};

}  // namespace detail

/// Geometric nodes resolving one boundary layer, measured from the boundary: they start at a fraction of the
/// fastest time scale eps/|lambda| and grow until the slowest decay e^{-k t/eps} is spent.
inline std::vector<double> layer_offsets(const SpocProblem& p, double eps, double t_edge, const IntegratorConfig& cfg) {
  const Eigen::MatrixXd A22 = p.A22.eval(t_edge, eps);
  const double k = -detail::spectral_abscissa(A22);
  const Eigen::VectorXcd ev = A22.eigenvalues();
  const double radius = ev.cwiseAbs().maxCoeff();
  std::vector<double> out;
  if (!(k > 0.0) || !(radius > 0.0)) return out;
  const double width = std::min(p.T / 4.0, cfg.layer_decay_lengths * eps / k);
  for (double x = cfg.layer_first_step * eps / radius; x < width; x *= cfg.layer_ratio) out.push_back(x);
  out.push_back(width);
  return out;
}

/// Mesh used by the bound integrations: a uniform base, geometric layer meshes at both ends, and every
/// breakpoint of the channel.
inline std::vector<double> integration_mesh(const SpocProblem& p, double eps, const Channel& ch,
                                            const IntegratorConfig& cfg) {
  std::vector<double> extra;
  if (eps < p.T / 100.0) {
    for (double x : layer_offsets(p, eps, 0.0, cfg)) extra.push_back(x);
    for (double x : layer_offsets(p, eps, p.T, cfg)) extra.push_back(p.T - x);
  }
  for (double x : ch.t)
    if (x > 0.0 && x < p.T) extra.push_back(x);
  return merge_meshes(uniform_mesh(p.T, std::max(1, cfg.base_intervals)).t, extra);
}

/// State of I^eps z' = A z + I^eps b u, z(0) = z0, under a piecewise-linear control, and J^P along it.
inline IntegrationResult integrate_forward(const SpocProblem& p, double eps, const Channel& u,
                                           const Eigen::VectorXd& z0, const IntegratorConfig& cfg = {}) {
  cfg.check();
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps must be positive");
  if (u.dim() != p.k) throw Error(ErrorCode::DimensionMismatch, "control channel has the wrong width");
  const Eigen::VectorXd Ie = p.Ieps(eps);
  detail::LinearSystem sys;
  sys.E = Ie;
  sys.constant_M = p.A11.time_invariant() && p.A12.time_invariant() && p.A21.time_invariant() && p.A22.time_invariant();
  sys.M = [&](double t) { return p.A(t, eps); };
  sys.use_modal_form();
  detail::FrozenCoefficients co(p, eps);
  sys.f = [&](double t) { return Eigen::VectorXd(Ie.cwiseProduct(co.at(t).b * u.at(t))); };
  sys.cost = [&](double t, const Eigen::VectorXd& z) {
    const Eigen::VectorXd ut = u.at(t);
    const auto& c = co.at(t);
    return 0.5 * (z.dot(c.Q * z) + ut.dot(c.R.cwiseProduct(ut)));
  };
  const Eigen::MatrixXd Pi = p.pi(eps);
  auto terminal = [&](const Eigen::MatrixXd& Z) {
    const Eigen::VectorXd zT = Z.bottomRows(1).transpose();
    return 0.5 * zT.dot(Pi * zT);
  };
  IntegrationResult out;
  auto [run, info] = detail::richardson(sys, z0, integration_mesh(p, eps, u, cfg), cfg, terminal, &out.refinements);
  out.traj.t = std::move(info.first);
  out.functional = run.second + terminal(run.first);
  out.error = info.second;
  out.traj.set("z", run.first);
  out.traj.set("u", u.resampled(out.traj.t).v);
  return out;
}

/// gamma from I^eps gamma' = -A' gamma + rho, gamma(T) = gammaT, integrated in reversed time w = T - t
/// where the fast block is stable; also returns J^D along (rho, gamma).
inline IntegrationResult integrate_dual_backward(const SpocProblem& p, double eps, const Channel& rho,
                                                 const Eigen::VectorXd& gammaT, const IntegratorConfig& cfg = {}) {
  cfg.check();
  const DualProblem dp(p, eps);
  const double T = p.T;
  detail::LinearSystem sys;
  sys.E = p.Ieps(eps);
  sys.constant_M = p.A11.time_invariant() && p.A12.time_invariant() && p.A21.time_invariant() && p.A22.time_invariant();
  sys.M = [&](double w) { return Eigen::MatrixXd(p.A(T - w, eps).transpose()); };
  sys.use_modal_form();
  detail::FrozenCoefficients co(p, eps);
  const Eigen::VectorXd Ie = sys.E;
  sys.f = [&](double w) { return Eigen::VectorXd(-rho.at(T - w)); };
  // dp.integrand, with the coefficients looked up once
  sys.cost = [&](double w, const Eigen::VectorXd& g) {
    const Eigen::VectorXd r = rho.at(T - w);
    const auto& c = co.at(T - w);
    return -0.5 * r.dot(dp.Qinv(T - w, r)) - theta_of_s(c.b.transpose() * Ie.cwiseProduct(g), c.R, c.lo, c.hi);
  };
  auto boundary = [&](const Eigen::MatrixXd& G) {
    return dp.boundary_terms(G.bottomRows(1).transpose(), G.row(0).transpose());
  };
  std::vector<double> mesh = integration_mesh(p, eps, rho, cfg);
  std::vector<double> wmesh(mesh.size());
  for (size_t i = 0; i < mesh.size(); ++i) wmesh[i] = T - mesh[mesh.size() - 1 - i];
  wmesh.front() = 0.0;
  IntegrationResult out;
  auto [run, info] = detail::richardson(sys, gammaT, wmesh, cfg, boundary, &out.refinements);
  out.functional = run.second + boundary(run.first);
  out.error = info.second;
  const std::vector<double>& wm = info.first;
  out.traj.t.resize(wm.size());
  Eigen::MatrixXd G(run.first.rows(), run.first.cols());
  for (size_t i = 0; i < wm.size(); ++i) {
    out.traj.t[i] = T - wm[wm.size() - 1 - i];
    G.row(static_cast<Eigen::Index>(i)) = run.first.row(static_cast<Eigen::Index>(wm.size() - 1 - i));
  }
  out.traj.t.front() = 0.0;
  out.traj.t.back() = T;
  out.traj.set("gamma", G);
  out.traj.set("rho", rho.resampled(out.traj.t).v);
  return out;
}

namespace detail {

/// Simpson rule per interval on the piecewise-linear interpolants; exact for constant weights.
template <class F>
double simpson(const std::vector<double>& t, F&& integrand) {
  double s = 0.0;
  for (size_t i = 0; i + 1 < t.size(); ++i) {
    const double a = t[i], b = t[i + 1], m = 0.5 * (a + b);
    s += (b - a) / 6.0 * (integrand(a) + 4.0 * integrand(m) + integrand(b));
  }
  return s;
}

}  // namespace detail

/// J^P of nodal channels sharing one mesh.
inline double primal_functional(const Channel& z, const Channel& u, double eps, const SpocProblem& p) {
  if (z.t != u.t) throw Error(ErrorCode::MeshMismatch, "z and u live on different meshes");
  if (z.t.empty()) throw Error(ErrorCode::MeshMismatch, "empty channel");
  const double run = detail::simpson(z.t, [&](double t) {
    const Eigen::VectorXd zt = z.at(t), ut = u.at(t);
    return 0.5 * (zt.dot(p.Q(t, eps) * zt) + ut.dot(p.Rdiag(t, eps).cwiseProduct(ut)));
  });
  const Eigen::VectorXd zT = z.v.bottomRows(1).transpose();
  return run + 0.5 * zT.dot(p.pi(eps) * zT);
}

/// J^D of nodal channels sharing one mesh.
inline double dual_functional(const Channel& rho, const Channel& gamma, double eps, const SpocProblem& p) {
  if (rho.t != gamma.t) throw Error(ErrorCode::MeshMismatch, "rho and gamma live on different meshes");
  if (rho.t.empty()) throw Error(ErrorCode::MeshMismatch, "empty channel");
  const DualProblem dp(p, eps);
  const double run = detail::simpson(rho.t, [&](double t) { return dp.integrand(t, rho.at(t), gamma.at(t)); });
  return run + dp.boundary_terms(gamma.v.row(0).transpose(), gamma.v.bottomRows(1).transpose());
}

}  // namespace spoc
