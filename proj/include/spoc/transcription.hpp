#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <chrono>
#include <cmath>
#include <functional>
#include <vector>

#include "block_tridiag.hpp"
#include "dual_model.hpp"
#include "mesh.hpp"
#include "qp.hpp"
#include "reduction.hpp"

namespace spoc {

/// Generic LQ data  diag(Ie) z' = A z + diag(Ie) b u  with box-constrained u, shared by the full and reduced problems.
struct LqModel {
  int d = 0;
  int k = 0;
  double T = 1.0;
  Eigen::VectorXd Ie;
  std::function<Eigen::MatrixXd(double)> A, b, Q;
  std::function<Eigen::VectorXd(double)> R, lo, hi;
  Eigen::MatrixXd Pi;       ///< full terminal weight
  Eigen::MatrixXd PiChi;    ///< maps z(T) to the costate chi(T)
  Eigen::VectorXd z0;
};

inline LqModel lq_model(const SpocProblem& p, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps must be positive; use the reduced problem for eps = 0");
  LqModel m;
  m.d = p.dim();
  m.k = p.k;
  m.T = p.T;
  m.Ie = p.Ieps(eps);
  const SpocProblem* pp = &p;
  m.A = [pp, eps](double t) { return pp->A(t, eps); };
  m.b = [pp, eps](double t) { return pp->b(t, eps); };
  m.Q = [pp, eps](double t) { return pp->Q(t, eps); };
  m.R = [pp, eps](double t) { return pp->Rdiag(t, eps); };
  m.lo = [pp](double t) { return pp->lower(t); };
  m.hi = [pp](double t) { return pp->upper(t); };
  m.Pi = p.pi(eps);
  m.PiChi = p.pi_unscaled(eps);
  m.z0 = p.z0;
  return m;
}

inline LqModel lq_model(const ReducedProblem& rp) {
  LqModel m;
  m.d = rp.m();
  m.k = rp.k();
  m.T = rp.T();
  m.Ie = Eigen::VectorXd::Ones(rp.m());
  const ReducedProblem* r = &rp;
  m.A = [r](double t) { return r->Acal(t); };
  m.b = [r](double t) { return r->b10(t); };
  m.Q = [r](double t) { return r->Qcal(t); };
  m.R = [r](double t) { return r->R0(t); };
  m.lo = [r](double t) { return r->lower(t); };
  m.hi = [r](double t) { return r->upper(t); };
  m.Pi = rp.pi110();
  m.PiChi = m.Pi;
  m.z0 = rp.x0();
  return m;
}

/// Layer grading for p: the default width, or eps ln(1/eps) / k when the fast decay rate k = -max Re eig A22^0
/// (over both ends) is below 1/c.
inline GradingConfig grading_for(const SpocProblem& p, GradingConfig g = {}) {
  const double k = std::min(-detail::spectral_abscissa(p.A22.leading(0.0)), -detail::spectral_abscissa(p.A22.leading(p.T)));
  // widen the default layer only when its slowest mode has not decayed by a factor eps inside it
  g.rate = k > 0.0 ? std::min(1.0, g.c * k) : 1.0;
  return g;
}

/// Trapezoidal transcription: variables (z_i, u_i) at every node, interval rows scaled by 1/h.
struct PrimalProgram {
  LqModel model;
  std::vector<double> t;
  std::vector<double> h;  ///< h[k] = t[k] - t[k-1], with h[0] = 0
  std::vector<double> w;  ///< trapezoid weights
  SparseQp qp;

  int nodes() const { return static_cast<int>(t.size()); }
  int block() const { return model.d + model.k; }
};

inline std::vector<double> trapezoid_weights(const std::vector<double>& t) {
  std::vector<double> w(t.size(), 0.0);
  for (size_t i = 1; i < t.size(); ++i) {
    const double h = t[i] - t[i - 1];
    w[i - 1] += 0.5 * h;
    w[i] += 0.5 * h;
  }
  return w;
}

inline PrimalProgram transcribe(const LqModel& model, const std::vector<double>& mesh) {
  if (mesh.size() < 2) throw Error(ErrorCode::MeshMismatch, "mesh needs at least two nodes");
  PrimalProgram P;
  P.model = model;
  P.t = mesh;
  const int N = P.nodes() - 1, d = model.d, k = model.k, s = d + k;
  P.h.assign(mesh.size(), 0.0);
  for (int i = 1; i <= N; ++i) {
    P.h[static_cast<size_t>(i)] = mesh[static_cast<size_t>(i)] - mesh[static_cast<size_t>(i) - 1];
    if (!(P.h[static_cast<size_t>(i)] > 0.0)) throw Error(ErrorCode::MeshMismatch, "mesh not strictly increasing");
  }
  P.w = trapezoid_weights(mesh);

  std::vector<Eigen::MatrixXd> A(mesh.size()), Bu(mesh.size());
  std::vector<Eigen::Triplet<double>> ht, et;
  const Eigen::Index nvar = static_cast<Eigen::Index>(N + 1) * s;
  P.qp.c = Eigen::VectorXd::Zero(nvar);
  P.qp.lo = Eigen::VectorXd::Constant(nvar, -std::numeric_limits<double>::infinity());
  P.qp.hi = Eigen::VectorXd::Constant(nvar, std::numeric_limits<double>::infinity());
  for (int i = 0; i <= N; ++i) {
    const double ti = mesh[static_cast<size_t>(i)], wi = P.w[static_cast<size_t>(i)];
    A[static_cast<size_t>(i)] = model.A(ti);
    Bu[static_cast<size_t>(i)] = model.Ie.asDiagonal() * model.b(ti);
    Eigen::MatrixXd Hz = wi * model.Q(ti);
    if (i == N) Hz += model.Pi;
    const int o = i * s;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        if (Hz(r, c) != 0.0) ht.emplace_back(o + r, o + c, Hz(r, c));
    const Eigen::VectorXd R = model.R(ti), lo = model.lo(ti), hi = model.hi(ti);
    for (int j = 0; j < k; ++j) {
      ht.emplace_back(o + d + j, o + d + j, wi * R(j));
      P.qp.lo(o + d + j) = lo(j);
      P.qp.hi(o + d + j) = hi(j);
    }
  }
  // rows 0..d-1: z_0 = z0; rows k*d..: interval k
  for (int r = 0; r < d; ++r) et.emplace_back(r, r, 1.0);
  for (int kk = 1; kk <= N; ++kk) {
    const double hk = P.h[static_cast<size_t>(kk)];
    const int row = kk * d, oa = (kk - 1) * s, ob = kk * s;
    const Eigen::MatrixXd& Aa = A[static_cast<size_t>(kk) - 1];
    const Eigen::MatrixXd& Ab = A[static_cast<size_t>(kk)];
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) {
        double va = -0.5 * Aa(r, c), vb = -0.5 * Ab(r, c);
        if (r == c) {
          va -= model.Ie(r) / hk;
          vb += model.Ie(r) / hk;
        }
        if (va != 0.0) et.emplace_back(row + r, oa + c, va);
        if (vb != 0.0) et.emplace_back(row + r, ob + c, vb);
      }
      for (int j = 0; j < k; ++j) {
        const double va = -0.5 * Bu[static_cast<size_t>(kk) - 1](r, j), vb = -0.5 * Bu[static_cast<size_t>(kk)](r, j);
        if (va != 0.0) et.emplace_back(row + r, oa + d + j, va);
        if (vb != 0.0) et.emplace_back(row + r, ob + d + j, vb);
      }
    }
  }
  P.qp.H.resize(nvar, nvar);
  P.qp.H.setFromTriplets(ht.begin(), ht.end());
  P.qp.E.resize(static_cast<Eigen::Index>(N + 1) * d, nvar);
  P.qp.E.setFromTriplets(et.begin(), et.end());
  P.qp.e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N + 1) * d);
  P.qp.e.head(d) = model.z0;
  return P;
}

/// Full problem at eps > 0 on the given mesh.
inline PrimalProgram transcribe_primal(const SpocProblem& p, double eps, const Mesh& mesh) {
  return transcribe(lq_model(p, eps), mesh.t);
}

/// Reduced problem on the given mesh.
inline PrimalProgram transcribe_reduced(const ReducedProblem& rp, const Mesh& mesh) {
  return transcribe(lq_model(rp), mesh.t);
}

struct SolveResult {
  SolveStatus status = SolveStatus::MaxIter;
  double objective = 0.0;
  Trajectory traj;           ///< z, u, and for primal-type programs chi and gamma_bar
  double stationarity = 0.0;
  double feasibility = 0.0;
  int iterations = 0;
  double wall_time = 0.0;
  Eigen::MatrixXd interval_multipliers;  ///< row k: multiplier of interval k (row 0: initial condition)
  QpResult raw;
};

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 200;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Nodal costate from the dynamics multipliers. Interior nodes carry minus the weighted multiplier average
/// (the value the PMP clamp uses); the first node extrapolates linearly from the first two interval midpoints;
/// the last node carries the terminal condition blockdiag(pi11, pi22) z(T).
inline Eigen::MatrixXd extract_costate(const SolveResult& r, const PrimalProgram& P) {
  if (r.interval_multipliers.rows() != P.nodes() || r.interval_multipliers.cols() != P.model.d)
    throw Error(ErrorCode::MissingMultipliers, "solve result carries no dynamics multipliers");
  const int N = P.nodes() - 1;
  const Eigen::MatrixXd& y = r.interval_multipliers;
  Eigen::MatrixXd chi(N + 1, P.model.d);
  for (int i = 0; i < N; ++i) {
    const double hi = P.h[static_cast<size_t>(i)], hn = P.h[static_cast<size_t>(i) + 1];
    const double wi = P.w[static_cast<size_t>(i)];
    Eigen::VectorXd ybar = (hn / (2.0 * wi)) * y.row(i + 1).transpose();
    if (i > 0) ybar += (hi / (2.0 * wi)) * y.row(i).transpose();
    chi.row(i) = -ybar.transpose();
  }
  if (N >= 2) {
    // midpoints sit at h1/2 and h1 + h2/2 from t0
    const double h1 = P.h[1], h2 = P.h[2];
    const double c = h1 / (h1 + h2);
    chi.row(0) = -((1.0 + c) * y.row(1) - c * y.row(2));
  }
  chi.row(N) = (P.model.PiChi * r.traj.get("z").row(N).transpose()).transpose();
  return chi;
}

inline SolveResult solve(const PrimalProgram& P, const SolveOptions& opt = {}, const QpResult* warm = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  QpOptions qo;
  qo.tol = opt.tol;
  qo.max_iter = opt.max_iter;
  SolveResult out;
  out.raw = solve_qp(P.qp, qo, warm);
  out.wall_time = detail::seconds_since(t0);
  out.status = out.raw.status;
  out.objective = out.raw.objective;
  out.stationarity = out.raw.stationarity;
  out.feasibility = out.raw.feasibility;
  out.iterations = out.raw.iterations;

  const int N = P.nodes() - 1, d = P.model.d, k = P.model.k, s = d + k;
  Eigen::MatrixXd z(N + 1, d), u(N + 1, k), y(N + 1, d);
  for (int i = 0; i <= N; ++i) {
    z.row(i) = out.raw.x.segment(i * s, d).transpose();
    u.row(i) = out.raw.x.segment(i * s + d, k).transpose();
    const double scale = i == 0 ? 1.0 : 1.0 / P.h[static_cast<size_t>(i)];
    y.row(i) = scale * out.raw.y.segment(i * d, d).transpose();
  }
  out.interval_multipliers = y;
  out.traj.t = P.t;
  out.traj.set("z", z);
  out.traj.set("u", u);
  const Eigen::MatrixXd chi = extract_costate(out, P);
  out.traj.set("chi", chi);
  return out;
}

/// Exact Lagrange dual of the trapezoidal primal, in staggered unknowns
///   block 0 = nu = I^eps gamma(0),  block k = gamma on interval k (k = 1..N),  block N+1 = gamma(T).
/// rho is eliminated: w_i rho_i = I^eps (g_{i+1} - g_i) + A_i' (h_i g_i + h_{i+1} g_{i+1}) / 2.
struct DualProgram {
  const SpocProblem* p = nullptr;
  double eps = 0.0;
  std::vector<double> t, h, w;
  int d = 0, k = 0;
  Eigen::VectorXd Ie, z0;
  Eigen::MatrixXd P;  ///< terminal weight on gamma(T)
  std::vector<Eigen::MatrixXd> Ma, Mb, Winv, Bt;  // per node
  std::vector<double> ga, gb;
  std::vector<Eigen::VectorXd> R, lo, hi;

  int nodes() const { return static_cast<int>(t.size()); }
  Eigen::Index size() const { return static_cast<Eigen::Index>(t.size() + 1) * d; }

  Eigen::VectorXd L(int i, const Eigen::VectorXd& g) const {
    return Ma[static_cast<size_t>(i)] * g.segment(i * d, d) + Mb[static_cast<size_t>(i)] * g.segment((i + 1) * d, d);
  }
  Eigen::VectorXd gbar(int i, const Eigen::VectorXd& g) const {
    return ga[static_cast<size_t>(i)] * g.segment(i * d, d) + gb[static_cast<size_t>(i)] * g.segment((i + 1) * d, d);
  }

  double objective(const Eigen::VectorXd& g) const {
    double f = 0.0;
    for (int i = 0; i < nodes(); ++i) {
      const auto si = static_cast<size_t>(i);
      const Eigen::VectorXd Li = L(i, g);
      const Eigen::VectorXd s = Bt[si].transpose() * gbar(i, g);
      f += -0.5 * Li.dot(Winv[si] * Li) - w[si] * theta_of_s(s, R[si], lo[si], hi[si]);
    }
    const Eigen::VectorXd gT = g.tail(d);
    return f - g.head(d).dot(z0) - 0.5 * gT.dot(P * gT);
  }

  /// Gradient of the objective and the generalized Hessian of its negative.
  Eigen::VectorXd gradient(const Eigen::VectorXd& g, BlockTridiag* H) const {
    Eigen::VectorXd G = Eigen::VectorXd::Zero(size());
    if (H) H->resize(t.size() + 1, d);
    for (int i = 0; i < nodes(); ++i) {
      const auto si = static_cast<size_t>(i);
      const Eigen::VectorXd WL = Winv[si] * L(i, g);
      const Eigen::VectorXd s = Bt[si].transpose() * gbar(i, g);
      Eigen::VectorXd xi(k), D(k);
      for (int j = 0; j < k; ++j) {
        const double v = s(j) / R[si](j);
        if (v < lo[si](j)) { xi(j) = lo[si](j); D(j) = 0.0; }
        else if (v > hi[si](j)) { xi(j) = hi[si](j); D(j) = 0.0; }
        else { xi(j) = v; D(j) = 1.0 / R[si](j); }
      }
      const Eigen::VectorXd Bxi = w[si] * (Bt[si] * xi);
      G.segment(i * d, d) -= Ma[si].transpose() * WL + ga[si] * Bxi;
      G.segment((i + 1) * d, d) -= Mb[si].transpose() * WL + gb[si] * Bxi;
      if (H) {
        const Eigen::MatrixXd WMa = Winv[si] * Ma[si], WMb = Winv[si] * Mb[si];
        const Eigen::MatrixXd T = w[si] * Bt[si] * D.asDiagonal() * Bt[si].transpose();
        H->D[si] += Ma[si].transpose() * WMa + ga[si] * ga[si] * T;
        H->D[si + 1] += Mb[si].transpose() * WMb + gb[si] * gb[si] * T;
        H->B[si] += Ma[si].transpose() * WMb + ga[si] * gb[si] * T;
      }
    }
    G.head(d) -= z0;
    G.tail(d) -= P * g.tail(d);
    if (H) H->D.back() += P;
    return G;
  }
};

inline DualProgram transcribe_dual(const DualProblem& dp, const Mesh& mesh) {
  const SpocProblem& p = dp.problem();
  const double eps = dp.eps();
  DualProgram D;
  D.p = &p;
  D.eps = eps;
  D.t = mesh.t;
  D.d = p.dim();
  D.k = p.k;
  D.Ie = p.Ieps(eps);
  D.z0 = p.z0;
  D.P = dp.terminal_weight();
  const int N = static_cast<int>(mesh.t.size()) - 1;
  if (N < 1) throw Error(ErrorCode::MeshMismatch, "mesh needs at least two nodes");
  D.h.assign(mesh.t.size() + 1, 0.0);  // h[0] = h[N+1] = 0
  for (int i = 1; i <= N; ++i) D.h[static_cast<size_t>(i)] = mesh.t[static_cast<size_t>(i)] - mesh.t[static_cast<size_t>(i) - 1];
  D.w = trapezoid_weights(mesh.t);
  const Eigen::MatrixXd Id = Eigen::MatrixXd::Identity(D.d, D.d);
  const Eigen::MatrixXd Ie = D.Ie.asDiagonal();
  for (int i = 0; i <= N; ++i) {
    const auto si = static_cast<size_t>(i);
    const double ti = mesh.t[si], wi = D.w[si], hl = D.h[si], hr = D.h[si + 1];
    const Eigen::MatrixXd AT = p.A(ti, eps).transpose();
    D.Ma.push_back(i == 0 ? Eigen::MatrixXd(-Id) : Eigen::MatrixXd(-Ie + 0.5 * hl * AT));
    D.Mb.push_back(Ie + 0.5 * hr * AT);
    Eigen::LLT<Eigen::MatrixXd> q(p.Q(ti, eps));
    if (q.info() != Eigen::Success) throw Error(ErrorCode::SingularData, "Q is not positive definite");
    D.Winv.push_back(q.solve(Id) / wi);
    D.Bt.push_back(Ie * p.b(ti, eps));
    D.ga.push_back(hl / (2.0 * wi));
    D.gb.push_back(hr / (2.0 * wi));
    D.R.push_back(p.Rdiag(ti, eps));
    D.lo.push_back(p.lower(ti));
    D.hi.push_back(p.upper(ti));
  }
  return D;
}

struct DualSolveResult {
  SolveStatus status = SolveStatus::MaxIter;
  double objective = 0.0;
  Trajectory traj;  ///< gamma (nodal average), rho, xi
  double gradient_norm = 0.0;
  int iterations = 0;
  double wall_time = 0.0;
  Eigen::VectorXd g;       ///< staggered unknowns
  Eigen::VectorXd gammaT;  ///< terminal dual value
  Eigen::VectorXd nu;      ///< I^eps gamma(0)
};

/// Damped semismooth Newton on the concave dual; stops when |grad|_inf <= tol * max(1, |f|).
inline DualSolveResult solve(const DualProgram& D, const SolveOptions& opt = {}, const Eigen::VectorXd* warm = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  DualSolveResult out;
  Eigen::VectorXd g = (warm && warm->size() == D.size()) ? *warm : Eigen::VectorXd::Zero(D.size());
  double f = D.objective(g);
  BlockTridiag H;
  BlockTridiagSolver solver;
  int it = 0;
  double gnorm = 0.0;
  for (;; ++it) {
    const Eigen::VectorXd G = D.gradient(g, &H);
    gnorm = G.lpNorm<Eigen::Infinity>();
    if (gnorm <= opt.tol * std::max(1.0, std::abs(f))) {
      out.status = SolveStatus::Converged;
      break;
    }
    if (it >= opt.max_iter) break;
    if (!solver.factor(H)) {
      // the Hessian is positive definite in exact arithmetic; nudge the diagonal if rounding says otherwise
      double shift = 1e-14;
      for (auto& Dj : H.D) shift = std::max(shift, 1e-14 * Dj.diagonal().cwiseAbs().maxCoeff());
      for (auto& Dj : H.D) Dj.diagonal().array() += shift;
      if (!solver.factor(H)) break;
    }
    const Eigen::VectorXd step = solver.solve(G);
    const double slope = G.dot(step);
    double a = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, a *= 0.5) {
      const Eigen::VectorXd trial = g + a * step;
      const double ft = D.objective(trial);
      if (ft >= f + 1e-4 * a * slope) {
        moved = ft > f || a == 1.0;
        g = trial;
        f = ft;
        break;
      }
    }
    if (!moved) {
      // line search stalled at rounding level; accept the point if the gradient is small in relative terms
      if (gnorm <= std::sqrt(opt.tol) * std::max(1.0, std::abs(f))) out.status = SolveStatus::Converged;
      break;
    }
  }
  out.iterations = it;
  out.gradient_norm = gnorm;
  out.objective = f;
  out.g = g;
  out.wall_time = detail::seconds_since(t0);

  const int N = D.nodes() - 1, d = D.d;
  out.nu = g.head(d);
  out.gammaT = g.tail(d);
  Eigen::MatrixXd gamma(N + 1, d), rho(N + 1, d), xi(N + 1, D.k);
  for (int i = 0; i <= N; ++i) {
    const auto si = static_cast<size_t>(i);
    const Eigen::VectorXd gb = D.gbar(i, g);
    gamma.row(i) = gb.transpose();
    rho.row(i) = (D.L(i, g) / D.w[si]).transpose();
    const Eigen::VectorXd s = (D.Bt[si].transpose() * gb).cwiseQuotient(D.R[si]);
    for (int j = 0; j < D.k; ++j) xi(i, j) = std::min(std::max(s(j), D.lo[si](j)), D.hi[si](j));
  }
  out.traj.t = D.t;
  out.traj.set("gamma", gamma);
  out.traj.set("rho", rho);
  out.traj.set("xi", xi);
  return out;
}

/// Largest residual of the outer system (slow dynamics, slow adjoint, two algebraic lines) assembled from a
/// reduced solve with the fast channels recovered pointwise. Differential lines use the transcription's
/// discrete forms; the adjoint line is checked at interior nodes.
inline double outer_system_residual(const ReducedProblem& rp, const PrimalProgram& P, const SolveResult& r) {
  const SpocProblem& p = rp.parent();
  const int N = P.nodes() - 1, m = p.m;
  const Eigen::MatrixXd& x = r.traj.get("z");
  const Eigen::MatrixXd& u = r.traj.get("u");
  const Eigen::MatrixXd& chi = r.traj.get("chi");
  const Eigen::MatrixXd& y = r.interval_multipliers;
  std::vector<Eigen::VectorXd> z2o(static_cast<size_t>(N) + 1), chi2o(static_cast<size_t>(N) + 1);
  double worst = 0.0;
  for (int i = 0; i <= N; ++i) {
    const double ti = P.t[static_cast<size_t>(i)];
    auto [a, b] = recover_fast_outer(rp, p, x.row(i).transpose(), chi.row(i).transpose(), ti);
    z2o[static_cast<size_t>(i)] = a;
    chi2o[static_cast<size_t>(i)] = b;
    const Eigen::VectorXd alg1 = p.A21.leading(ti) * x.row(i).transpose() + p.A22.leading(ti) * a;
    const Eigen::VectorXd alg2 = -p.A12.leading(ti).transpose() * chi.row(i).transpose() -
                                 p.A22.leading(ti).transpose() * b - p.Q21.leading(ti) * x.row(i).transpose() -
                                 p.Q22.leading(ti) * a;
    worst = std::max({worst, alg1.lpNorm<Eigen::Infinity>(), alg2.lpNorm<Eigen::Infinity>()});
  }
  auto slow_rhs = [&](int i) {
    const double ti = P.t[static_cast<size_t>(i)];
    return Eigen::VectorXd(p.A11.leading(ti) * x.row(i).transpose() + p.A12.leading(ti) * z2o[static_cast<size_t>(i)] +
                           p.b1.leading(ti) * u.row(i).transpose());
  };
  for (int kk = 1; kk <= N; ++kk) {
    const double hk = P.h[static_cast<size_t>(kk)];
    const Eigen::VectorXd r1 = (x.row(kk) - x.row(kk - 1)).transpose() / hk - 0.5 * (slow_rhs(kk - 1) + slow_rhs(kk));
    worst = std::max(worst, r1.lpNorm<Eigen::Infinity>());
  }
  for (int i = 1; i < N; ++i) {
    const double ti = P.t[static_cast<size_t>(i)], wi = P.w[static_cast<size_t>(i)];
    const Eigen::VectorXd dchi = -(y.row(i + 1) - y.row(i)).transpose() / wi;
    const Eigen::VectorXd c1 = chi.row(i).transpose();
    const Eigen::VectorXd rhs = -p.A11.leading(ti).transpose() * c1 - p.A21.leading(ti).transpose() * chi2o[static_cast<size_t>(i)] -
                                p.Q11.leading(ti) * x.row(i).transpose() - p.Q12.leading(ti) * z2o[static_cast<size_t>(i)];
    worst = std::max(worst, (dchi - rhs).lpNorm<Eigen::Infinity>());
  }
  (void)m;
  return worst;
}

}  // namespace spoc
