#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ode.hpp"
#include "reduction.hpp"
#include "transcription.hpp"

namespace spoc {

struct BoundsOptions {
  bool solve_primal = true;
  bool solve_dual = true;
  int nodes = 400;          ///< transcription nodes for the reduced, primal and dual programs
  double tol_solve = 1e-8;
  IntegratorConfig ode{};
  GradingConfig grading{};  ///< transcription mesh; the rate is filled in from the problem
};

struct BoundsRow {
  double eps = 0.0;
  double V_reduced = 0.0;
  std::optional<double> V_primal;   ///< J^P at the transcribed optimal control
  std::optional<double> V_dual;     ///< J^D at the pair built from the transcribed dual's control
  std::optional<double> V_primal_discrete;
  std::optional<double> V_dual_discrete;
  std::optional<double> chi_upper, chi_lower, gap, C;
  std::optional<double> violation_up, violation_low;
  std::optional<double> u_distance;  ///< max |u(eps) - ubar| over the primal nodes
  double error_upper = 0.0, error_lower = 0.0;  ///< integrator estimates
  double t_reduced = 0.0, t_bounds = 0.0;
  std::optional<double> t_primal, t_dual;  ///< empty when that program was not solved
  std::string status = "ok";

  bool ok() const { return status == "ok" || status == "flagged"; }

  /// 10 (solver tolerance + integrator estimates), the slack allowed in the sandwich.
  double delta(double tol_solve = 1e-8) const { return 10.0 * (tol_solve + error_upper + error_lower); }
};

struct BoundsReport {
  std::string problem;
  double V_reduced = 0.0;
  std::vector<BoundsRow> rows;   ///< descending eps
  std::optional<double> slope;   ///< log-log slope of gap vs eps
  std::optional<double> C;
};

struct UpperBound {
  double chi_u = 0.0;
  IntegrationResult zhat;
};

struct LowerBound {
  double chi_l = 0.0;
  IntegrationResult gamma_hat;
  Channel rho;
};

/// J^P at a feasible control: an upper bound on V^P(eps).
inline UpperBound upper_bound(const SpocProblem& p, double eps, const Channel& ubar, const IntegratorConfig& cfg = {}) {
  UpperBound out;
  out.zhat = integrate_forward(p, eps, ubar, p.z0, cfg);
  out.chi_u = out.zhat.functional;
  return out;
}

/// J^D at rho = Q zhat with gamma integrated back from gamma(T) = -blockdiag(pi11, pi22) zhat(T).
inline LowerBound lower_bound(const SpocProblem& p, double eps, const Trajectory& zhat, const IntegratorConfig& cfg = {}) {
  LowerBound out;
  const Eigen::MatrixXd& z = zhat.get("z");
  out.rho.t = zhat.t;
  out.rho.v.resize(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    out.rho.v.row(i) = (p.Q(zhat.t[static_cast<size_t>(i)], eps) * z.row(i).transpose()).transpose();
  const Eigen::VectorXd gT = -p.pi_unscaled(eps) * z.bottomRows(1).transpose();
  out.gamma_hat = integrate_dual_backward(p, eps, out.rho, gT, cfg);
  out.chi_l = out.gamma_hat.functional;
  return out;
}

/// |chi_u - chi_l| / (eps |V_reduced|) at the smallest-eps row that has both bounds.
inline double error_constant(const std::vector<BoundsRow>& rows, double V_reduced) {
  if (!(std::abs(V_reduced) > 1e-12)) throw Error(ErrorCode::DegenerateReduced, "reduced value is too close to zero");
  const BoundsRow* best = nullptr;
  for (const auto& r : rows)
    if (r.gap && (!best || r.eps < best->eps)) best = &r;
  if (!best || best->eps > 1e-4) throw Error(ErrorCode::InvalidArgument, "error constant needs a row with eps <= 1e-4");
  return std::abs(*best->gap) / (best->eps * std::abs(V_reduced));
}

/// Least-squares slope of log(y) against log(x); nullopt with fewer than two points.
inline std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
    ++n;
  }
  if (n < 2) return std::nullopt;
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

/// Reduced optimum on a uniform mesh; its control is carried to every eps.
struct ReducedSolve {
  ReducedProblem rp;
  PrimalProgram program;
  SolveResult result;
};

inline ReducedSolve solve_reduced(const SpocProblem& p, const BoundsOptions& opt) {
  ReducedSolve out{reduce(p), {}, {}};
  out.program = transcribe_reduced(out.rp, uniform_mesh(p.T, std::max(1, opt.nodes - 1)));
  out.result = solve(out.program, SolveOptions{opt.tol_solve, 200});
  return out;
}

namespace detail {

inline void fill_row(BoundsRow& row, const SpocProblem& p, const Channel& ubar, const BoundsOptions& opt) {
  const double eps = row.eps;
  auto t0 = std::chrono::steady_clock::now();
  try {
    const UpperBound up = upper_bound(p, eps, ubar, opt.ode);
    const LowerBound lo = lower_bound(p, eps, up.zhat.traj, opt.ode);
    row.t_bounds = seconds_since(t0);
    row.chi_upper = up.chi_u;
    row.chi_lower = lo.chi_l;
    row.error_upper = up.zhat.error;
    row.error_lower = lo.gamma_hat.error;
    row.gap = up.chi_u - lo.chi_l;
    if (std::abs(row.V_reduced) > 1e-12) row.C = std::abs(*row.gap) / (eps * std::abs(row.V_reduced));
    if (*row.gap < -row.delta(opt.tol_solve)) row.status = "flagged";
  } catch (const Error& e) {
    row.t_bounds = seconds_since(t0);
    row.status = std::string("bounds_") + to_string(e.code());
    return;
  }
  const GradingConfig grading = grading_for(p, opt.grading);
  const Mesh mesh = build_mesh(p.T, eps, std::max(16, opt.nodes - 1), grading);
  if (opt.solve_primal) {
    t0 = std::chrono::steady_clock::now();
    const PrimalProgram P = transcribe_primal(p, eps, mesh);
    const SolveResult r = solve(P, SolveOptions{opt.tol_solve, 200});
    row.t_primal = seconds_since(t0);
    if (r.status != SolveStatus::Converged) {
      row.status = std::string("primal_") + to_string(r.status);
    } else {
      row.V_primal_discrete = r.objective;
      const Channel uh = r.traj.channel("u");
      try {
        row.V_primal = integrate_forward(p, eps, uh, p.z0, opt.ode).functional;
      } catch (const Error&) {
        row.V_primal = r.objective;
      }
      double dist = 0.0;
      for (size_t i = 0; i < P.t.size(); ++i)
        dist = std::max(dist, (uh.v.row(static_cast<Eigen::Index>(i)).transpose() - ubar.at(P.t[i])).lpNorm<Eigen::Infinity>());
      row.u_distance = dist;
      if (row.chi_upper) {
        row.violation_up = std::max(0.0, *row.V_primal - *row.chi_upper);
        row.violation_low = std::max(0.0, *row.chi_lower - *row.V_primal);
      }
    }
  }
  if (opt.solve_dual) {
    t0 = std::chrono::steady_clock::now();
    const DualProblem dp(p, eps);
    const DualProgram D = transcribe_dual(dp, mesh);
    const DualSolveResult r = solve(D, SolveOptions{opt.tol_solve, 200});
    row.t_dual = seconds_since(t0);
    if (r.status != SolveStatus::Converged) {
      if (row.status == "ok") row.status = std::string("dual_") + to_string(r.status);
    } else {
      row.V_dual_discrete = r.objective;
      // The raw rho_h carries grid noise that -rho'Q^{-1}rho/2 penalizes, so the pair is rebuilt from the
      // dual's own control: rho = Q z(u_D). Still a feasible dual pair, with error quadratic in u_D - u*.
      const Channel uD = r.traj.channel("xi");
      try {
        const IntegrationResult zD = integrate_forward(p, eps, uD, p.z0, opt.ode);
        row.V_dual = lower_bound(p, eps, zD.traj, opt.ode).chi_l;
      } catch (const Error&) {
        row.V_dual = r.objective;
      }
    }
  }
  const double slack = row.delta(opt.tol_solve);
  if (row.status == "ok" && ((row.violation_up && *row.violation_up > slack) ||
                             (row.violation_low && *row.violation_low > slack)))
    row.status = "flagged";
}

}  // namespace detail

/// Bounds at every eps (sorted descending); the reduced problem is solved once. Row failures are recorded in
/// the row status and the sweep continues.
inline BoundsReport sweep(const SpocProblem& p, std::vector<double> eps_list, const BoundsOptions& opt = {},
                          const std::string& name = "") {
  for (double e : eps_list)
    if (!(e > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps values must be positive");
  std::sort(eps_list.begin(), eps_list.end(), std::greater<>());
  BoundsReport rep;
  rep.problem = name;
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<ReducedSolve> red;
  std::string red_status;
  try {
    red = solve_reduced(p, opt);
    if (red->result.status != SolveStatus::Converged) red_status = std::string("reduced_") + to_string(red->result.status);
  } catch (const Error& e) {
    red_status = std::string("reduced_") + to_string(e.code());
  }
  const double t_reduced = detail::seconds_since(t0);
  if (red) rep.V_reduced = red->result.objective;
  for (double eps : eps_list) {
    BoundsRow row;
    row.eps = eps;
    row.V_reduced = rep.V_reduced;
    row.t_reduced = t_reduced;
    if (!red_status.empty()) {
      row.status = red_status;
    } else {
      detail::fill_row(row, p, red->result.traj.channel("u"), opt);
    }
    rep.rows.push_back(row);
  }
  std::vector<double> xs, ys;
  for (const auto& r : rep.rows)
    if (r.gap && r.eps <= 1e-1 && *r.gap > 0.0) {
      xs.push_back(r.eps);
      ys.push_back(*r.gap);
    }
  rep.slope = loglog_slope(xs, ys);
  try {
    rep.C = error_constant(rep.rows, rep.V_reduced);
  } catch (const Error&) {
  }
  return rep;
}

inline const char* bounds_csv_header() {
  return "problem,eps,V_reduced,V_primal,V_dual,chi_upper,chi_lower,gap,C,violation_up,violation_low,"
         "t_reduced_s,t_primal_s,t_dual_s,t_bounds_s,status";
}

inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return buf;
}

inline std::string format_number(const std::optional<double>& x) { return x ? format_number(*x) : std::string(); }

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_bounds_csv(std::ostream& os, const BoundsReport& rep, bool header = true) {
  if (header) os << bounds_csv_header() << '\n';
  for (const auto& r : rep.rows) {
    os << csv_field(rep.problem) << ',' << format_number(r.eps) << ',' << format_number(r.V_reduced) << ','
       << format_number(r.V_primal) << ',' << format_number(r.V_dual) << ',' << format_number(r.chi_upper) << ','
       << format_number(r.chi_lower) << ',' << format_number(r.gap) << ',' << format_number(r.C) << ','
       << format_number(r.violation_up) << ',' << format_number(r.violation_low) << ','
       << format_number(r.t_reduced) << ',' << format_number(r.t_primal) << ',' << format_number(r.t_dual) << ','
       << format_number(r.t_bounds) << ',' << r.status << '\n';
  }
}

}  // namespace spoc
