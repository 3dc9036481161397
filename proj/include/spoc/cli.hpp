#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bounds.hpp"
#include "generator.hpp"
#include "problem_io.hpp"

namespace spoc {

enum ExitCode { ExitOk = 0, ExitValidation = 1, ExitUsage = 2, ExitSolver = 3 };

/// Built-in problems addressable by name when no file of that name exists.
using FixtureMap = std::map<std::string, std::string>;

struct RunConfig {
  std::string command;
  std::string problem;
  std::string which;
  std::vector<double> eps;
  int nodes = 400;
  double tol_solve = 1e-8;
  double tol_ode_rel = 1e-9;
  double tol_ode_abs = 1e-11;
  std::string out;
  std::uint64_t seed = 0;
  bool solve_primal = true;
  bool solve_dual = true;
  int jobs = 1;
  GenConfig gen{};
  std::string prefix = "problem";
};

namespace detail {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string problem_label(const std::string& arg) {
  return std::filesystem::path(arg).stem().string();
}

inline SpocProblem resolve_problem(const std::string& arg, const FixtureMap& fixtures) {
  if (!std::filesystem::exists(arg)) {
    auto it = fixtures.find(arg);
    if (it != fixtures.end()) return load_problem(it->second);
  }
  return load_problem_file(arg);
}

inline BoundsOptions bounds_options(const RunConfig& rc) {
  BoundsOptions o;
  o.solve_primal = rc.solve_primal;
  o.solve_dual = rc.solve_dual;
  o.nodes = rc.nodes;
  o.tol_solve = rc.tol_solve;
  o.ode.rtol = rc.tol_ode_rel;
  o.ode.atol = rc.tol_ode_abs;
  return o;
}

inline void check_eps(const std::vector<double>& eps, const SpocProblem& p) {
  if (eps.empty()) throw UsageError("--eps needs at least one value");
  for (double e : eps)
    if (!(e > 0.0) || e > p.eps_star * (1.0 + 1e-12))
      throw UsageError("eps " + format_number(e) + " is outside (0, " + format_number(p.eps_star) + "]");
}

inline void check_numbers(const RunConfig& rc) {
  if (rc.nodes < 2) throw UsageError("--nodes must be at least 2");
  if (!(rc.tol_solve > 0.0) || !(rc.tol_ode_rel > 0.0) || !(rc.tol_ode_abs > 0.0))
    throw UsageError("tolerances must be positive");
  if (rc.jobs < 1) throw UsageError("--jobs must be at least 1");
}

/// Writes `path` through a temporary file so readers never see a partial file.
inline void write_atomically(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << text;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream os;
  os << 't';
  for (const auto& [name, v] : tr.channels)
    for (Eigen::Index j = 0; j < v.cols(); ++j) os << ',' << name << '_' << (j + 1);
  os << '\n';
  for (size_t i = 0; i < tr.t.size(); ++i) {
    os << format_number(tr.t[i]);
    for (const auto& c : tr.channels)
      for (Eigen::Index j = 0; j < c.second.cols(); ++j)
        os << ',' << format_number(c.second(static_cast<Eigen::Index>(i), j));
    os << '\n';
  }
  return os.str();
}

inline std::filesystem::path out_dir(const RunConfig& rc) {
  std::filesystem::path d = rc.out.empty() ? std::filesystem::path(".") : std::filesystem::path(rc.out);
  std::filesystem::create_directories(d);
  return d;
}

/// Loads a problem for solve or bounds; nullopt (with the report on `err`) when an assumption fails.
inline std::optional<SpocProblem> load_valid(const RunConfig& rc, const FixtureMap& fx, std::ostream& err) {
  SpocProblem p = resolve_problem(rc.problem, fx);
  const ValidationReport rep = validate(p);
  if (rep.ok()) return p;
  err << rep.to_text();
  return std::nullopt;
}

inline int cmd_validate(const RunConfig& rc, const FixtureMap& fx, std::ostream& out) {
  const SpocProblem p = resolve_problem(rc.problem, fx);
  const ValidationReport rep = validate(p);
  out << rep.to_text();
  return rep.ok() ? ExitOk : ExitValidation;
}

inline int cmd_solve(const RunConfig& rc, const FixtureMap& fx, std::ostream& out, std::ostream& err) {
  const std::optional<SpocProblem> loaded = load_valid(rc, fx, err);
  if (!loaded) return ExitValidation;
  const SpocProblem& p = *loaded;
  const SolveOptions so{rc.tol_solve, 200};
  const std::string label = problem_label(rc.problem);
  Trajectory traj;
  double objective = 0.0, residual = 0.0, wall = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string file = label + "_" + rc.which;
  if (rc.which == "reduced") {
    const ReducedProblem rp = reduce(p);
    const PrimalProgram P = transcribe_reduced(rp, uniform_mesh(p.T, rc.nodes - 1));
    const SolveResult r = solve(P, so);
    traj = r.traj;
    objective = r.objective;
    residual = std::max(r.stationarity, r.feasibility);
    wall = r.wall_time;
    iterations = r.iterations;
    converged = r.status == SolveStatus::Converged;
  } else if (rc.which == "primal" || rc.which == "dual") {
    check_eps(rc.eps, p);
    if (rc.eps.size() != 1) throw UsageError("solve " + rc.which + " takes exactly one --eps value");
    const double eps = rc.eps.front();
    file += "_eps" + format_number(eps);
    const Mesh mesh = build_mesh(p.T, eps, std::max(16, rc.nodes - 1), grading_for(p));
    if (rc.which == "primal") {
      const SolveResult r = solve(transcribe_primal(p, eps, mesh), so);
      traj = r.traj;
      objective = r.objective;
      residual = std::max(r.stationarity, r.feasibility);
      wall = r.wall_time;
      iterations = r.iterations;
      converged = r.status == SolveStatus::Converged;
    } else {
      const DualProblem dp(p, eps);
      const DualSolveResult r = solve(transcribe_dual(dp, mesh), so);
      traj = r.traj;
      objective = r.objective;
      residual = r.gradient_norm;
      wall = r.wall_time;
      iterations = r.iterations;
      converged = r.status == SolveStatus::Converged;
    }
  } else {
    throw UsageError("solve expects primal, dual or reduced, got '" + rc.which + "'");
  }
  const std::filesystem::path path = out_dir(rc) / (file + ".csv");
  write_atomically(path, trajectory_csv(traj));
  out << rc.which << ' ' << label << ": V = " << format_number(objective) << "  residual = "
      << format_number(residual) << "  iterations = " << iterations << "  time = " << format_number(wall)
      << " s  -> " << path.string() << '\n';
  if (!converged) {
    err << "solver did not converge\n";
    return ExitSolver;
  }
  return ExitOk;
}

inline void print_summary(std::ostream& os, const BoundsReport& rep) {
  os << rep.problem << ": V_reduced = " << format_number(rep.V_reduced);
  os << "  C = " << (rep.C ? format_number(*rep.C) : std::string("n/a"));
  os << "  slope = " << (rep.slope ? format_number(*rep.slope) : std::string("n/a")) << '\n';
}

inline int cmd_bounds(const RunConfig& rc, const FixtureMap& fx, std::ostream& out, std::ostream& err) {
  const std::optional<SpocProblem> loaded = load_valid(rc, fx, err);
  if (!loaded) return ExitValidation;
  const SpocProblem& p = *loaded;
  check_eps(rc.eps, p);
  const BoundsReport rep = sweep(p, rc.eps, bounds_options(rc), problem_label(rc.problem));
  std::ostringstream csv;
  write_bounds_csv(csv, rep);
  if (rc.out.empty()) {
    out << csv.str();
    print_summary(err, rep);
  } else {
    const std::filesystem::path path = out_dir(rc) / (rep.problem + "_bounds.csv");
    write_atomically(path, csv.str());
    print_summary(out, rep);
    out << "wrote " << path.string() << '\n';
  }
  for (const auto& r : rep.rows)
    if (r.ok()) return ExitOk;
  return ExitSolver;
}

inline int cmd_generate(const RunConfig& rc, std::ostream& out) {
  GenConfig g = rc.gen;
  g.seed = rc.seed;
  g.check();
  if (g.count == 0) return ExitOk;
  const std::filesystem::path dir = out_dir(rc);
  for (int i = 0; i < g.count; ++i) {
    const std::filesystem::path path = dir / generated_name(rc.prefix, i);
    write_atomically(path, save_problem(generate_one(g, static_cast<std::uint64_t>(i))));
    out << path.string() << '\n';
  }
  return ExitOk;
}

inline int cmd_sweep_suite(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  if (rc.eps.empty()) throw UsageError("--eps needs at least one value");
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(rc.problem)) throw UsageError(rc.problem + " is not a directory");
  for (const auto& e : std::filesystem::directory_iterator(rc.problem))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());

  std::vector<std::optional<BoundsReport>> reports(files.size());
  std::vector<std::string> warnings(files.size());
  std::atomic<size_t> next{0};
  const BoundsOptions opt = bounds_options(rc);
  auto worker = [&] {
    for (size_t i; (i = next++) < files.size();) {
      try {
        const SpocProblem p = load_problem_file(files[i].string());
        if (!validate(p).ok()) throw std::runtime_error("fails validation");
        check_eps(rc.eps, p);
        reports[i] = sweep(p, rc.eps, opt, files[i].stem().string());
      } catch (const std::exception& e) {
        warnings[i] = files[i].string() + ": skipped (" + e.what() + ")";
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::min<int>(rc.jobs, static_cast<int>(files.size())); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& w : warnings)
    if (!w.empty()) err << "warning: " << w << '\n';

  std::ostringstream rows, agg, slopes;
  rows << bounds_csv_header() << '\n';
  slopes << "problem,slope,C\n";
  std::vector<double> eps_sorted = rc.eps;
  std::sort(eps_sorted.begin(), eps_sorted.end(), std::greater<>());
  eps_sorted.erase(std::unique(eps_sorted.begin(), eps_sorted.end()), eps_sorted.end());
  struct Acc {
    double tp = 0, td = 0, tb = 0;
    int np = 0, nd = 0, nb = 0, sandwich_rows = 0, sandwich_pass = 0;
  };
  std::map<double, Acc> acc;
  int ok_problems = 0;
  for (const auto& r : reports) {
    if (!r) continue;
    ++ok_problems;
    write_bounds_csv(rows, *r, false);
    slopes << csv_field(r->problem) << ',' << format_number(r->slope) << ',' << format_number(r->C) << '\n';
    for (const auto& row : r->rows) {
      Acc& a = acc[row.eps];
      if (row.t_primal) a.tp += *row.t_primal, ++a.np;
      if (row.t_dual) a.td += *row.t_dual, ++a.nd;
      if (row.chi_upper) a.tb += row.t_bounds, ++a.nb;
      if (row.violation_up && row.violation_low) {
        ++a.sandwich_rows;
        const double d = row.delta(opt.tol_solve);
        if (*row.violation_up <= d && *row.violation_low <= d) ++a.sandwich_pass;
      }
    }
  }
  agg << "eps,problems,mean_t_primal_s,mean_t_dual_s,mean_t_bounds_s,gain_primal_vs_bounds,gain_dual_vs_bounds,"
         "sandwich_pass_rate\n";
  for (double e : eps_sorted) {
    const Acc& a = acc[e];
    auto mean = [](double s, int n) { return n ? std::optional<double>(s / n) : std::nullopt; };
    const auto mp = mean(a.tp, a.np), md = mean(a.td, a.nd), mb = mean(a.tb, a.nb);
    auto ratio = [](std::optional<double> x, std::optional<double> y) {
      return (x && y && *y > 0.0) ? std::optional<double>(*x / *y) : std::nullopt;
    };
    agg << format_number(e) << ',' << ok_problems << ',' << format_number(mp) << ',' << format_number(md) << ','
        << format_number(mb) << ',' << format_number(ratio(mp, mb)) << ',' << format_number(ratio(md, mb)) << ','
        << format_number(a.sandwich_rows ? std::optional<double>(double(a.sandwich_pass) / a.sandwich_rows)
                                         : std::nullopt)
        << '\n';
  }
  const std::filesystem::path dir = out_dir(rc);
  write_atomically(dir / "suite_bounds.csv", rows.str());
  write_atomically(dir / "suite_summary.csv", agg.str());
  write_atomically(dir / "suite_slopes.csv", slopes.str());
  out << agg.str();
  out << "wrote " << (dir / "suite_summary.csv").string() << '\n';
  return ok_problems > 0 || files.empty() ? ExitOk : ExitSolver;
}

}  // namespace detail

/// Parses arguments and runs one subcommand; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr,
                   const FixtureMap& fixtures = {}) {
  RunConfig rc;
  CLI::App app{"Bounds for singularly perturbed LQ optimal control problems", "spoc"};
  app.require_subcommand(1);
  auto common = [&](CLI::App* c) {
    c->add_option("--eps", rc.eps, "comma-separated eps values")->delimiter(',');
    c->add_option("--nodes", rc.nodes, "transcription nodes")->capture_default_str();
    c->add_option("--tol-solve", rc.tol_solve, "QP / dual solver tolerance")->capture_default_str();
    c->add_option("--tol-ode-rel", rc.tol_ode_rel, "integrator relative tolerance")->capture_default_str();
    c->add_option("--tol-ode-abs", rc.tol_ode_abs, "integrator absolute tolerance")->capture_default_str();
    c->add_option("--out", rc.out, "output directory");
    c->add_flag("--solve-primal,!--no-solve-primal", rc.solve_primal, "also solve the full primal program");
    c->add_flag("--solve-dual,!--no-solve-dual", rc.solve_dual, "also solve the dual program");
  };
  CLI::App* validate_cmd = app.add_subcommand("validate", "check the problem assumptions");
  validate_cmd->add_option("problem", rc.problem, "problem file or fixture name")->required();

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve one transcribed program");
  solve_cmd->add_option("which", rc.which, "primal, dual or reduced")->required();
  solve_cmd->add_option("problem", rc.problem, "problem file or fixture name")->required();
  common(solve_cmd);

  CLI::App* bounds_cmd = app.add_subcommand("bounds", "upper and lower bounds over an eps sweep");
  bounds_cmd->add_option("problem", rc.problem, "problem file or fixture name")->required();
  common(bounds_cmd);

  CLI::App* gen_cmd = app.add_subcommand("generate", "write random problems");
  gen_cmd->add_option("--m", rc.gen.m)->capture_default_str();
  gen_cmd->add_option("--n", rc.gen.n)->capture_default_str();
  gen_cmd->add_option("--k", rc.gen.k)->capture_default_str();
  gen_cmd->add_option("--T", rc.gen.T)->capture_default_str();
  gen_cmd->add_option("--count", rc.gen.count)->capture_default_str();
  gen_cmd->add_option("--delta", rc.gen.delta)->capture_default_str();
  gen_cmd->add_option("--seed", rc.seed)->capture_default_str();
  gen_cmd->add_option("--prefix", rc.prefix)->capture_default_str();
  gen_cmd->add_option("--out", rc.out, "output directory");

  CLI::App* suite_cmd = app.add_subcommand("sweep-suite", "bounds sweep over every problem file in a directory");
  suite_cmd->add_option("dir", rc.problem, "directory of problem files")->required();
  suite_cmd->add_option("--jobs", rc.jobs, "worker threads")->capture_default_str();
  common(suite_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return ExitUsage;
  }

  try {
    detail::check_numbers(rc);
    if (*validate_cmd) return detail::cmd_validate(rc, fixtures, out);
    if (*solve_cmd) return detail::cmd_solve(rc, fixtures, out, err);
    if (*bounds_cmd) return detail::cmd_bounds(rc, fixtures, out, err);
    if (*gen_cmd) return detail::cmd_generate(rc, out);
    if (*suite_cmd) return detail::cmd_sweep_suite(rc, out, err);
  } catch (const detail::UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return ExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::ParseError:
      case ErrorCode::DimensionMismatch:
      case ErrorCode::InvalidArgument:
        return ExitUsage;
      case ErrorCode::SingularData:
      case ErrorCode::SingularA22:
      case ErrorCode::UnstableLayer:
        return ExitValidation;
      default:
        return ExitSolver;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return ExitSolver;
  }
  return ExitUsage;
}

}  // namespace spoc
