#include <gtest/gtest.h>

#include <random>

#include "common.hpp"

using namespace spoc;
using spoc::testing::fixture;
using spoc::testing::RiccatiOracle;
using spoc::testing::scalar_problem;

TEST(BuildMesh, GradedLayerWidth) {
  const Mesh m = build_mesh(1.0, 1e-4, 100);
  EXPECT_EQ(m.kind, Mesh::Kind::Graded);
  EXPECT_NEAR(m.w, 10.0 * 1e-4 * std::log(1e4), 1e-15);
  EXPECT_NEAR(m.w, 9.2e-3, 1e-4);
  EXPECT_EQ(m.layer_intervals, 30);
  EXPECT_EQ(m.intervals(), 100);
  EXPECT_NEAR(m.t[30], m.w, 1e-15);
  EXPECT_NEAR(m.t[70], 1.0 - m.w, 1e-15);
}

TEST(BuildMesh, UniformWithoutStiffness) {
  const Mesh m = build_mesh(1.0, 1.0, 100);
  EXPECT_EQ(m.kind, Mesh::Kind::Uniform);
  for (size_t i = 0; i < m.t.size(); ++i) EXPECT_NEAR(m.t[i], i / 100.0, 1e-15);
}

TEST(BuildMesh, FuzzStrictlyIncreasing) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(0, 1);
  for (int trial = 0; trial < 2000; ++trial) {
    const double T = 0.01 + 100.0 * U(rng);
    const double eps = std::pow(10.0, -8.0 * U(rng));
    const int N = 16 + static_cast<int>(1000 * U(rng));
    GradingConfig g;
    g.c = 0.5 + 20.0 * U(rng);
    g.f = 0.05 + 0.44 * U(rng);
    g.rate = std::pow(10.0, -3.0 + 3.0 * U(rng));
    const Mesh m = build_mesh(T, eps, N, g);
    ASSERT_EQ(m.t.front(), 0.0);
    ASSERT_EQ(m.t.back(), T);
    ASSERT_EQ(m.intervals(), N);
    for (size_t i = 1; i < m.t.size(); ++i) ASSERT_GT(m.t[i], m.t[i - 1]) << T << " " << eps << " " << N;
  }
}

TEST(BuildMesh, TooFewIntervals) { EXPECT_THROW(build_mesh(1.0, 0.1, 15), Error); }

// Hand assembly of the trapezoidal program for m = n = k = 1 on 8 intervals.
TEST(TranscribePrimal, MatchesHandAssembledKkt) {
  const SpocProblem p = scalar_problem(0.3, -1.2, 0.8, -2.5, 0.7, 1.9, -1.0, 1.0, 1.0, -0.5, 1.0);
  const double eps = 0.05;
  std::vector<double> t = {0.0, 0.05, 0.1, 0.2, 0.35, 0.5, 0.7, 0.9, 1.0};
  Mesh mesh;
  mesh.t = t;
  const PrimalProgram P = transcribe_primal(p, eps, mesh);
  const int N = 8, s = 3;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(s * (N + 1), s * (N + 1));
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(2 * (N + 1), s * (N + 1));
  const double a11 = 0.3, a12 = -1.2, a21 = 0.8, a22 = -2.5, b1 = 0.7, b2 = 1.9;
  const double ie[2] = {1.0, eps};
  const double A[2][2] = {{a11, a12}, {a21, a22}};
  const double B[2] = {b1, eps * b2};
  for (int i = 0; i <= N; ++i) {
    const double wl = i > 0 ? t[i] - t[i - 1] : 0.0, wr = i < N ? t[i + 1] - t[i] : 0.0;
    const double w = 0.5 * (wl + wr);
    H(s * i, s * i) = w;
    H(s * i + 1, s * i + 1) = w;
    H(s * i + 2, s * i + 2) = w;
  }
  H(s * N, s * N) += 1.0;          // pi11
  H(s * N + 1, s * N + 1) += eps;  // eps pi22
  E(0, 0) = 1.0;
  E(1, 1) = 1.0;
  for (int k = 1; k <= N; ++k) {
    const double h = t[k] - t[k - 1];
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        E(2 * k + r, s * (k - 1) + c) = -0.5 * A[r][c] - (r == c ? ie[r] / h : 0.0);
        E(2 * k + r, s * k + c) = -0.5 * A[r][c] + (r == c ? ie[r] / h : 0.0);
      }
      E(2 * k + r, s * (k - 1) + 2) = -0.5 * B[r];
      E(2 * k + r, s * k + 2) = -0.5 * B[r];
    }
  }
  EXPECT_LT((Eigen::MatrixXd(P.qp.H) - H).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((Eigen::MatrixXd(P.qp.E) - E).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(P.qp.e(0), 1.0);
  EXPECT_EQ(P.qp.e(1), -0.5);
  EXPECT_EQ(P.qp.e.tail(2 * N).cwiseAbs().maxCoeff(), 0.0);
  for (int i = 0; i <= N; ++i) {
    EXPECT_EQ(P.qp.lo(s * i + 2), -1.0);
    EXPECT_EQ(P.qp.hi(s * i + 2), 1.0);
  }
}

TEST(TranscribePrimal, RejectsNonPositiveEps) {
  const SpocProblem p = fixture("example1");
  for (double eps : {0.0, -1e-3}) {
    try {
      transcribe_primal(p, eps, uniform_mesh(p.T, 20));
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    }
  }
}

TEST(TranscribePrimal, ZeroCostLeavesTerminalTerm) {
  Eigen::MatrixXd A(2, 2);
  A << -1.0, 0.5, 0.2, -1.5;
  const SpocProblem p = constant_problem(1, 1, A, Eigen::Vector2d(1.0, 1.0), Eigen::MatrixXd::Zero(2, 2),
                                         Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Identity(1, 1),
                                         Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Constant(1, -1.0),
                                         Eigen::VectorXd::Constant(1, 1.0), Eigen::Vector2d(1.0, 1.0), 1.0);
  const double eps = 0.1;
  const int N = 40;
  const PrimalProgram P = transcribe_primal(p, eps, uniform_mesh(1.0, N));
  // u = 0 and the trapezoidal state recursion give a feasible point
  const double h = 1.0 / N;
  const Eigen::MatrixXd Ie = p.Ieps(eps).asDiagonal();
  const Eigen::MatrixXd step = (Ie / h - 0.5 * A).inverse() * (Ie / h + 0.5 * A);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3 * (N + 1));
  Eigen::VectorXd z = p.z0;
  for (int i = 0; i <= N; ++i) {
    x.segment(3 * i, 2) = z;
    z = step * z;
  }
  ASSERT_LT((P.qp.E * x - P.qp.e).lpNorm<Eigen::Infinity>(), 1e-12);
  const Eigen::VectorXd zT = x.segment(3 * N, 2);
  EXPECT_NEAR(P.qp.objective(x), 0.5 * zT.dot(p.pi(eps) * zT), 1e-14);
}

TEST(QpSolver, TwoVariableEquality) {
  SparseQp qp;
  Eigen::MatrixXd H(2, 2);
  H << 2, 0, 0, 4;
  qp.H = H.sparseView();
  qp.c = Eigen::Vector2d(-2, -8);
  Eigen::MatrixXd E(1, 2);
  E << 1, 1;
  qp.E = E.sparseView();
  qp.e = Eigen::VectorXd::Constant(1, 1.0);
  qp.lo = Eigen::Vector2d::Constant(-std::numeric_limits<double>::infinity());
  qp.hi = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  const QpResult r = solve_qp(qp);
  ASSERT_EQ(r.status, SolveStatus::Converged);
  EXPECT_NEAR(r.x(0), -1.0 / 3.0, 1e-10);
  EXPECT_NEAR(r.x(1), 4.0 / 3.0, 1e-10);
}

TEST(QpSolver, TwoVariableActiveBound) {
  SparseQp qp;
  qp.H = (2.0 * Eigen::MatrixXd::Identity(2, 2)).sparseView();
  qp.c = Eigen::Vector2d(-2, -4);
  qp.c0 = 5.0;
  Eigen::MatrixXd E(1, 2);
  E << 1, 1;
  qp.E = E.sparseView();
  qp.e = Eigen::VectorXd::Constant(1, 3.0);
  qp.lo = Eigen::Vector2d::Constant(-10.0);
  qp.hi = Eigen::Vector2d(10.0, 1.5);
  const QpResult r = solve_qp(qp);
  ASSERT_EQ(r.status, SolveStatus::Converged);
  EXPECT_NEAR(r.x(0), 1.5, 1e-10);
  EXPECT_NEAR(r.x(1), 1.5, 1e-10);
  EXPECT_NEAR(r.objective, 0.5, 1e-10);
}

TEST(Solve, WarmRestartTakesNoIterations) {
  const SpocProblem p = fixture("example1");
  const PrimalProgram P = transcribe_primal(p, 1e-2, build_mesh(p.T, 1e-2, 399, grading_for(p)));
  const SolveResult a = solve(P);
  ASSERT_EQ(a.status, SolveStatus::Converged);
  const SolveResult b = solve(P, {}, &a.raw);
  EXPECT_EQ(b.status, SolveStatus::Converged);
  EXPECT_EQ(b.iterations, 0);
  EXPECT_NEAR(b.objective, a.objective, 1e-12 * std::abs(a.objective));
}

TEST(Solve, DeterministicForIdenticalInput) {
  const SpocProblem p = fixture("example2");
  const PrimalProgram P = transcribe_primal(p, 1e-3, build_mesh(p.T, 1e-3, 199, grading_for(p)));
  const SolveResult a = solve(P), b = solve(P);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.traj.get("u"), b.traj.get("u"));
}

TEST(ExtractCostate, TerminalConditionAndPmp) {
  for (const char* name : {"example1", "example2"}) {
    const SpocProblem p = fixture(name);
    for (double eps : {1e-2, 1e-4}) {
      const PrimalProgram P = transcribe_primal(p, eps, build_mesh(p.T, eps, 399, grading_for(p)));
      const SolveResult r = solve(P);
      ASSERT_EQ(r.status, SolveStatus::Converged) << name << " " << eps;
      const Eigen::MatrixXd& z = r.traj.get("z");
      const Eigen::MatrixXd& u = r.traj.get("u");
      const Eigen::MatrixXd& chi = r.traj.get("chi");
      const size_t N = P.t.size() - 1;
      const Eigen::VectorXd zT = z.row(static_cast<Eigen::Index>(N)).transpose();
      EXPECT_LE((chi.row(static_cast<Eigen::Index>(N)).transpose() - p.pi_unscaled(eps) * zT).norm(), 1e-8);
      int bad = 0;
      for (size_t i = 1; i < N; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const Eigen::VectorXd up = pmp_control(chi.row(ii).transpose(), P.t[i], eps, p);
        if ((up - u.row(ii).transpose()).lpNorm<Eigen::Infinity>() > 1e-6) ++bad;
      }
      EXPECT_EQ(bad, 0) << name << " eps " << eps;
    }
  }
}

TEST(ExtractCostate, MissingMultipliers) {
  const SpocProblem p = fixture("example1");
  const PrimalProgram P = transcribe_primal(p, 1e-2, uniform_mesh(p.T, 20));
  SolveResult empty;
  try {
    extract_costate(empty, P);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingMultipliers);
  }
}

TEST(ExtractCostate, MatchesRiccatiCostate) {
  const SpocProblem p = scalar_problem(-0.5, 1.0, 0.5, -2.0, 1.0, 0.5, -100.0, 100.0, 1.0, -0.5, 1.0);
  const double eps = 0.1;
  const RiccatiOracle ric(p, eps);
  double prev = 0.0;
  for (int N : {200, 400}) {
    const PrimalProgram P = transcribe_primal(p, eps, uniform_mesh(p.T, N));
    const SolveResult r = solve(P);
    ASSERT_EQ(r.status, SolveStatus::Converged);
    double err = 0.0;
    for (size_t i = 0; i < P.t.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const Eigen::VectorXd z = r.traj.get("z").row(ii).transpose();
      const Eigen::VectorXd expect = p.Ieps(eps).cwiseInverse().cwiseProduct(ric.P(P.t[i]) * z);
      err = std::max(err, (r.traj.get("chi").row(ii).transpose() - expect).lpNorm<Eigen::Infinity>());
    }
    EXPECT_LT(err, 1e-2) << N;
    if (prev > 0.0) {
      EXPECT_GT(prev / err, 3.0) << "costate error should fall at second order";
    }
    prev = err;
    EXPECT_NEAR(r.objective, ric.value(p.z0), 1e-4 * ric.value(p.z0));
  }
}

namespace {

// Unconstrained QP by a dense KKT solve; bounds are ignored.
double dense_kkt_optimum(const SparseQp& qp) {
  const Eigen::Index n = qp.size(), m = qp.E.rows();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = Eigen::MatrixXd(qp.H);
  K.topRightCorner(n, m) = Eigen::MatrixXd(qp.E).transpose();
  K.bottomLeftCorner(m, n) = Eigen::MatrixXd(qp.E);
  Eigen::VectorXd rhs(n + m);
  rhs << -qp.c, qp.e;
  const Eigen::VectorXd x = K.partialPivLu().solve(rhs).head(n);
  return qp.objective(x);
}

}  // namespace

TEST(TranscribeDual, WideBoxMatchesDirectSolve) {
  const SpocProblem p = scalar_problem(-0.5, 1.0, 0.5, -2.0, 1.0, 0.5, -100.0, 100.0, 1.0, -0.5, 1.0);
  for (double eps : {0.1, 1e-3}) {
    const Mesh mesh = build_mesh(p.T, eps, 100, grading_for(p));
    const PrimalProgram P = transcribe_primal(p, eps, mesh);
    const double direct = dense_kkt_optimum(P.qp);
    const DualProblem dp(p, eps);
    const DualSolveResult d = solve(transcribe_dual(dp, mesh));
    ASSERT_EQ(d.status, SolveStatus::Converged);
    EXPECT_NEAR(d.objective, direct, 1e-8 * std::abs(direct)) << eps;
  }
}

TEST(TranscribeDual, ZeroData) {
  // 0 is interior to the box
  const SpocProblem p = scalar_problem(-0.5, 1.0, 0.5, -2.0, 1.0, 0.5, -1.0, 1.0, 0.0, 0.0, 1.0);
  const double eps = 1e-3;
  const Mesh mesh = build_mesh(p.T, eps, 99, grading_for(p));
  const DualProblem dp(p, eps);
  const DualSolveResult d = solve(transcribe_dual(dp, mesh));
  ASSERT_EQ(d.status, SolveStatus::Converged);
  EXPECT_EQ(d.objective, 0.0);
  EXPECT_EQ(d.traj.get("gamma").cwiseAbs().maxCoeff(), 0.0);
  const SolveResult r = solve(transcribe_primal(p, eps, mesh));
  EXPECT_NEAR(r.objective, 0.0, 1e-12);
}

TEST(TranscribeDual, WeakAndStrongDuality) {
  for (const char* name : {"example1", "example2"}) {
    const SpocProblem p = fixture(name);
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-5}) {
      const Mesh mesh = build_mesh(p.T, eps, 399, grading_for(p));
      const SolveResult r = solve(transcribe_primal(p, eps, mesh));
      const DualProblem dp(p, eps);
      const DualSolveResult d = solve(transcribe_dual(dp, mesh));
      ASSERT_EQ(r.status, SolveStatus::Converged) << name << " " << eps;
      ASSERT_EQ(d.status, SolveStatus::Converged) << name << " " << eps;
      const double scale = std::max(1.0, std::abs(r.objective));
      EXPECT_LE(d.objective, r.objective + 1e-7 * scale) << name << " " << eps;
      EXPECT_LE(std::abs(d.objective - r.objective) / scale, 1e-6) << name << " " << eps;
    }
  }
}

TEST(TranscribePrimal, RefinementOrderAtLeastTwo) {
  const SpocProblem p = scalar_problem(-0.5, 1.0, 0.5, -2.0, 1.0, 0.5, -100.0, 100.0, 1.0, -0.5, 1.0);
  const double eps = 0.2;
  std::vector<double> V;
  for (int N : {100, 200, 400, 800}) V.push_back(solve(transcribe_primal(p, eps, uniform_mesh(p.T, N))).objective);
  for (size_t i = 0; i + 2 < V.size(); ++i) {
    const double order = std::log2(std::abs(V[i] - V[i + 1]) / std::abs(V[i + 1] - V[i + 2]));
    EXPECT_GE(order, 1.9) << i;
  }
}

TEST(TranscribePrimal, ScalingInvariance) {
  const SpocProblem p = fixture("example2");
  SpocProblem q = p;
  const double c = 3.0;
  for (CoeffMatrix* m : {&q.Q11, &q.Q12, &q.Q21, &q.Q22, &q.R, &q.pi11, &q.pi22}) *m = c * *m;
  const double eps = 1e-2;
  const Mesh mesh = build_mesh(p.T, eps, 199, grading_for(p));
  const SolveResult a = solve(transcribe_primal(p, eps, mesh)), b = solve(transcribe_primal(q, eps, mesh));
  EXPECT_NEAR(b.objective, c * a.objective, 1e-7 * std::abs(b.objective));
  EXPECT_LT((a.traj.get("u") - b.traj.get("u")).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(TranscribeReduced, DecoupledFastBlockMatchesPrimal) {
  SpocProblem p = fixture("example2");
  p.A12 = CoeffMatrix::zero(p.m, p.n);
  p.A21 = CoeffMatrix::zero(p.n, p.m);
  p.Q12 = CoeffMatrix::zero(p.m, p.n);
  p.Q21 = CoeffMatrix::zero(p.n, p.m);
  p.b2 = CoeffMatrix::zero(p.n, p.k);
  p.z0.tail(p.n).setZero();
  const double eps = 1e-3;
  const Mesh mesh = build_mesh(p.T, eps, 199, grading_for(p));
  const ReducedProblem rp = reduce(p);
  const SolveResult full = solve(transcribe_primal(p, eps, mesh));
  const SolveResult red = solve(transcribe_reduced(rp, mesh));
  EXPECT_NEAR(full.objective, red.objective, 1e-8 * std::abs(red.objective));
}

TEST(TranscribePrimal, Example1SelfConvergence) {
  const SpocProblem p = fixture("example1");
  const double eps = 1.0 / 30.0;
  auto value = [&](int nodes) {
    return solve(transcribe_primal(p, eps, build_mesh(p.T, eps, nodes - 1, grading_for(p)))).objective;
  };
  const double v400 = value(400), v800 = value(800), v1600 = value(1600);
  const double ref = (4.0 * v1600 - v800) / 3.0;
  EXPECT_NEAR(v400, ref, 5e-3 * std::abs(ref));
}
