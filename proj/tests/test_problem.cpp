#include <gtest/gtest.h>

#include <random>

#include "common.hpp"

using namespace spoc;
using spoc::testing::fixture;

TEST(CoeffMatrix, ConstantIgnoresArguments) {
  Eigen::MatrixXd M(2, 2);
  M << 1, 2, 3, 4;
  const CoeffMatrix c = CoeffMatrix::constant(M);
  EXPECT_EQ(c.eval(0.3, 0.7), M);
  EXPECT_EQ(c.eval(5.0, 0.0), M);
  EXPECT_TRUE(c.time_invariant());
}

TEST(CoeffMatrix, TwoTermPolynomial) {
  CoeffMatrix c(1, 1, 1, 1);
  c.coeff(1, 0)(0, 0) = 2.0;
  c.coeff(0, 1)(0, 0) = 3.0;
  EXPECT_NEAR(c.eval(0.5, 0.1)(0, 0), 1.3, 1e-15);
  EXPECT_NEAR(c.leading(0.5)(0, 0), 1.0, 1e-15);
  EXPECT_FALSE(c.time_invariant());
}

TEST(CoeffMatrix, EvaluationIsLinearInCoefficients) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    CoeffMatrix X(2, 3, 2, 1), Y(2, 3, 2, 1), Z(2, 3, 2, 1);
    const double a = U(rng), b = U(rng);
    for (int p = 0; p <= 2; ++p)
      for (int q = 0; q <= 1; ++q) {
        X.coeff(p, q) = Eigen::MatrixXd::NullaryExpr(2, 3, [&] { return U(rng); });
        Y.coeff(p, q) = Eigen::MatrixXd::NullaryExpr(2, 3, [&] { return U(rng); });
        Z.coeff(p, q) = a * X.coeff(p, q) + b * Y.coeff(p, q);
      }
    const double t = U(rng) + 1.0, e = 0.5 * (U(rng) + 1.0);
    EXPECT_LT((Z.eval(t, e) - (a * X.eval(t, e) + b * Y.eval(t, e))).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(Validate, Example1Passes) {
  const ValidationReport rep = validate(fixture("example1"));
  EXPECT_TRUE(rep.ok()) << rep.to_text();
  EXPECT_LT(rep.find("A22 stable (assumption (a))")->margin, 0.0);
  EXPECT_EQ(rep.t_grid.size(), 17u);
  EXPECT_EQ(rep.eps_grid.front(), 0.0);
}

TEST(Validate, Example2Passes) {
  const ValidationReport rep = validate(fixture("example2"));
  EXPECT_TRUE(rep.ok()) << rep.to_text();
  EXPECT_TRUE(rep.find("A22 symmetric part negative definite")->pass);
}

TEST(Validate, PositiveA22FailsAssumptionA) {
  SpocProblem p = fixture("example1");
  p.A22 = CoeffMatrix::constant(Eigen::MatrixXd::Identity(2, 2));
  const ValidationReport rep = validate(p);
  EXPECT_FALSE(rep.ok());
  const CheckResult* a = rep.find("A22 stable (assumption (a))");
  ASSERT_NE(a, nullptr);
  EXPECT_FALSE(a->pass);
  EXPECT_NEAR(a->margin, 1.0, 1e-12);
}

TEST(Validate, ReportsOffendingSample) {
  SpocProblem p = fixture("example1");
  CoeffMatrix R(2, 1, 1, 0);
  R.coeff(0, 0) = Eigen::Vector2d(1.0, 1.0);
  R.coeff(1, 0) = Eigen::Vector2d(0.0, -1.0 / 30.0);  // R_2 hits -1 at t = 60
  p.R = R;
  const ValidationReport rep = validate(p);
  const CheckResult* r = rep.find("R positive diagonal");
  EXPECT_FALSE(r->pass);
  EXPECT_NEAR(r->t, 60.0, 1e-12);
  EXPECT_NEAR(r->margin, -1.0, 1e-12);
}

TEST(LoadProblem, FixtureDimensions) {
  const SpocProblem e1 = fixture("example1");
  EXPECT_EQ(e1.m, 2);
  EXPECT_EQ(e1.n, 2);
  EXPECT_EQ(e1.k, 2);
  EXPECT_EQ(e1.T, 60.0);
  const SpocProblem e2 = fixture("example2");
  EXPECT_EQ(e2.m, 4);
  EXPECT_EQ(e2.n, 6);
  EXPECT_EQ(e2.k, 3);
  EXPECT_EQ(e2.T, 0.5);
}

TEST(LoadProblem, EmptyBoxIsParseError) {
  SpocProblem p = fixture("example1");
  p.alpha = CoeffMatrix::constant(Eigen::Vector2d(2.0, 0.0));
  try {
    load_problem(save_problem(p));
    FAIL() << "expected ParseError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
}

TEST(LoadProblem, MalformedJsonReportsLine) {
  try {
    load_problem("{\n  \"m\": 2,\n  \"n\": ]\n}");
    FAIL() << "expected ParseError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(LoadProblem, WrongShapeIsDimensionMismatch) {
  SpocProblem p = fixture("example1");
  p.A22 = CoeffMatrix::constant(Eigen::RowVector2d(1.0, 2.0));
  try {
    load_problem(save_problem(p));
    FAIL() << "expected DimensionMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(LoadProblem, MissingFieldNamesPath) {
  std::string text = save_problem(fixture("example1"));
  const size_t at = text.find("\"b2\"");
  text.replace(at, 4, "\"bX\"");
  try {
    load_problem(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("matrices.b2"), std::string::npos) << e.what();
  }
}

TEST(LoadProblem, AcceptsExponentsAndFullDiagonalR) {
  std::string text = save_problem(fixture("example1"));
  const size_t at = text.find("\"R\": ");
  const size_t end = text.find('}', at);
  text.replace(at, end - at + 1,
               "\"R\": {\"rows\": 2, \"cols\": 2, \"Dt\": 0, \"De\": 0, \"data\": [[[[1e0, 0], [0, 2.5E-1]]]]}");
  const SpocProblem p = load_problem(text);
  EXPECT_EQ(p.Rdiag(0, 0.01), Eigen::Vector2d(1.0, 0.25));
}

TEST(SaveProblem, FixtureNormalizationIsIdempotent) {
  for (const char* name : {"example1", "example2"}) {
    const std::string once = save_problem(fixture(name));
    const std::string twice = save_problem(load_problem(once));
    EXPECT_EQ(once, twice) << name;
  }
}

TEST(SaveProblem, RandomProblemRoundTrips) {
  GenConfig g;
  g.seed = 11;
  for (int i = 0; i < 5; ++i) {
    const SpocProblem p = generate_one(g, static_cast<std::uint64_t>(i));
    const SpocProblem q = load_problem(save_problem(p));
    for (size_t c = 0; c < p.coefficients().size(); ++c)
      EXPECT_TRUE(*p.coefficients()[c] == *q.coefficients()[c]) << "coefficient " << c;
    EXPECT_EQ(p.z0, q.z0);
    EXPECT_EQ(p.T, q.T);
  }
}

TEST(SaveProblem, HigherDegreeCoefficientsExact) {
  SpocProblem p = fixture("example1");
  CoeffMatrix a(2, 2, 2, 1);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int i = 0; i <= 2; ++i)
    for (int j = 0; j <= 1; ++j) a.coeff(i, j) = Eigen::MatrixXd::NullaryExpr(2, 2, [&] { return U(rng) / 3.0; });
  p.A11 = a;
  const SpocProblem q = load_problem(save_problem(p));
  EXPECT_EQ(q.A11.Dt(), 2);
  EXPECT_EQ(q.A11.De(), 1);
  EXPECT_TRUE(q.A11 == a);
}
