// Upper and lower bounds for a small two-time-scale problem, built in code.
#include <cstdio>

#include "spoc/spoc.hpp"

int main() {
  // one slow state, one fast state, one control on [0, 2]
  Eigen::MatrixXd A(2, 2), b(2, 1);
  A << -0.5, 1.0, 0.3, -2.0;
  b << 1.0, 0.5;
  const spoc::SpocProblem p = spoc::constant_problem(
      1, 1, A, b, Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Identity(1, 1),
      Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Constant(1, -0.4), Eigen::VectorXd::Constant(1, 0.4),
      Eigen::Vector2d(1.0, -1.0), 2.0);

  const spoc::ValidationReport check = spoc::validate(p);
  if (!check.ok()) {
    std::fputs(check.to_text().c_str(), stderr);
    return 1;
  }

  spoc::BoundsOptions opt;
  opt.nodes = 200;
  const spoc::BoundsReport rep = spoc::sweep(p, {1e-1, 1e-2, 1e-3}, opt, "demo");
  std::printf("reduced value %.10f\n", rep.V_reduced);
  for (const auto& r : rep.rows) {
    if (!r.chi_upper) continue;
    std::printf("eps %-8g  lower %.10f  primal %.10f  upper %.10f\n", r.eps, *r.chi_lower,
                r.V_primal.value_or(0.0), *r.chi_upper);
  }
  return 0;
}
