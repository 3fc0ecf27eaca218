#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "msrisk/optimize.hpp"

using namespace msrisk::optim;

TEST_CASE("BFGS solves a convex quadratic") {
  Eigen::Matrix3d a;
  a << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  const Eigen::Vector3d b(1.0, -2.0, 0.5);
  const Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = a * x - b;
    return 0.5 * x.dot(a * x) - b.dot(x);
  };
  const BfgsResult r = minimize_bfgs(f, Eigen::Vector3d::Zero());
  CHECK(r.converged);
  const Eigen::Vector3d exact = a.ldlt().solve(b);
  CHECK((r.x - exact).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("BFGS minimises the Rosenbrock function") {
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(2);
    g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
    g[1] = 200.0 * (x[1] - x[0] * x[0]);
    return (1.0 - x[0]) * (1.0 - x[0]) + 100.0 * std::pow(x[1] - x[0] * x[0], 2);
  };
  BfgsOptions o;
  o.max_iterations = 2000;
  const BfgsResult r = minimize_bfgs(f, Eigen::Vector2d(-1.2, 1.0), o);
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("BFGS backs off from infeasible points") {
  // log barrier: only x > 0 is feasible; minimum at x = 1.
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(1);
    if (x[0] <= 0.0) return std::numeric_limits<double>::infinity();
    g[0] = 1.0 - 1.0 / x[0];
    return x[0] - std::log(x[0]);
  };
  const BfgsResult r = minimize_bfgs(f, Eigen::VectorXd::Constant(1, 0.01));
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-6));
}
