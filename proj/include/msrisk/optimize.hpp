#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>

namespace msrisk::optim {

/// Objective value at x; writes the gradient into `grad`. Returning a
/// non-finite value marks x as infeasible (the line search backs off).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct BfgsOptions {
  double gradient_tolerance = 1e-8;   // on the max-norm of the gradient
  double relative_tolerance = 1e-12;  // on |f_k - f_{k+1}| / max(|f|, 1)
  int max_iterations = 500;
  double shrink = 0.5;   // backtracking factor
  double armijo = 1e-4;  // sufficient-decrease constant
  int max_backtracks = 60;
  /// Starting inverse-Hessian estimate; empty means a scaled identity.
  Eigen::MatrixXd initial_inverse_hessian;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

/// Minimises `f` by BFGS on the inverse Hessian with Armijo backtracking.
BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options = {});

}  // namespace msrisk::optim
