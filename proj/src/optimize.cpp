#include "msrisk/optimize.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace msrisk::optim {

BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options) {
  const Eigen::Index n = x0.size();
  BfgsResult res;
  res.x = std::move(x0);
  res.gradient = Eigen::VectorXd::Zero(n);
  res.value = f(res.x, res.gradient);
  if (!std::isfinite(res.value)) {
    res.message = "objective not finite at the starting point";
    return res;
  }

  const bool preset = options.initial_inverse_hessian.rows() == n &&
                      options.initial_inverse_hessian.cols() == n;
  Eigen::MatrixXd h_inv =
      preset ? options.initial_inverse_hessian : Eigen::MatrixXd::Identity(n, n);
  bool fresh_hessian = !preset;
  Eigen::VectorXd x_new(n), g_new(n);

  for (int it = 0; it < options.max_iterations; ++it) {
    res.iterations = it;
    if (res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      res.converged = true;
      res.message = "gradient tolerance reached";
      return res;
    }

    Eigen::VectorXd dir = -h_inv * res.gradient;
    double slope = res.gradient.dot(dir);
    if (!(slope < 0.0)) {
      h_inv.setIdentity(n, n);
      fresh_hessian = true;
      dir = -res.gradient;
      slope = -res.gradient.squaredNorm();
    }
    if (fresh_hessian) {
      // keep the very first trial step to unit length in max-norm
      const double scale = dir.lpNorm<Eigen::Infinity>();
      if (scale > 1.0) {
        dir /= scale;
        slope /= scale;
      }
    }

    double step = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < options.max_backtracks; ++bt) {
      x_new = res.x + step * dir;
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= res.value + options.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= options.shrink;
    }
    if (!accepted) {
      if (!fresh_hessian) {
        h_inv.setIdentity(n, n);
        fresh_hessian = true;
        continue;
      }
      res.message = "line search failed";
      return res;
    }

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - res.gradient;
    const double f_old = res.value;
    res.x = x_new;
    res.value = f_new;
    res.gradient = g_new;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh_hessian) {
        h_inv *= sy / y.squaredNorm();
        fresh_hessian = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h_inv * y;
      h_inv += ((sy + y.dot(hy)) * rho * rho) * (s * s.transpose()) -
               rho * (hy * s.transpose() + s * hy.transpose());
    }

    if (std::abs(f_old - f_new) <=
        options.relative_tolerance * std::max({std::abs(f_old), std::abs(f_new), 1.0})) {
      res.iterations = it + 1;
      res.converged = true;
      res.message = "relative objective change below tolerance";
      return res;
    }
  }
  res.iterations = options.max_iterations;
  if (res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
    res.converged = true;
    res.message = "gradient tolerance reached";
  } else {
    res.message = "iteration limit reached";
  }
  return res;
}

}  // namespace msrisk::optim
