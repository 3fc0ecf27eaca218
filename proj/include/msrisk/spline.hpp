#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace msrisk::mlr {

/// Natural cubic regression spline on one covariate: cubic between knots,
/// linear outside the boundary knots.
struct SplineSpec {
  std::string covariate;
  std::vector<double> interior_knots;  // strictly increasing
  std::array<double, 2> boundary{0.0, 1.0};

  std::size_t dimension() const { return interior_knots.size() + 1; }
  /// Throws std::invalid_argument unless knots are strictly increasing and
  /// strictly inside the boundary interval.
  void validate() const;
};

/// Places `n_interior` knots at equally spaced quantiles of `values` and the
/// boundary knots at their min and max.
SplineSpec resolve_knots(std::string covariate, std::span<const double> values,
                         std::size_t n_interior);

/// Basis values at x, dimension() entries. The first is the rescaled
/// covariate itself; the rest are zero left of the first interior region.
Eigen::VectorXd natural_spline_basis(const SplineSpec& spec, double x);

/// Type-7 sample quantile (linear interpolation between order statistics).
double sample_quantile(std::vector<double> values, double prob);

}  // namespace msrisk::mlr
