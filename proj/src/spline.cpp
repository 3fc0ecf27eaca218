#include "msrisk/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msrisk::mlr {

void SplineSpec::validate() const {
  if (!(boundary[0] < boundary[1]))
    throw std::invalid_argument("spline on '" + covariate + "': boundary knots must increase");
  double prev = boundary[0];
  for (double k : interior_knots) {
    if (!(k > prev))
      throw std::invalid_argument("spline on '" + covariate +
                                  "': knots must be strictly increasing inside the boundary");
    prev = k;
  }
  if (!(prev < boundary[1]))
    throw std::invalid_argument("spline on '" + covariate + "': knot beyond upper boundary");
}

double sample_quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SplineSpec resolve_knots(std::string covariate, std::span<const double> values,
                         std::size_t n_interior) {
  if (values.empty())
    throw std::invalid_argument("spline on '" + covariate + "': no data to place knots");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  SplineSpec spec;
  spec.covariate = std::move(covariate);
  spec.boundary = {v.front(), v.back()};
  for (std::size_t k = 1; k <= n_interior; ++k) {
    const double q = sample_quantile(v, static_cast<double>(k) / static_cast<double>(n_interior + 1));
    if (spec.interior_knots.empty() || q > spec.interior_knots.back()) spec.interior_knots.push_back(q);
  }
  // Tied quantiles on discrete data collapse; drop knots that hit a boundary.
  std::erase_if(spec.interior_knots,
                [&](double k) { return !(k > spec.boundary[0] && k < spec.boundary[1]); });
  spec.validate();
  return spec;
}

Eigen::VectorXd natural_spline_basis(const SplineSpec& spec, double x) {
  // Work on the unit-rescaled axis to keep cubes well scaled.
  const double lo = spec.boundary[0];
  const double width = spec.boundary[1] - lo;
  const double u = (x - lo) / width;
  std::vector<double> knots{0.0};
  for (double k : spec.interior_knots) knots.push_back((k - lo) / width);
  knots.push_back(1.0);
  const std::size_t n_knots = knots.size();

  auto cube_plus = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
  const double last = knots.back();
  auto d = [&](std::size_t k) {
    return (cube_plus(u - knots[k]) - cube_plus(u - last)) / (last - knots[k]);
  };

  Eigen::VectorXd out(static_cast<Eigen::Index>(spec.dimension()));
  out[0] = u;
  const double d_last = d(n_knots - 2);
  for (std::size_t k = 0; k + 2 < n_knots; ++k) out[static_cast<Eigen::Index>(k) + 1] = d(k) - d_last;
  return out;
}

}  // namespace msrisk::mlr
