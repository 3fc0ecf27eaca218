#include "msrisk/betareg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "msrisk/csv.hpp"
#include "msrisk/diagnostics.hpp"
#include "msrisk/optimize.hpp"

namespace msrisk::betareg {

namespace {

namespace bm = boost::math;
using NoThrow = bm::policies::policy<bm::policies::domain_error<bm::policies::errno_on_error>,
                                     bm::policies::pole_error<bm::policies::errno_on_error>,
                                     bm::policies::overflow_error<bm::policies::errno_on_error>,
                                     bm::policies::evaluation_error<bm::policies::errno_on_error>>;

double digamma(double x) { return bm::digamma(x, NoThrow()); }
double trigamma(double x) { return bm::trigamma(x, NoThrow()); }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_shapes(const BetaRegSpec& spec, const Eigen::VectorXd& beta,
                  const Eigen::VectorXd& theta, const BetaRegData& data) {
  if (static_cast<std::size_t>(beta.size()) != spec.num_mean_params() ||
      static_cast<std::size_t>(data.x.cols()) != spec.num_mean_params())
    throw BetaRegError("mean coefficient count does not match the design");
  if (static_cast<std::size_t>(theta.size()) != spec.num_precision_params() ||
      static_cast<std::size_t>(data.z.cols()) != spec.num_precision_params())
    throw BetaRegError("precision coefficient count does not match the design");
  if (data.x.rows() != data.rows() || data.z.rows() != data.rows())
    throw BetaRegError("design row count does not match the response");
}

void check_response(const BetaRegData& data) {
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double y = data.y[i];
    if (!(y > 0.0 && y < 1.0))
      throw BetaRegError("response row " + std::to_string(i + 1) + " = " +
                         csv::format_double(y) + " is not strictly inside (0,1)");
  }
}

/// Log-likelihood and optionally its gradient. Returns NaN when a linear
/// predictor leaves the admissible range.
double evaluate(const BetaRegSpec& spec, const Eigen::VectorXd& beta,
                const Eigen::VectorXd& theta, const BetaRegData& data, double eta_bound,
                Eigen::VectorXd* grad) {
  const Eigen::Index p1 = beta.size();
  if (grad) grad->setZero(p1 + theta.size());
  double ll = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double eta1 = data.x.row(i).dot(beta);
    const double eta2 = data.z.row(i).dot(theta);
    if (!std::isfinite(eta1) || !(std::abs(eta2) <= eta_bound)) return kNaN;
    const double mu = spec.mean_link.inverse(eta1);
    const double phi = spec.precision_link.inverse(eta2);
    if (!(mu > 0.0 && mu < 1.0) || !(phi > 0.0) || !std::isfinite(phi)) return kNaN;
    const double a = mu * phi;
    const double b = (1.0 - mu) * phi;
    const double y = data.y[i];
    const double log_y = std::log(y);
    const double log_1my = std::log1p(-y);
    ll += std::lgamma(phi) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * log_y +
          (b - 1.0) * log_1my;
    if (grad) {
      const double psi_b = digamma(b);
      const double resid = (log_y - log_1my) - (digamma(a) - psi_b);
      const double d_mu = phi * resid;
      const double d_phi = mu * resid + log_1my - psi_b + digamma(phi);
      grad->head(p1) += (d_mu * spec.mean_link.mu_eta(eta1)) * data.x.row(i).transpose();
      grad->tail(theta.size()) +=
          (d_phi * spec.precision_link.mu_eta(eta2)) * data.z.row(i).transpose();
    }
  }
  if (grad && !grad->allFinite()) return kNaN;
  return std::isfinite(ll) ? ll : kNaN;
}

std::vector<std::string> column_names(const std::vector<std::string>& covs) {
  std::vector<std::string> out{"(intercept)"};
  out.insert(out.end(), covs.begin(), covs.end());
  return out;
}

void check_rank(const Eigen::MatrixXd& m, const std::vector<std::string>& names,
                const char* which) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  if (qr.rank() == m.cols()) return;
  std::string bad;
  const auto& perm = qr.colsPermutation().indices();
  const Eigen::Index r = qr.rank();
  Eigen::MatrixXd kept(m.rows(), r);
  for (Eigen::Index j = 0; j < r; ++j) kept.col(j) = m.col(perm[j]);
  for (Eigen::Index j = r; j < m.cols(); ++j) {
    if (!bad.empty()) bad += "; ";
    bad += names[static_cast<std::size_t>(perm[j])];
    // Name the kept columns that reproduce it.
    const Eigen::VectorXd c = kept.colPivHouseholderQr().solve(m.col(perm[j]));
    std::string with;
    for (Eigen::Index q = 0; q < r; ++q)
      if (std::abs(c[q]) > 1e-8) with += (with.empty() ? "" : ", ") + names[static_cast<std::size_t>(perm[q])];
    if (!with.empty()) bad += " (with " + with + ")";
  }
  throw BetaRegError(std::string(which) + " design is rank deficient; collinear column(s): " +
                     bad);
}

void fill_fitted(const BetaRegSpec& spec, const BetaRegData& data, BetaRegFit& fit) {
  const Eigen::VectorXd eta1 = data.x * fit.beta;
  const Eigen::VectorXd eta2 = data.z * fit.theta;
  fit.fitted_mu.resize(data.rows());
  fit.fitted_phi.resize(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    fit.fitted_mu[i] = spec.mean_link.inverse(eta1[i]);
    fit.fitted_phi[i] = spec.precision_link.inverse(eta2[i]);
  }
}

double squared_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double saa = da.squaredNorm();
  const double sbb = db.squaredNorm();
  const auto n = static_cast<double>(a.size());
  const double tiny_a = n * std::pow(1e-12 * std::max(1.0, std::abs(a.mean())), 2);
  const double tiny_b = n * std::pow(1e-12 * std::max(1.0, std::abs(b.mean())), 2);
  if (!(saa > tiny_a) || !(sbb > tiny_b))
    throw BetaRegError("pseudo R2 undefined: constant response or constant predictor");
  const double sab = da.dot(db);
  return std::clamp(sab * sab / (saa * sbb), 0.0, 1.0);
}

}  // namespace

void BetaRegSpec::validate() const {
  if (!mean_link.unit_interval())
    throw BetaRegError("mean link '" + std::string(mean_link.name()) +
                       "' does not map onto (0,1)");
  if (precision_link.kind() != LinkKind::log)
    throw BetaRegError("precision link must be log, got '" + std::string(precision_link.name()) +
                       "'");
}

BetaRegData make_data(const BetaRegSpec& spec, const std::vector<double>& y,
                      const std::map<std::string, std::vector<double>>& columns) {
  const auto n = static_cast<Eigen::Index>(y.size());
  auto design = [&](const std::vector<std::string>& names) {
    Eigen::MatrixXd m(n, static_cast<Eigen::Index>(names.size()) + 1);
    m.col(0).setOnes();
    for (std::size_t j = 0; j < names.size(); ++j) {
      auto it = columns.find(names[j]);
      if (it == columns.end()) throw BetaRegError("missing covariate '" + names[j] + "'");
      if (it->second.size() != y.size())
        throw BetaRegError("covariate '" + names[j] + "' has the wrong length");
      m.col(static_cast<Eigen::Index>(j) + 1) =
          Eigen::Map<const Eigen::VectorXd>(it->second.data(), n);
    }
    return m;
  };
  BetaRegData d;
  d.y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  d.x = design(spec.mean_covariates);
  d.z = design(spec.precision_covariates);
  return d;
}

BetaRegData select_rows(const BetaRegData& data, const std::vector<std::size_t>& keep) {
  BetaRegData out;
  const auto n = static_cast<Eigen::Index>(keep.size());
  out.y.resize(n);
  out.x.resize(n, data.x.cols());
  out.z.resize(n, data.z.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(keep[static_cast<std::size_t>(i)]);
    out.y[i] = data.y[r];
    out.x.row(i) = data.x.row(r);
    out.z.row(i) = data.z.row(r);
  }
  return out;
}

Eigen::VectorXd BetaRegFit::std_errors() const {
  Eigen::VectorXd se(info_inverse.rows());
  for (Eigen::Index j = 0; j < se.size(); ++j) {
    const double v = info_inverse(j, j);
    se[j] = v > 0.0 ? std::sqrt(v) : kNaN;
  }
  return se;
}

Eigen::VectorXd BetaRegFit::coefficients() const {
  Eigen::VectorXd c(beta.size() + theta.size());
  c << beta, theta;
  return c;
}

double beta_log_density(double y, double mu, double phi) {
  if (!(y > 0.0 && y < 1.0))
    throw BetaRegError("beta density needs y strictly inside (0,1), got " +
                       csv::format_double(y));
  if (!(mu > 0.0 && mu < 1.0)) throw BetaRegError("beta mean must lie in (0,1)");
  if (!(phi > 0.0)) throw BetaRegError("beta precision must be positive");
  const double a = mu * phi;
  const double b = (1.0 - mu) * phi;
  return std::lgamma(phi) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(y) +
         (b - 1.0) * std::log1p(-y);
}

double loglik(const BetaRegSpec& spec, const Eigen::VectorXd& beta, const Eigen::VectorXd& theta,
              const BetaRegData& data, const FitOptions& options) {
  check_shapes(spec, beta, theta, data);
  check_response(data);
  const double ll = evaluate(spec, beta, theta, data, options.precision_eta_bound, nullptr);
  if (!std::isfinite(ll))
    throw BetaRegError("linear predictor outside the admissible range (precision bound " +
                       csv::format_double(options.precision_eta_bound) + ")");
  return ll;
}

Eigen::VectorXd score(const BetaRegSpec& spec, const Eigen::VectorXd& beta,
                      const Eigen::VectorXd& theta, const BetaRegData& data,
                      const FitOptions& options) {
  check_shapes(spec, beta, theta, data);
  check_response(data);
  Eigen::VectorXd g;
  const double ll = evaluate(spec, beta, theta, data, options.precision_eta_bound, &g);
  if (!std::isfinite(ll))
    throw BetaRegError("linear predictor outside the admissible range (precision bound " +
                       csv::format_double(options.precision_eta_bound) + ")");
  return g;
}

Eigen::MatrixXd observed_information(const BetaRegSpec& spec, const Eigen::VectorXd& beta,
                                     const Eigen::VectorXd& theta, const BetaRegData& data) {
  const Eigen::Index p1 = beta.size();
  const Eigen::Index k = p1 + theta.size();
  Eigen::VectorXd params(k);
  params << beta, theta;
  Eigen::MatrixXd h(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double step = 1e-5 * std::max(1.0, std::abs(params[j]));
    Eigen::VectorXd up = params, down = params;
    up[j] += step;
    down[j] -= step;
    Eigen::VectorXd gu, gd;
    const double lu = evaluate(spec, up.head(p1), up.tail(k - p1), data, INFINITY, &gu);
    const double ld = evaluate(spec, down.head(p1), down.tail(k - p1), data, INFINITY, &gd);
    if (!std::isfinite(lu) || !std::isfinite(ld))
      throw BetaRegError("observed information: score undefined near the estimate");
    h.col(j) = -(gu - gd) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

BetaRegFit fit_vdbr(const BetaRegSpec& spec, const BetaRegData& data, const FitOptions& options) {
  spec.validate();
  const auto n = static_cast<std::size_t>(data.rows());
  if (n < spec.num_params() + 5)
    throw BetaRegError("beta regression needs at least " + std::to_string(spec.num_params() + 5) +
                       " observations, got " + std::to_string(n));
  Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.num_mean_params()));
  Eigen::VectorXd theta0 =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.num_precision_params()));
  check_shapes(spec, beta0, theta0, data);
  check_response(data);
  check_rank(data.x, column_names(spec.mean_covariates), "mean");
  check_rank(data.z, column_names(spec.precision_covariates), "precision");

  // Start: least squares of g(y) on X, then a moment estimate of phi.
  Eigen::VectorXd gy(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) gy[i] = spec.mean_link.link(data.y[i]);
  beta0 = data.x.colPivHouseholderQr().solve(gy);
  const Eigen::VectorXd eta0 = data.x * beta0;
  const double dof = static_cast<double>(n) - static_cast<double>(beta0.size());
  const double sigma2 = (gy - eta0).squaredNorm() / dof;
  double phi_sum = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double mu = std::clamp(spec.mean_link.inverse(eta0[i]), 1e-10, 1.0 - 1e-10);
    const double d = spec.mean_link.mu_eta(eta0[i]);
    const double var = sigma2 * d * d;
    phi_sum += mu * (1.0 - mu) / var;
  }
  double phi0 = phi_sum / static_cast<double>(n) - 1.0;
  if (!std::isfinite(phi0) || phi0 < 0.1) phi0 = 1.0;
  theta0[0] = spec.precision_link.link(std::min(phi0, 1e8));

  const Eigen::Index p1 = beta0.size();
  const Eigen::Index k = p1 + theta0.size();
  const double bound = options.precision_eta_bound;
  optim::Objective objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g) {
    Eigen::VectorXd grad;
    const double ll = evaluate(spec, w.head(p1), w.tail(k - p1), data, bound, &grad);
    if (!std::isfinite(ll)) return std::numeric_limits<double>::infinity();
    g = -grad;
    return -ll;
  };
  Eigen::VectorXd start(k);
  start << beta0, theta0;
  optim::BfgsOptions bo;
  bo.gradient_tolerance = options.gradient_tolerance;
  bo.relative_tolerance = options.relative_tolerance;
  bo.max_iterations = options.max_iterations;
  const optim::BfgsResult r = optim::minimize_bfgs(objective, start, bo);

  BetaRegFit fit;
  fit.beta = r.x.head(p1);
  fit.theta = r.x.tail(k - p1);
  fit.loglik = -r.value;
  fit.gradient = -r.gradient;
  fit.iterations = r.iterations;
  fit.converged = r.converged;
  fit.message = r.message;
  fit.n_obs = n;

  // BFGS may stop on the relative-change rule with a gradient still above
  // tolerance; a few Newton steps on the observed information finish the job.
  Eigen::MatrixXd info = observed_information(spec, fit.beta, fit.theta, data);
  for (int it = 0; it < 10 && fit.converged &&
                   fit.gradient.cwiseAbs().maxCoeff() > options.gradient_tolerance;
       ++it) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) break;
    const Eigen::VectorXd step = ldlt.solve(fit.gradient);
    Eigen::VectorXd w(k);
    w << fit.beta, fit.theta;
    bool improved = false;
    for (double t = 1.0; t > 1e-4; t *= 0.5) {
      const Eigen::VectorXd cand = w + t * step;
      Eigen::VectorXd g;
      const double ll = evaluate(spec, cand.head(p1), cand.tail(k - p1), data, bound, &g);
      // Near the optimum the objective is flat to rounding; accept a step
      // that keeps it there and shrinks the gradient.
      const double slack = 1e-12 * std::max(1.0, std::abs(fit.loglik));
      if (std::isfinite(ll) && ll >= fit.loglik - slack &&
          g.cwiseAbs().maxCoeff() < fit.gradient.cwiseAbs().maxCoeff()) {
        fit.beta = cand.head(p1);
        fit.theta = cand.tail(k - p1);
        fit.loglik = ll;
        fit.gradient = g;
        improved = true;
        break;
      }
    }
    if (!improved) break;
    ++fit.iterations;
    info = observed_information(spec, fit.beta, fit.theta, data);
  }
  fill_fitted(spec, data, fit);

  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  if (lu.isInvertible()) {
    fit.info_inverse = lu.inverse();
  } else {
    fit.info_inverse = Eigen::MatrixXd::Constant(k, k, kNaN);
  }
  if (!fit.converged)
    throw BetaRegConvergenceError("beta regression did not converge: " + r.message, fit);
  return fit;
}

double predict_mean(const BetaRegFit& fit, const BetaRegSpec& spec, const Eigen::VectorXd& x_row) {
  if (x_row.size() != fit.beta.size())
    throw BetaRegError("prediction row has " + std::to_string(x_row.size()) +
                       " entries, expected " + std::to_string(fit.beta.size()));
  return spec.mean_link.inverse(x_row.dot(fit.beta));
}

double predict_mean(const BetaRegFit& fit, const BetaRegSpec& spec,
                    const std::map<std::string, double>& covariates) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(spec.num_mean_params()));
  x[0] = 1.0;
  for (std::size_t j = 0; j < spec.mean_covariates.size(); ++j) {
    auto it = covariates.find(spec.mean_covariates[j]);
    if (it == covariates.end())
      throw BetaRegError("missing covariate '" + spec.mean_covariates[j] + "' for prediction");
    x[static_cast<Eigen::Index>(j) + 1] = it->second;
  }
  return predict_mean(fit, spec, x);
}

Eigen::VectorXd pearson_residuals(const BetaRegFit& fit, const BetaRegData& data) {
  if (fit.fitted_mu.size() != data.rows())
    throw BetaRegError("fitted values do not match the data rows");
  Eigen::VectorXd r(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double mu = fit.fitted_mu[i];
    const double var = mu * (1.0 - mu) / (1.0 + fit.fitted_phi[i]);
    r[i] = (data.y[i] - mu) / std::sqrt(var);
  }
  return r;
}

Eigen::VectorXd leverage(const BetaRegFit& fit, const BetaRegSpec& spec, const BetaRegData& data) {
  if (fit.fitted_mu.size() != data.rows())
    throw BetaRegError("fitted values do not match the data rows");
  const Eigen::VectorXd eta = data.x * fit.beta;
  Eigen::VectorXd w(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double mu = fit.fitted_mu[i];
    const double phi = fit.fitted_phi[i];
    const double d = spec.mean_link.mu_eta(eta[i]);
    w[i] = phi * (trigamma(mu * phi) + trigamma((1.0 - mu) * phi)) * d * d;
  }
  const Eigen::MatrixXd xtwx = data.x.transpose() * w.asDiagonal() * data.x;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(xtwx);
  if (!lu.isInvertible()) throw BetaRegError("leverage: weighted cross-product is singular");
  const Eigen::MatrixXd inv = lu.inverse();
  Eigen::VectorXd h(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const Eigen::VectorXd xi = data.x.row(i).transpose();
    h[i] = w[i] * xi.dot(inv * xi);
  }
  return h;
}

double cooks_distance_value(double h, double r, std::size_t p) {
  if (p == 0) throw BetaRegError("Cook's distance needs p >= 1");
  if (h >= 1.0) return std::numeric_limits<double>::infinity();
  const double one_minus = 1.0 - h;
  return h * r * r / (static_cast<double>(p) * one_minus * one_minus);
}

Eigen::VectorXd cooks_distance(const BetaRegFit& fit, const BetaRegSpec& spec,
                               const BetaRegData& data) {
  const Eigen::VectorXd h = leverage(fit, spec, data);
  const Eigen::VectorXd r = pearson_residuals(fit, data);
  Eigen::VectorXd d(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i)
    d[i] = cooks_distance_value(h[i], r[i], static_cast<std::size_t>(fit.beta.size()));
  return d;
}

double pseudo_r2_ferrari(const BetaRegFit& fit, const BetaRegSpec& spec, const BetaRegData& data) {
  const Eigen::VectorXd eta = data.x * fit.beta;
  Eigen::VectorXd gy(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) gy[i] = spec.mean_link.link(data.y[i]);
  return squared_correlation(eta, gy);
}

namespace {

InfluenceRefit refit_without(const BetaRegFit& fit, const BetaRegSpec& spec,
                             const BetaRegData& data, std::vector<std::size_t> removed,
                             const FitOptions& options) {
  InfluenceRefit out;
  out.r2_before = pseudo_r2_ferrari(fit, spec, data);
  if (removed.empty()) {
    out.fit = fit;
    out.r2_after = out.r2_before;
    return out;
  }
  std::vector<bool> drop(static_cast<std::size_t>(data.rows()), false);
  for (auto i : removed) drop[i] = true;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < drop.size(); ++i)
    if (!drop[i]) keep.push_back(i);
  const BetaRegData reduced = select_rows(data, keep);
  out.fit = fit_vdbr(spec, reduced, options);
  out.r2_after = pseudo_r2_ferrari(out.fit, spec, reduced);
  out.removed = std::move(removed);
  return out;
}

std::vector<std::size_t> by_decreasing_distance(const Eigen::VectorXd& d) {
  std::vector<std::size_t> order(static_cast<std::size_t>(d.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return d[static_cast<Eigen::Index>(a)] > d[static_cast<Eigen::Index>(b)];
  });
  return order;
}

}  // namespace

InfluenceRefit remove_influential_and_refit(const BetaRegFit& fit, const BetaRegSpec& spec,
                                            const BetaRegData& data, std::size_t k,
                                            const FitOptions& options) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (k + spec.num_params() >= n)
    throw BetaRegError("cannot remove " + std::to_string(k) + " of " + std::to_string(n) +
                       " observations");
  auto order = by_decreasing_distance(cooks_distance(fit, spec, data));
  order.resize(k);
  return refit_without(fit, spec, data, std::move(order), options);
}

InfluenceRefit remove_influential_above(const BetaRegFit& fit, const BetaRegSpec& spec,
                                        const BetaRegData& data, double threshold,
                                        const FitOptions& options) {
  const Eigen::VectorXd d = cooks_distance(fit, spec, data);
  auto order = by_decreasing_distance(d);
  std::size_t k = 0;
  while (k < order.size() && d[static_cast<Eigen::Index>(order[k])] > threshold) ++k;
  if (k + spec.num_params() >= order.size())
    throw BetaRegError("threshold would remove too many observations");
  order.resize(k);
  return refit_without(fit, spec, data, std::move(order), options);
}

namespace {

// log of a Gamma(shape, 1) draw; small shapes go through
// Gamma(shape + 1) * U^(1/shape) so the draw does not underflow.
double log_gamma_draw(double shape, std::mt19937_64& rng) {
  if (shape >= 1.0) return std::log(std::gamma_distribution<double>(shape, 1.0)(rng));
  const double g = std::gamma_distribution<double>(shape + 1.0, 1.0)(rng);
  double u = 0.0;
  while (u == 0.0) u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return std::log(g) + std::log(u) / shape;
}

}  // namespace

double draw_beta(double mu, double phi, std::mt19937_64& rng) {
  const double la = log_gamma_draw(mu * phi, rng);
  const double lb = log_gamma_draw((1.0 - mu) * phi, rng);
  // a / (a + b) = 1 / (1 + exp(lb - la)); values beyond double resolution
  // are pulled to the nearest representable interior point.
  const double y = 1.0 / (1.0 + std::exp(lb - la));
  return std::clamp(y, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

std::vector<std::string> coefficient_names(const BetaRegSpec& spec) {
  std::vector<std::string> names;
  for (const auto& c : column_names(spec.mean_covariates)) names.push_back("mean:" + c);
  for (const auto& c : column_names(spec.precision_covariates)) names.push_back("precision:" + c);
  return names;
}

std::string coefficients_to_csv(const BetaRegFit& fit, const BetaRegSpec& spec) {
  const auto names = coefficient_names(spec);
  const Eigen::VectorXd est = fit.coefficients();
  const Eigen::VectorXd se = fit.std_errors();
  std::string out = "coefficient,estimate,std_error,z,p_value\n";
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double z = est[jj] / se[jj];
    const double p = std::isfinite(z) ? std::erfc(std::abs(z) / std::sqrt(2.0)) : kNaN;
    out += names[j] + ',' + csv::format_double(est[jj]) + ',' + csv::format_double(se[jj]) + ',' +
           csv::format_double(z) + ',' + csv::format_double(p) + '\n';
  }
  return out;
}

std::string fit_summary(const BetaRegFit& fit, const BetaRegSpec& spec, const BetaRegData& data) {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s;
  };
  double r2 = kNaN;
  try {
    r2 = pseudo_r2_ferrari(fit, spec, data);
  } catch (const BetaRegError&) {
  }
  std::ostringstream os;
  os << "model: br\n"
     << "mean_link: " << spec.mean_link.name() << '\n'
     << "precision_link: " << spec.precision_link.name() << '\n'
     << "mean_covariates: " << join(spec.mean_covariates) << '\n'
     << "precision_covariates: " << join(spec.precision_covariates) << '\n'
     << "n_obs: " << fit.n_obs << '\n'
     << "loglik: " << csv::format_double(fit.loglik) << '\n'
     << "aic: " << csv::format_double(diagnostics::aic(fit.loglik, static_cast<int>(spec.num_params())))
     << '\n'
     << "pseudo_r2: " << csv::format_double(r2) << '\n'
     << "iterations: " << fit.iterations << '\n'
     << "converged: " << (fit.converged ? "true" : "false") << '\n';
  return os.str();
}

}  // namespace msrisk::betareg
