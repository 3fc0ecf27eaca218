#pragma once

// Beta regression with variable dispersion: separate linear predictors for
// the mean (through a unit-interval link) and the precision (through log).

#include <Eigen/Core>
#include <cstddef>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "msrisk/links.hpp"

namespace msrisk::betareg {

class BetaRegError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BetaRegSpec {
  std::vector<std::string> mean_covariates;       // intercept implicit
  std::vector<std::string> precision_covariates;  // intercept implicit
  Link mean_link{LinkKind::loglog};
  Link precision_link{LinkKind::log};

  std::size_t num_mean_params() const { return mean_covariates.size() + 1; }
  std::size_t num_precision_params() const { return precision_covariates.size() + 1; }
  std::size_t num_params() const { return num_mean_params() + num_precision_params(); }
  /// Throws unless the precision link maps onto (0, inf) and the mean link
  /// onto (0, 1).
  void validate() const;
};

/// Response and the two design matrices, each with a leading intercept
/// column.
struct BetaRegData {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;  // n x (p1+1)
  Eigen::MatrixXd z;  // n x (p2+1)

  Eigen::Index rows() const { return y.size(); }
};

/// Assembles designs from named columns. Throws naming any missing column.
BetaRegData make_data(const BetaRegSpec& spec, const std::vector<double>& y,
                      const std::map<std::string, std::vector<double>>& columns);

/// Rows `keep` of `data`, in the given order.
BetaRegData select_rows(const BetaRegData& data, const std::vector<std::size_t>& keep);

struct BetaRegFit {
  Eigen::VectorXd beta;   // mean coefficients, intercept first
  Eigen::VectorXd theta;  // precision coefficients, intercept first
  double loglik = 0.0;
  Eigen::VectorXd fitted_mu;
  Eigen::VectorXd fitted_phi;
  /// Inverse observed information over (beta, theta).
  Eigen::MatrixXd info_inverse;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
  std::string message;
  std::size_t n_obs = 0;

  Eigen::VectorXd std_errors() const;
  Eigen::VectorXd coefficients() const;
};

/// Thrown when the optimizer stops without converging; carries the best
/// state reached.
class BetaRegConvergenceError : public BetaRegError {
 public:
  BetaRegConvergenceError(const std::string& what, BetaRegFit best)
      : BetaRegError(what), best_(std::move(best)) {}
  const BetaRegFit& best() const { return best_; }

 private:
  BetaRegFit best_;
};

/// log f(y; mu, phi) for the beta law with shape parameters mu*phi and
/// (1-mu)*phi. Throws for y outside (0,1).
double beta_log_density(double y, double mu, double phi);

struct FitOptions {
  double gradient_tolerance = 1e-8;
  double relative_tolerance = 1e-12;
  int max_iterations = 500;
  /// |precision linear predictor| above this is rejected (exp overflow guard).
  double precision_eta_bound = 50.0;
};

double loglik(const BetaRegSpec& spec, const Eigen::VectorXd& beta, const Eigen::VectorXd& theta,
              const BetaRegData& data, const FitOptions& options = {});

/// Analytic gradient of loglik over (beta, theta).
Eigen::VectorXd score(const BetaRegSpec& spec, const Eigen::VectorXd& beta,
                      const Eigen::VectorXd& theta, const BetaRegData& data,
                      const FitOptions& options = {});

/// Maximum likelihood by BFGS from a least-squares / moment start.
BetaRegFit fit_vdbr(const BetaRegSpec& spec, const BetaRegData& data,
                    const FitOptions& options = {});

/// Observed information -d2 loglik by central differences of the score.
Eigen::MatrixXd observed_information(const BetaRegSpec& spec, const Eigen::VectorXd& beta,
                                     const Eigen::VectorXd& theta, const BetaRegData& data);

/// Mean prediction from a design row (intercept included).
double predict_mean(const BetaRegFit& fit, const BetaRegSpec& spec, const Eigen::VectorXd& x_row);
/// Mean prediction from named covariates; throws on a missing name.
double predict_mean(const BetaRegFit& fit, const BetaRegSpec& spec,
                    const std::map<std::string, double>& covariates);

Eigen::VectorXd pearson_residuals(const BetaRegFit& fit, const BetaRegData& data);

/// Diagonal of the Fisher-weighted hat matrix of the mean submodel.
Eigen::VectorXd leverage(const BetaRegFit& fit, const BetaRegSpec& spec, const BetaRegData& data);

/// h r^2 / (p (1-h)^2); +inf when h == 1.
double cooks_distance_value(double h, double r, std::size_t p);
Eigen::VectorXd cooks_distance(const BetaRegFit& fit, const BetaRegSpec& spec,
                               const BetaRegData& data);

/// Squared correlation of the fitted mean predictor with g(y).
double pseudo_r2_ferrari(const BetaRegFit& fit, const BetaRegSpec& spec, const BetaRegData& data);

struct InfluenceRefit {
  BetaRegFit fit;
  std::vector<std::size_t> removed;  // original row indices, by decreasing distance
  double r2_before = 0.0;
  double r2_after = 0.0;
};

/// Drops the `k` rows with the largest Cook's distance and refits.
InfluenceRefit remove_influential_and_refit(const BetaRegFit& fit, const BetaRegSpec& spec,
                                            const BetaRegData& data, std::size_t k,
                                            const FitOptions& options = {});
/// Drops every row whose Cook's distance exceeds `threshold` and refits.
InfluenceRefit remove_influential_above(const BetaRegFit& fit, const BetaRegSpec& spec,
                                        const BetaRegData& data, double threshold,
                                        const FitOptions& options = {});

/// Beta(mu*phi, (1-mu)*phi) draw via two gamma variates.
double draw_beta(double mu, double phi, std::mt19937_64& rng);

/// Coefficient names: "mean:(intercept)", "mean:<cov>", "precision:...".
std::vector<std::string> coefficient_names(const BetaRegSpec& spec);

/// coefficient,estimate,std_error,z,p_value
std::string coefficients_to_csv(const BetaRegFit& fit, const BetaRegSpec& spec);

/// key: value lines (links, covariates, loglik, AIC, pseudo R2, iterations).
std::string fit_summary(const BetaRegFit& fit, const BetaRegSpec& spec, const BetaRegData& data);

}  // namespace msrisk::betareg
