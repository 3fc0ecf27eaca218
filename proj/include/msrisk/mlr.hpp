#pragma once

// Baseline-category multinomial logit for the next-month state, one model per
// starting state. The starting state is the baseline (linear predictor 0).

#include <Eigen/Core>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "msrisk/panel.hpp"
#include "msrisk/spline.hpp"
#include "msrisk/state.hpp"

namespace msrisk::mlr {

class MlrError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MlrSpec {
  State starting_state = State::P;
  std::vector<std::string> covariates;  // entered linearly
  std::vector<SplineSpec> splines;      // entered through their basis

  /// Baseline first: P -> {P,D,S,W}, D -> {D,P,S,W}.
  std::vector<State> destinations() const;
  /// Column names of the design, "(intercept)" first; spline columns are
  /// "<covariate>:ns<k>".
  std::vector<std::string> term_names() const;
  std::size_t num_terms() const;
  void validate() const;
};

struct MlrDesign {
  Eigen::MatrixXd x;
  /// Index into MlrSpec::destinations() of the next-month state.
  std::vector<int> response;
  /// Calendar month of the later record of each pair.
  std::vector<int> calendar_month;
  /// Loan index (into PanelDataset::loans()) of each row.
  std::vector<std::size_t> loan;

  std::size_t rows() const { return response.size(); }
};

/// Design row for one covariate vector laid out as the panel's columns.
Eigen::VectorXd design_row(const MlrSpec& spec, const std::vector<std::string>& covariate_names,
                           const std::vector<double>& covariates);

/// One row per consecutive record pair whose earlier record is in the
/// starting state; covariates come from the earlier record.
MlrDesign build_design(const MlrSpec& spec, const panel::PanelDataset& panel);

struct MlrOptions {
  double gradient_tolerance = 1e-6;
  int max_iterations = 1000;
  /// Penalty weight on the squared coefficient norm (0 = plain MLE).
  double ridge = 0.0;
  /// |coefficient| beyond this while the likelihood still rises along the
  /// coefficient ray is reported as separation.
  double separation_bound = 30.0;
};

struct MlrFit {
  State starting_state = State::P;
  std::vector<State> destinations;  // baseline first
  std::vector<std::string> terms;
  /// (J-1) x p, one row per non-baseline destination in destinations order.
  Eigen::MatrixXd coefficients;
  Eigen::MatrixXd std_errors;
  double loglik = 0.0;
  double null_loglik = 0.0;
  double aic = 0.0;
  std::size_t n_obs = 0;
  int iterations = 0;
  bool converged = false;

  std::size_t num_coefficients() const {
    return static_cast<std::size_t>(coefficients.size());
  }
  int destination_index(State s) const;
};

/// Log-likelihood and its gradient (same layout as the coefficients,
/// flattened row-major) at B.
double mlr_loglik(const Eigen::MatrixXd& coefficients, const MlrDesign& design,
                  Eigen::VectorXd* gradient = nullptr);

MlrFit fit_mlr(const MlrSpec& spec, const MlrDesign& design, const MlrOptions& options = {});

/// Probabilities over destinations (baseline first) for a design row.
Eigen::VectorXd predict_probs(const MlrFit& fit, const Eigen::VectorXd& x);
/// Softmax with the baseline predictor fixed at zero.
Eigen::VectorXd baseline_softmax(const Eigen::VectorXd& non_baseline_eta);

/// p(a1|x) / p(a2|x).
double relative_odds(const MlrFit& fit, const Eigen::VectorXd& x, State a1, State a2);

double mcfadden_r2(const MlrFit& fit);

/// destination,term,estimate,std_error
std::string coefficients_to_csv(const MlrFit& fit);
/// key: value lines: starting state, covariates, spline knots, fit stats.
std::string fit_summary(const MlrFit& fit, const MlrSpec& spec);

struct AucRow {
  State destination = State::P;
  std::size_t sample_size = 0;
  double auc = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
};
/// One-vs-rest AUC with DeLong 95% interval for each destination that has
/// both outcomes in the sample.
std::vector<AucRow> destination_auc(const MlrFit& fit, const MlrDesign& design, double level = 0.95);
std::string auc_to_csv(const std::vector<AucRow>& rows);

}  // namespace msrisk::mlr
