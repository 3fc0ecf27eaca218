#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace msrisk::diagnostics {

class DiagnosticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 2k - 2 loglik.
double aic(double loglik, int n_params);

/// m3 / m2^(3/2) with population central moments.
double fisher_pearson_skewness(std::span<const double> sample);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// One-sample Kolmogorov-Smirnov test against N(0,1) with fixed parameters.
/// The p-value uses the asymptotic Kolmogorov series at sqrt(n) * D.
KsResult ks_test_standard_normal(std::span<const double> sample);

/// Survival function of the Kolmogorov distribution, 100 series terms.
double kolmogorov_survival(double lambda);

double mae(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Stepwise forward selection

/// Fits a model on the given covariates and returns its AIC. May throw to
/// signal a failed fit.
using AicFitFn = std::function<double(const std::vector<std::string>& covariates)>;

struct SelectionStep {
  std::size_t step = 0;
  std::string candidate;  // empty for the starting model
  double aic = 0.0;
};

struct ForwardSelection {
  std::vector<std::string> selected;  // in order of entry
  std::vector<SelectionStep> trace;   // step 0 is the starting model
  std::vector<std::string> warnings;
};

/// Greedy forward selection by AIC, starting from `base` (usually empty).
/// Each step adds the candidate with the lowest AIC; stops when no addition
/// lowers it. Ties go to the candidate that sorts first by name.
ForwardSelection forward_select(const std::vector<std::string>& candidates, const AicFitFn& fit,
                                const std::vector<std::string>& base = {});

std::string selection_to_csv(const ForwardSelection& sel);
std::string ks_to_csv(const KsResult& ks);

}  // namespace msrisk::diagnostics
