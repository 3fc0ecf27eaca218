#pragma once

// Synthetic loan portfolios whose monthly transitions follow a known
// baseline-category multinomial logit. Used as ground truth for recovery
// checks and as stand-in data for the command-line pipeline.

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "msrisk/markov.hpp"
#include "msrisk/panel.hpp"
#include "msrisk/state.hpp"

namespace msrisk::sim {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// x_t = mean + persistence * (x_{t-1} - mean) + N(0, sd^2), started from
/// its stationary law.
struct MacroSpec {
  std::string name;
  double mean = 0.0;
  double persistence = 0.0;
  double sd = 0.0;
};

enum class Distribution { normal, uniform, bernoulli };

/// Loan-level covariate drawn once at origination. normal: (a=mean, b=sd);
/// uniform: [a, b); bernoulli: P(1) = a.
struct LoanCovariateSpec {
  std::string name;
  Distribution distribution = Distribution::normal;
  double a = 0.0;
  double b = 1.0;
};

struct SimConfig {
  std::size_t n_loans = 1000;
  int n_months = 192;
  int first_month = 1;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::vector<MacroSpec> macro;
  std::vector<LoanCovariateSpec> loan_covariates;
  /// Per starting state (P, D): (J-1) x (1 + #covariates); rows follow the
  /// non-baseline destinations (P: D,S,W; D: P,S,W), columns the intercept
  /// then covariate_names().
  std::map<State, Eigen::MatrixXd> coefficients;
  /// Share of loans already on book in the first month; the rest originate
  /// uniformly over later months. Ignored when `origination_weights` is set.
  double initial_share = 0.5;
  /// Optional cohort weights, one per month of the window.
  std::vector<double> origination_weights;

  /// Macro names then loan-level names.
  std::vector<std::string> covariate_names() const;
  panel::MonthWindow window() const { return {first_month, first_month + n_months - 1}; }
  void validate() const;
};

/// Non-baseline destinations of a starting state in coefficient-row order.
std::array<State, 3> coefficient_rows(State from);

/// Reads an INI scenario. Sections: [portfolio], [macro:<name>],
/// [loan:<name>], [origination], [coefficients:P], [coefficients:D].
SimConfig load_scenario(const std::filesystem::path& path);
SimConfig parse_scenario(const std::string& content);

/// Macro paths by name, one value per month of the window.
std::map<std::string, std::vector<double>> simulate_macro(const SimConfig& config);

/// True transition probabilities for one calendar month: the average of the
/// loan-level softmax over loans at risk in the previous month.
struct TrueMonth {
  int calendar_month = 0;
  markov::Matrix4 p = markov::Matrix4::Identity();
  std::array<std::size_t, 2> at_risk{};  // loans in P and D at month - 1

  bool row_defined(State from) const {
    return is_absorbing(from) || at_risk[static_cast<std::size_t>(index_of(from))] > 0;
  }
};

struct GroundTruth {
  std::vector<std::string> covariate_names;
  std::map<State, Eigen::MatrixXd> coefficients;
  int first_month = 1;
  std::map<std::string, std::vector<double>> macro_paths;
  std::vector<TrueMonth> months;

  /// As monthly matrices; rows without loans at risk are undefined.
  markov::TimeVaryingMatrices true_matrices() const;
};

struct Simulation {
  panel::PanelDataset panel;
  GroundTruth truth;
};

Simulation simulate_portfolio(const SimConfig& config);

/// Long CSV: kind,calendar_month,from_state,to_state,term,value with kind in
/// {coefficient, matrix, at_risk, macro}.
std::string truth_to_csv(const GroundTruth& truth);
void export_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth load_truth(const std::filesystem::path& path);
GroundTruth parse_truth(const std::string& content);

}  // namespace msrisk::sim
