#pragma once

// Small panel builders shared by the test programs.

#include <string>
#include <vector>

#include "msrisk/panel.hpp"
#include "msrisk/simulator.hpp"

namespace testing {

struct LoanPath {
  std::string id;
  int first_month = 1;
  std::vector<msrisk::State> states;
  int first_period = 1;
};

/// One covariate "x" holding the record index, unless `covariate_free`.
inline msrisk::panel::PanelDataset make_panel(const std::vector<LoanPath>& loans,
                                              bool covariate_free = false) {
  std::vector<msrisk::panel::LoanRecord> recs;
  double k = 0.0;
  for (const auto& l : loans)
    for (std::size_t i = 0; i < l.states.size(); ++i) {
      msrisk::panel::LoanRecord r;
      r.loan_id = l.id;
      r.period = l.first_period + static_cast<int>(i);
      r.calendar_month = l.first_month + static_cast<int>(i);
      r.state = l.states[i];
      if (!covariate_free) r.covariates = {k};
      k += 1.0;
      recs.push_back(std::move(r));
    }
  return msrisk::panel::PanelDataset::build(covariate_free ? std::vector<std::string>{}
                                                           : std::vector<std::string>{"x"},
                                            std::move(recs));
}

/// Small scenario with one macro driver and two loan covariates.
inline msrisk::sim::SimConfig small_config(std::size_t loans, int months, std::uint64_t seed) {
  using msrisk::State;
  msrisk::sim::SimConfig c;
  c.n_loans = loans;
  c.n_months = months;
  c.seed = seed;
  c.macro = {{"rate", 0.0, 0.9, 0.3}};
  c.loan_covariates = {{"score", msrisk::sim::Distribution::normal, 0.0, 1.0},
                       {"flag", msrisk::sim::Distribution::bernoulli, 0.3, 0.0}};
  Eigen::MatrixXd p(3, 4), d(3, 4);
  p << -3.5, 0.8, -0.5, 0.3,  //
      -3.5, -0.6, 0.3, -0.2,  //
      -6.0, 0.5, -0.4, 0.2;
  d << -1.5, -0.6, 0.4, 0.0,  //
      -2.5, 0.4, 0.2, 0.0,    //
      -2.5, 0.7, -0.4, 0.3;
  c.coefficients = {{State::P, p}, {State::D, d}};
  c.initial_share = 0.5;
  return c;
}

}  // namespace testing
