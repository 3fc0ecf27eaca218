#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "msrisk/markov.hpp"
#include "msrisk/simulator.hpp"
#include "support.hpp"

using namespace msrisk;
using namespace msrisk::sim;

namespace {

const char* kScenario = R"(; comment line
[portfolio]
loans = 250
months = 48
first_month = 13
seed = 9
threads = 2

[macro:rate]
mean = 2.0
persistence = 0.8
sd = 0.2

[loan:score]
distribution = uniform
min = -1
max = 1

[loan:flag]
distribution = bernoulli
p = 0.25

[origination]
initial_share = 0.6

[coefficients:P]
D = -4.0, 0.5, -0.3, 0.2
S = -4.5, -0.2, 0.1, 0.0
W = -7.0, 0.3, -0.2, 0.1

[coefficients:D]
P = -1.0, -0.4, 0.2, 0.0
S = -2.0, 0.3, 0.1, 0.0
W = -2.2, 0.5, -0.3, 0.1
)";

double lag1_autocorrelation(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v / static_cast<double>(x.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += (x[i] - mean) * (x[i] - mean);
    if (i > 0) num += (x[i] - mean) * (x[i - 1] - mean);
  }
  return num / den;
}

SimConfig macro_only(double persistence, double sd, int months) {
  SimConfig c = testing::small_config(10, months, 3);
  c.macro = {{"rate", 1.5, persistence, sd}};
  return c;
}

}  // namespace

TEST_CASE("scenario parsing") {
  const SimConfig c = parse_scenario(kScenario);
  CHECK(c.n_loans == 250);
  CHECK(c.n_months == 48);
  CHECK(c.first_month == 13);
  CHECK(c.seed == 9);
  CHECK(c.threads == 2);
  REQUIRE(c.macro.size() == 1);
  CHECK(c.macro[0].persistence == 0.8);
  REQUIRE(c.loan_covariates.size() == 2);
  CHECK(c.loan_covariates[0].distribution == Distribution::uniform);
  CHECK(c.loan_covariates[1].a == 0.25);
  CHECK(c.covariate_names() == std::vector<std::string>{"rate", "score", "flag"});
  CHECK(c.window() == panel::MonthWindow{13, 60});
  CHECK(c.coefficients.at(State::D)(0, 0) == -1.0);  // row D->P
  CHECK(c.coefficients.at(State::P)(2, 3) == 0.1);   // row P->W, flag
}

TEST_CASE("scenario errors") {
  std::string s = kScenario;
  CHECK_THROWS_WITH_AS(parse_scenario(s + "[weird]\nx = 1\n"), doctest::Contains("unknown section"), SimError);
  std::string short_row = s;
  short_row.replace(short_row.find("W = -7.0, 0.3, -0.2, 0.1"), 24, "W = -7.0, 0.3");
  CHECK_THROWS_WITH_AS(parse_scenario(short_row), doctest::Contains("needs 4 values"), SimError);
  std::string explosive = s;
  explosive.replace(explosive.find("persistence = 0.8"), 17, "persistence = 1.0");
  CHECK_THROWS_AS(parse_scenario(explosive), SimError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.ini"), std::exception);
}

TEST_CASE("shipped default scenario loads") {
  const SimConfig c = load_scenario(MSRISK_DEFAULT_SCENARIO);
  CHECK(c.n_loans == 5000);
  CHECK(c.n_months == 192);
  CHECK(c.macro.size() == 1);
  CHECK(c.loan_covariates.size() == 2);
}

TEST_CASE("macro paths") {
  const auto flat = simulate_macro(macro_only(0.9, 0.0, 50)).at("rate");
  REQUIRE(flat.size() == 50);
  for (double v : flat) CHECK(v == 1.5);

  const auto noise = simulate_macro(macro_only(0.0, 1.0, 10000)).at("rate");
  CHECK(std::abs(lag1_autocorrelation(noise)) < 0.05);

  const auto ar = simulate_macro(macro_only(0.7, 1.0, 10000)).at("rate");
  CHECK(std::abs(lag1_autocorrelation(ar) - 0.7) < 0.05);

  CHECK(simulate_macro(macro_only(0.7, 1.0, 200)) == simulate_macro(macro_only(0.7, 1.0, 200)));
}

TEST_CASE("degenerate dynamics keep every loan performing") {
  SimConfig c = testing::small_config(200, 24, 4);
  for (auto& [from, b] : c.coefficients) {
    b.setZero();
    b.col(0).setConstant(-60.0);
  }
  const Simulation s = simulate_portfolio(c);
  for (const auto& r : s.panel.records()) CHECK(r.state == State::P);
}

TEST_CASE("determinism across runs and thread counts") {
  SimConfig c = testing::small_config(400, 36, 21);
  const Simulation a = simulate_portfolio(c);
  const Simulation b = simulate_portfolio(c);
  c.threads = 4;
  const Simulation d = simulate_portfolio(c);
  CHECK(panel::panel_to_csv(a.panel) == panel::panel_to_csv(b.panel));
  CHECK(panel::panel_to_csv(a.panel) == panel::panel_to_csv(d.panel));
  CHECK(truth_to_csv(a.truth) == truth_to_csv(d.truth));
  c.seed = 22;
  CHECK(panel::panel_to_csv(simulate_portfolio(c).panel) != panel::panel_to_csv(a.panel));
}

TEST_CASE("simulated histories are well formed") {
  const Simulation s = simulate_portfolio(testing::small_config(500, 60, 8));
  const auto& recs = s.panel.records();
  bool saw_cure = false;
  for (const auto& span : s.panel.loans()) {
    CHECK(recs[span.begin].state == State::P);
    for (std::size_t r = span.begin + 1; r < span.end; ++r) {
      CHECK(recs[r].period == recs[r - 1].period + 1);
      CHECK(recs[r].calendar_month == recs[r - 1].calendar_month + 1);
      CHECK_FALSE(is_absorbing(recs[r - 1].state));
      if (recs[r - 1].state == State::D && recs[r].state == State::P) saw_cure = true;
    }
  }
  CHECK(saw_cure);
}

TEST_CASE("zero coefficients give uniform destinations") {
  SimConfig c = testing::small_config(20000, 3, 13);
  for (auto& [from, b] : c.coefficients) b.setZero();
  c.initial_share = 1.0;
  const Simulation s = simulate_portfolio(c);
  const auto counts = markov::count_transitions(s.panel);
  const double n = static_cast<double>(counts.row_total(State::P));
  const double se = std::sqrt(0.25 * 0.75 / n);
  for (State to : kAllStates) CHECK(std::abs(counts(State::P, to) / n - 0.25) < 3.0 * se);
}

TEST_CASE("empirical monthly rates concentrate on the true probabilities") {
  SimConfig c = testing::small_config(20000, 12, 31);
  c.initial_share = 1.0;
  const Simulation s = simulate_portfolio(c);
  const auto empirical = markov::estimate_time_varying(s.panel);
  int checked = 0, inside = 0;
  for (const auto& truth : s.truth.months) {
    const auto* est = empirical.find(truth.calendar_month);
    if (!est) continue;
    for (State from : kTransientStates) {
      const std::size_t n = truth.at_risk[static_cast<std::size_t>(index_of(from))];
      if (n < 100) continue;
      CHECK(est->counts.row_total(from) == n);
      for (State to : kAllStates) {
        const double p = truth.p(index_of(from), index_of(to));
        const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
        ++checked;
        if (std::abs((*est)(from, to) - p) <= 3.0 * se + 1e-12) ++inside;
      }
    }
  }
  REQUIRE(checked > 40);
  CHECK(static_cast<double>(inside) / checked >= 0.97);
}

TEST_CASE("ground truth export round trip") {
  SimConfig c = parse_scenario(kScenario);
  const Simulation s = simulate_portfolio(c);
  const auto path = std::filesystem::temp_directory_path() / "msrisk_truth_roundtrip.csv";
  export_truth(s.truth, path);
  const GroundTruth back = load_truth(path);
  std::filesystem::remove(path);

  CHECK(back.covariate_names == s.truth.covariate_names);
  CHECK(back.first_month == s.truth.first_month);
  for (State from : kTransientStates) {
    CHECK(back.coefficients.at(from) == c.coefficients.at(from));
  }
  REQUIRE(back.months.size() == s.truth.months.size());
  for (std::size_t i = 0; i < back.months.size(); ++i) {
    CHECK(back.months[i].calendar_month == s.truth.months[i].calendar_month);
    CHECK(back.months[i].at_risk == s.truth.months[i].at_risk);
    CHECK((back.months[i].p - s.truth.months[i].p).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(truth_to_csv(back) == truth_to_csv(s.truth));

  const auto tv = s.truth.true_matrices();
  for (const auto& mm : tv.by_month)
    for (State from : kTransientStates)
      if (mm.row_defined[static_cast<std::size_t>(index_of(from))])
        CHECK(std::abs(mm.p.row(index_of(from)).sum() - 1.0) < 1e-12);
}
