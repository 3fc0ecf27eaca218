#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>

#include "msrisk/csv.hpp"
#include "msrisk/markov.hpp"
#include "msrisk/simulator.hpp"
#include "support.hpp"

using namespace msrisk;
using markov::Matrix4;
using markov::TransitionMatrix;
using testing::make_panel;
using S = State;

namespace {

// Published estimate used as sample input; row P sums to 0.99999.
Matrix4 published() {
  Matrix4 m;
  m << 0.98960, 0.00297, 0.00737, 0.00005,  //
      0.02642, 0.94634, 0.01490, 0.01234,   //
      0, 0, 1, 0,                           //
      0, 0, 0, 1;
  return m;
}

// Independent pair scan: loan id -> month -> state.
markov::TransitionCounts pair_scan(const panel::PanelDataset& p) {
  std::map<std::string, std::map<int, State>> paths;
  for (const auto& r : p.records()) paths[r.loan_id][r.calendar_month] = r.state;
  markov::TransitionCounts c;
  for (const auto& [id, path] : paths)
    for (const auto& [m, s] : path) {
      auto next = path.find(m + 1);
      if (next == path.end() || is_absorbing(s)) continue;
      c(s, next->second)++;
    }
  return c;
}

TransitionMatrix random_stochastic(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Matrix4 m = Matrix4::Identity();
  for (int r = 0; r < 2; ++r) {
    double s = 0;
    for (int c = 0; c < 4; ++c) s += (m(r, c) = u(rng));
    m.row(r) /= s;
  }
  return TransitionMatrix::from_rows(m, 1e-12);
}

}  // namespace

TEST_SUITE("markov") {
  TEST_CASE("single-path counts") {
    auto c = markov::count_transitions(make_panel({{"A", 1, {S::P, S::P, S::P, S::P}}}));
    CHECK(c(S::P, S::P) == 3);
    CHECK(c.row_total(S::P) == 3);
    c = markov::count_transitions(make_panel({{"A", 1, {S::P, S::D, S::S}}}));
    CHECK(c(S::P, S::D) == 1);
    CHECK(c(S::D, S::S) == 1);
    CHECK(c.row_total(S::S) == 0);
  }

  TEST_CASE("window restricts counting to pairs ending inside it") {
    const auto p = make_panel({{"A", 1, {S::P, S::P, S::D, S::D, S::W}}});
    const auto c = markov::count_transitions(p, panel::MonthWindow{3, 4});
    CHECK(c(S::P, S::D) == 1);
    CHECK(c(S::D, S::D) == 1);
    CHECK(c(S::P, S::P) == 0);
    CHECK(c(S::D, S::W) == 0);
  }

  TEST_CASE("counts equal a brute-force pair scan on simulated panels") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto sim = sim::simulate_portfolio(testing::small_config(100, 60, seed));
      const auto fast = markov::count_transitions(sim.panel);
      CHECK(fast == pair_scan(sim.panel));
      for (State s : kAllStates) {
        std::uint64_t sum = 0;
        for (State t : kAllStates) sum += fast(s, t);
        CHECK(sum == fast.row_total(s));
      }
    }
  }

  TEST_CASE("homogeneous MLE") {
    markov::TransitionCounts c;
    c(S::P, S::P) = 99;
    c(S::P, S::D) = 1;
    c(S::D, S::D) = 5;
    const auto m = markov::estimate_homogeneous(c);
    CHECK(m(S::P, S::P) == 0.99);
    CHECK(m(S::P, S::D) == 0.01);
    CHECK(m(S::D, S::D) == 1.0);
    CHECK(m(S::S, S::S) == 1.0);
    CHECK(m(S::W, S::W) == 1.0);
    CHECK(m(S::S, S::P) == 0.0);
    CHECK(m.max_row_sum_error() <= 1e-12);

    markov::TransitionCounts empty_d;
    empty_d(S::P, S::P) = 3;
    try {
      markov::estimate_homogeneous(empty_d);
      FAIL("accepted an empty D row");
    } catch (const markov::MarkovError& e) {
      CHECK(std::string(e.what()).find('D') != std::string::npos);
    }
  }

  TEST_CASE("published matrix layout is accepted with a rounding tolerance") {
    CHECK_THROWS_AS(TransitionMatrix::from_rows(published()), markov::MarkovError);
    const auto t = TransitionMatrix::from_rows(published(), 1e-4);
    CHECK(t(S::S, S::S) == 1.0);
    CHECK(t(S::W, S::P) == 0.0);
    Matrix4 bad = published();
    bad(2, 0) = 0.1;
    bad(2, 2) = 0.9;
    CHECK_THROWS_AS(TransitionMatrix::from_rows(bad, 1e-4), markov::MarkovError);
  }

  TEST_CASE("time-varying estimate") {
    const auto p = make_panel({{"A", 1, {S::P, S::D}}});
    const auto tv = markov::estimate_time_varying(p);
    REQUIRE(tv.by_month.size() == 1);
    CHECK(tv.by_month[0].calendar_month == 2);
    CHECK(tv.by_month[0](S::P, S::D) == 1.0);
    CHECK_FALSE(tv.by_month[0].row_defined[index_of(S::D)]);
    CHECK(std::isnan(tv.by_month[0](S::D, S::D)));
    const auto series = tv.series(S::D, S::W);
    CHECK_FALSE(series.points()[0].defined());
  }

  TEST_CASE("pooling identities") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto sim = sim::simulate_portfolio(testing::small_config(300, 48, seed));
      const auto tv = markov::estimate_time_varying(sim.panel);
      const auto pooled = markov::count_transitions(sim.panel);
      CHECK(tv.pooled_counts() == pooled);
      const auto hom = markov::estimate_homogeneous(pooled);
      for (State k : kTransientStates)
        for (State l : kAllStates) {
          double num = 0, den = 0;
          for (const auto& m : tv.by_month) {
            if (!m.row_defined[index_of(k)]) continue;
            const auto w = static_cast<double>(m.counts.row_total(k));
            num += w * m(k, l);
            den += w;
          }
          CHECK(std::abs(num / den - hom(k, l)) <= 1e-12);
        }
      for (const auto& m : tv.by_month)
        for (State k : kTransientStates)
          if (m.row_defined[index_of(k)]) CHECK(std::abs(m.p.row(index_of(k)).sum() - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("sojourn times") {
    auto st = markov::sojourn_times(make_panel({{"A", 1, {S::P, S::P, S::P, S::D}}}));
    REQUIRE(st.durations.count({S::P, S::D}) == 1);
    CHECK(st.durations.at({S::P, S::D}) == std::vector<int>{3});
    st = markov::sojourn_times(make_panel({{"A", 1, {S::P, S::P, S::P}}}));
    CHECK(st.total() == 0);
    st = markov::sojourn_times(make_panel({{"A", 4, {S::D, S::D, S::P}, 7}}));
    CHECK(st.left_censored_spells == 1);
    CHECK(st.durations.at({S::D, S::P}) == std::vector<int>{2});

    const auto sim = sim::simulate_portfolio(testing::small_config(400, 60, 2));
    const auto all = markov::sojourn_times(sim.panel);
    CHECK(all.total() == markov::count_transitions(sim.panel).off_diagonal_total());
  }

  TEST_CASE("sojourn summary statistics") {
    markov::SojournTimes st;
    st.durations[{S::P, S::D}] = {1, 2, 3, 4, 10};
    const auto s = st.summary(S::P, S::D);
    CHECK(s.n == 5);
    CHECK(s.mean == doctest::Approx(4.0));
    CHECK(s.quantiles[2] == doctest::Approx(3.0));
    CHECK(s.quantiles[0] == doctest::Approx(1.4));  // type 7: 1 + 0.4 * (2 - 1)
    CHECK(s.skewness > 0.0);
    st.durations[{S::D, S::P}] = {2, 2};
    CHECK(std::isnan(st.summary(S::D, S::P).skewness));
  }

  TEST_CASE("geometric dwell times under constant hazards") {
    sim::SimConfig cfg;
    cfg.n_loans = 4000;
    cfg.n_months = 300;
    cfg.seed = 17;
    cfg.initial_share = 1.0;
    Eigen::MatrixXd p(3, 1), d(3, 1);
    // From P: 5% to D, 5% to S, nothing to W (relative to 90% staying).
    p << std::log(0.05 / 0.9), std::log(0.05 / 0.9), -50.0;
    d << 0.0, 0.0, 0.0;
    cfg.coefficients = {{S::P, p}, {S::D, d}};
    const auto simulated = sim::simulate_portfolio(cfg);
    const auto st = markov::sojourn_times(simulated.panel);
    const auto& dwell = st.durations.at({S::P, S::D});
    const double q = 0.1;
    const int bins = 30;
    std::vector<double> obs(bins + 1, 0.0);
    for (int k : dwell) obs[std::min(k, bins + 1) - 1] += 1.0;
    double chi2 = 0.0;
    const auto n = static_cast<double>(dwell.size());
    for (int k = 1; k <= bins + 1; ++k) {
      const double pk = k <= bins ? std::pow(1 - q, k - 1) * q : std::pow(1 - q, bins);
      const double e = n * pk;
      chi2 += (obs[k - 1] - e) * (obs[k - 1] - e) / e;
    }
    const boost::math::chi_squared dist(bins);
    CHECK(chi2 < boost::math::quantile(dist, 0.999));
  }

  TEST_CASE("matrix product") {
    const auto t = TransitionMatrix::from_rows(published(), 1e-4);
    const auto id = TransitionMatrix::identity();
    CHECK(markov::matrix_product(t, id).values() == t.values());
    const auto t2 = markov::matrix_product(t, t);
    const double oracle = 0.98960 * 0.00297 + 0.00297 * 0.94634 + 0.00737 * 0.0 + 0.00005 * 0.0;
    CHECK(std::abs(t2(S::P, S::D) - oracle) <= 1e-15);
    CHECK(std::abs(t2(S::P, S::D) - 0.005750) < 1e-6);

    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 200; ++rep) {
      const auto a = random_stochastic(rng), b = random_stochastic(rng), c = random_stochastic(rng);
      const auto ab = markov::matrix_product(a, b);
      CHECK(ab.max_row_sum_error() <= 1e-10);
      CHECK(ab.values().minCoeff() >= 0.0);
      const auto left = markov::matrix_product(ab, c);
      const auto right = markov::matrix_product(a, markov::matrix_product(b, c));
      CHECK((left.values() - right.values()).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }

  TEST_CASE("matrix CSV round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "msrisk_markov_csv";
    std::filesystem::create_directories(dir);
    const auto sim = sim::simulate_portfolio(testing::small_config(200, 24, 4));
    const auto counts = markov::count_transitions(sim.panel);
    const auto m = markov::estimate_homogeneous(counts);
    csv::write_file(dir / "m.csv", markov::matrix_to_csv(m, &counts));
    const auto back = markov::matrices_from_csv(dir / "m.csv");
    REQUIRE(back.homogeneous);
    CHECK(back.homogeneous->values() == m.values());
    REQUIRE(back.counts);
    CHECK(*back.counts == counts);

    const auto tv = markov::estimate_time_varying(sim.panel);
    csv::write_file(dir / "tv.csv", markov::time_varying_to_csv(tv));
    const auto tv_back = markov::matrices_from_csv(dir / "tv.csv");
    REQUIRE(tv_back.time_varying);
    REQUIRE(tv_back.time_varying->by_month.size() == tv.by_month.size());
    for (std::size_t i = 0; i < tv.by_month.size(); ++i) {
      CHECK(tv_back.time_varying->by_month[i].counts == tv.by_month[i].counts);
      CHECK(tv_back.time_varying->by_month[i].row_defined == tv.by_month[i].row_defined);
    }
  }
}
