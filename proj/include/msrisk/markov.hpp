#pragma once

// Counting estimators for the four-state loan Markov chain: pooled and
// per-calendar-month transition matrices, sojourn times and products.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "msrisk/panel.hpp"
#include "msrisk/state.hpp"

namespace msrisk::markov {

class MarkovError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Matrix4 = Eigen::Matrix4d;

struct TransitionCounts {
  std::array<std::array<std::uint64_t, kNumStates>, kNumStates> n{};

  std::uint64_t& operator()(State from, State to) { return n[index_of(from)][index_of(to)]; }
  std::uint64_t operator()(State from, State to) const { return n[index_of(from)][index_of(to)]; }
  std::uint64_t row_total(State from) const;
  std::uint64_t off_diagonal_total() const;
  TransitionCounts& operator+=(const TransitionCounts& o);
  bool operator==(const TransitionCounts&) const = default;
};

/// Row-stochastic 4x4 matrix over {P, D, S, W} with unit absorbing rows.
class TransitionMatrix {
 public:
  /// Identity matrix.
  TransitionMatrix();

  /// Validates entries in [0,1], row sums within `tolerance` of 1 and unit
  /// rows for S and W. Published matrices rounded to a few decimals need a
  /// looser tolerance than the default.
  static TransitionMatrix from_rows(const Matrix4& p, double tolerance = 1e-12);

  static TransitionMatrix identity() { return {}; }

  const Matrix4& values() const { return p_; }
  double operator()(State from, State to) const { return p_(index_of(from), index_of(to)); }
  double max_row_sum_error() const;

 private:
  explicit TransitionMatrix(const Matrix4& p) : p_(p) {}
  friend TransitionMatrix matrix_product(const TransitionMatrix&, const TransitionMatrix&);
  Matrix4 p_;
};

/// Standard product a*b. Closed over row-stochastic matrices.
TransitionMatrix matrix_product(const TransitionMatrix& a, const TransitionMatrix& b);

/// Counts consecutive record pairs whose later record falls in `window`
/// (transition during (t'-1, t']). Pairs starting in an absorbing state are
/// ignored.
TransitionCounts count_transitions(const panel::PanelDataset& panel,
                                   std::optional<panel::MonthWindow> window = std::nullopt);

/// n_kl / n_k on P and D rows; S and W rows are unit vectors. Throws when a
/// transient row has no exposure.
TransitionMatrix estimate_homogeneous(const TransitionCounts& counts);

/// One calendar month of the time-varying estimate. Undefined transient rows
/// (no exposure) hold NaN.
struct MonthlyMatrix {
  int calendar_month = 0;
  TransitionCounts counts;
  Matrix4 p = Matrix4::Identity();
  std::array<bool, kNumStates> row_defined{true, true, true, true};

  bool fully_defined() const {
    return row_defined[0] && row_defined[1] && row_defined[2] && row_defined[3];
  }
  double operator()(State from, State to) const { return p(index_of(from), index_of(to)); }
};

struct TimeVaryingMatrices {
  std::vector<MonthlyMatrix> by_month;  // strictly increasing months

  const MonthlyMatrix* find(int month) const;
  TransitionCounts pooled_counts() const;
  /// The (k,l) probability series; months with an undefined row k carry
  /// n_at_risk = 0.
  panel::RateSeries series(State from, State to) const;
};

/// Builds a monthly matrix from counts, marking empty transient rows.
MonthlyMatrix monthly_from_counts(int calendar_month, const TransitionCounts& counts);

/// p_kl(t') = n_kl(t') / n_k(t') for every month from window.first+1 to
/// window.last.
TimeVaryingMatrices estimate_time_varying(const panel::PanelDataset& panel);

struct SojournSummary {
  std::size_t n = 0;
  double mean = 0.0;
  std::array<double, 5> quantiles{};  // 10%, 25%, 50%, 75%, 90%
  double skewness = 0.0;              // NaN when undefined (n < 3 or constant)
};

struct SojournTimes {
  /// (from, to) -> months spent in `from` immediately before the jump.
  std::map<std::pair<State, State>, std::vector<int>> durations;
  /// Spells that began at a loan's first record with period > 1.
  std::size_t left_censored_spells = 0;

  std::size_t total() const;
  SojournSummary summary(State from, State to) const;
};

SojournTimes sojourn_times(const panel::PanelDataset& panel);

// ---------------------------------------------------------------------------
// CSV: from_state,to_state,calendar_month,probability,count

std::string matrix_to_csv(const TransitionMatrix& m, const TransitionCounts* counts = nullptr);
std::string time_varying_to_csv(const TimeVaryingMatrices& tv);

struct MatrixCsv {
  std::optional<TransitionMatrix> homogeneous;
  std::optional<TransitionCounts> counts;
  std::optional<TimeVaryingMatrices> time_varying;
};
/// Reads either layout; rows with an empty calendar_month form the
/// homogeneous matrix.
MatrixCsv matrices_from_csv(const std::filesystem::path& path, double tolerance = 1e-12);

}  // namespace msrisk::markov
