#pragma once

// Longitudinal loan panels: data model, validation, CSV ingestion,
// cluster-preserving resampling and sampling-representativeness checks.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "msrisk/state.hpp"

namespace msrisk::panel {

class PanelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inclusive calendar-month range [first, last].
struct MonthWindow {
  int first = 0;
  int last = 0;
  bool contains(int month) const { return month >= first && month <= last; }
  int length() const { return last - first + 1; }
  bool operator==(const MonthWindow&) const = default;
};

/// One loan-month observation. Covariate values line up with
/// PanelDataset::covariate_names().
struct LoanRecord {
  std::string loan_id;
  int period = 1;          // month on book, >= 1
  int calendar_month = 0;  // calendar month index
  State state = State::P;
  std::vector<double> covariates;
  /// Source row for diagnostics (0 when not loaded from file).
  std::size_t source_row = 0;

  bool operator==(const LoanRecord& o) const {
    return loan_id == o.loan_id && period == o.period && calendar_month == o.calendar_month &&
           state == o.state && covariates == o.covariates;
  }
};

/// Contiguous slice of records belonging to one loan.
struct LoanSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Immutable validated panel. Records are sorted by (loan_id, period).
class PanelDataset {
 public:
  /// Validates and sorts. Throws PanelError naming the offending row on a
  /// duplicate (loan, period), a gap in periods, a transition out of an
  /// absorbing state, a non-finite covariate, or a month outside `window`.
  /// When `window` is omitted it is the span of observed calendar months.
  static PanelDataset build(std::vector<std::string> covariate_names,
                            std::vector<LoanRecord> records,
                            std::optional<MonthWindow> window = std::nullopt);

  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  const std::vector<LoanRecord>& records() const { return records_; }
  const std::vector<LoanSpan>& loans() const { return loans_; }
  const MonthWindow& window() const { return window_; }

  std::size_t num_loans() const { return loans_.size(); }
  const std::string& loan_id(std::size_t loan) const { return records_[loans_[loan].begin].loan_id; }
  /// Calendar month of the loan's first observed record.
  int origination_month(std::size_t loan) const {
    return records_[loans_[loan].begin].calendar_month;
  }
  /// Position of a covariate in the record vectors, or nullopt.
  std::optional<std::size_t> covariate_index(const std::string& name) const;

  /// Number of consecutive-record pairs (1-month transitions).
  std::size_t num_transitions() const { return records_.size() - loans_.size(); }

  /// New panel made of the listed loans (indices into loans()), same window.
  PanelDataset subset(const std::vector<std::size_t>& loan_indices) const;

 private:
  std::vector<std::string> covariate_names_;
  std::vector<LoanRecord> records_;
  std::vector<LoanSpan> loans_;
  MonthWindow window_;
};

/// Column mapping for the long CSV format. Empty `covariates` means "every
/// column that is not one of the four key columns", in file order.
struct CsvSchema {
  std::string loan_id = "loan_id";
  std::string period = "period";
  std::string calendar_month = "calendar_month";
  std::string state = "state";
  std::vector<std::string> covariates;
  std::optional<MonthWindow> window;
};

PanelDataset load_panel(const std::filesystem::path& path, const CsvSchema& schema = {});
/// Writes the default schema: loan_id,period,calendar_month,state,<covariates>.
void save_panel(const PanelDataset& panel, const std::filesystem::path& path);
std::string panel_to_csv(const PanelDataset& panel);

// ---------------------------------------------------------------------------
// Resampling

/// Largest-remainder allocation of `n` units proportional to `weights`,
/// capped by `capacities`. Units that a full stratum cannot take are
/// re-allocated among the remaining strata; each such event adds a warning.
struct Allocation {
  std::vector<std::size_t> counts;
  std::vector<std::string> warnings;
};
Allocation allocate_largest_remainder(const std::vector<double>& weights,
                                      const std::vector<std::size_t>& capacities,
                                      std::size_t n);

struct StratifiedSample {
  PanelDataset panel;
  /// origination month -> number of loans drawn
  std::map<int, std::size_t> allocation;
  std::vector<std::string> warnings;
};

/// Draws `n_loans` whole loan histories, stratified by origination month.
StratifiedSample stratified_sample(const PanelDataset& panel, std::size_t n_loans,
                                   std::uint64_t seed);

/// Loan-level random split; the first element is the training part.
std::pair<PanelDataset, PanelDataset> split_train_valid(const PanelDataset& panel,
                                                        double train_fraction,
                                                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Rate series

struct RatePoint {
  int calendar_month = 0;
  double value = 0.0;  // NaN when n_at_risk == 0
  std::size_t n_at_risk = 0;
  bool defined() const { return n_at_risk > 0; }
  bool operator==(const RatePoint&) const = default;
};

/// Calendar-indexed portfolio-level rates.
class RateSeries {
 public:
  RateSeries() = default;
  /// Throws PanelError unless months are strictly increasing and every
  /// defined value lies in [0,1].
  explicit RateSeries(std::vector<RatePoint> points);

  const std::vector<RatePoint>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  /// Value at `month` when defined.
  std::optional<double> at(int month) const;
  /// Mean of defined values.
  double mean() const;

  bool operator==(const RateSeries&) const = default;

 private:
  std::vector<RatePoint> points_;
};

std::string rate_series_to_csv(const RateSeries& series);
RateSeries rate_series_from_csv(const std::filesystem::path& path);

struct ForwardDefaultRate {
  RateSeries rates;
  /// Loans with at least one at-risk month whose look-ahead horizon was
  /// shorter than v (worst-ever taken over the available months).
  std::size_t right_censored_loans = 0;
};

/// Worst-ever v-month forward default rate per calendar month. The at-risk
/// set at t' holds loans in P at t' with at least one later observation.
ForwardDefaultRate forward_default_rate(const PanelDataset& panel, int v);

/// Mean |a-b| over months where both series are defined.
double representativeness_mae(const RateSeries& a, const RateSeries& b);

}  // namespace msrisk::panel
