#pragma once

// Portfolio-level comparison of fitted transition models against realized
// rates, and cumulative term-structures.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msrisk/markov.hpp"
#include "msrisk/panel.hpp"
#include "msrisk/state.hpp"

namespace msrisk::compare {

class CompareError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelTag { MC, BR, MLR };
std::string to_string(ModelTag tag);
std::optional<ModelTag> parse_model_tag(std::string_view s);

/// How months with an undefined transient row are treated when cumulating.
enum class FillPolicy { strict, carry_forward, window_mean };
std::string to_string(FillPolicy p);
std::optional<FillPolicy> parse_fill_policy(std::string_view s);

using Cell = std::pair<State, State>;
/// The eight cells with a transient starting state, row-major.
const std::array<Cell, 8>& transient_cells();
std::string cell_tag(const Cell& c);

// ---------------------------------------------------------------------------

struct LoanPrediction {
  int calendar_month = 0;
  double probability = 0.0;
};

struct AggregatedRates {
  panel::RateSeries series;
  /// Months of the requested window with no scored loans (omitted).
  std::vector<int> empty_months;
};

/// Monthly mean of loan-level predicted probabilities; n_at_risk is the
/// number of scored loans.
AggregatedRates aggregate_loan_predictions(std::span<const LoanPrediction> predictions,
                                           std::optional<panel::MonthWindow> window = std::nullopt);

/// Multiplies every entry by 1 / sum. Entries must be positive.
std::vector<double> closure_scale(std::span<const double> row);

/// Inserts `fill_value` at `missing_index` among the predicted entries and
/// closes the row. Predicted entries must be positive; the substituted value
/// may be zero (a month with no realized events).
std::vector<double> closure_scale_row(std::span<const double> predicted, std::size_t missing_index,
                                      double fill_value);

/// Mean |r1 - r2| over months where both are defined; divides by the number
/// of such months.
double ad_statistic(const panel::RateSeries& r1, const panel::RateSeries& r2);

/// 1 - ad_model / ad_baseline.
double relative_improvement(double ad_model, double ad_baseline);
/// Mean over paired entries of 1 - ad_model / ad_baseline.
double relative_improvement(std::span<const double> ad_model, std::span<const double> ad_baseline);

// ---------------------------------------------------------------------------
// Term-structures

struct TermStructure {
  std::vector<std::pair<int, markov::Matrix4>> cumulative;  // (calendar month, running product)

  /// Cumulative (from, to) entry over time.
  std::vector<std::pair<int, double>> curve(State from, State to) const;
};

/// Running product over the window. Month window.first contributes its own
/// matrix. Throws CompareError naming the month when a transient row is
/// undefined and the policy cannot fill it.
TermStructure cumulate_term_structure(const markov::TimeVaryingMatrices& matrices,
                                      const panel::MonthWindow& window, FillPolicy policy);
TermStructure cumulate_term_structure(const markov::TransitionMatrix& constant,
                                      const panel::MonthWindow& window);

/// calendar_month,from,to,cumulative_probability
std::string term_structure_to_csv(const TermStructure& ts);
TermStructure term_structure_from_csv(const std::string& content);

// ---------------------------------------------------------------------------
// Expected matrices per model

using CellSeries = std::map<Cell, panel::RateSeries>;

/// Cells the beta regression leaves unmodeled.
inline constexpr std::array<Cell, 2> kSubstitutedCells{Cell{State::P, State::W},
                                                       Cell{State::D, State::P}};

enum class Substitution { realized, window_mean };
std::string to_string(Substitution s);
std::optional<Substitution> parse_substitution(std::string_view s);

struct MissingCellFill {
  Substitution mode = Substitution::realized;
  /// Realized rates of the substituted cells (mode realized).
  CellSeries realized;
  /// Training-window mean realized rate of the substituted cells.
  std::map<Cell, double> window_mean;
};

/// The constant matrix repeated for every month.
markov::TimeVaryingMatrices replicate_constant(const markov::TransitionMatrix& m,
                                               const std::vector<int>& months);

/// Closure-scaled rows from the six modeled cells plus one substituted cell
/// per transient row.
markov::TimeVaryingMatrices assemble_br(const CellSeries& predicted, const MissingCellFill& fill,
                                        const std::vector<int>& months);

/// Closure-scaled rows from aggregated loan-level predictions of all eight
/// cells.
markov::TimeVaryingMatrices assemble_full(const CellSeries& predicted,
                                          const std::vector<int>& months);

struct ExpectedInputs {
  std::optional<markov::TransitionMatrix> mc;
  std::optional<CellSeries> br;
  std::optional<CellSeries> mlr;
  MissingCellFill fill;
};

std::map<ModelTag, markov::TimeVaryingMatrices> build_expected_matrices(
    const ExpectedInputs& inputs, const std::vector<int>& months);

// ---------------------------------------------------------------------------
// Reports

struct AdRow {
  ModelTag model = ModelTag::MC;
  Cell cell;
  double ad = 0.0;
  bool best_in_class = false;
};

/// AD of every model for each of the eight transient cells. Every minimum
/// within a cell is flagged best in class.
std::vector<AdRow> ad_table(const markov::TimeVaryingMatrices& actual,
                            const std::map<ModelTag, markov::TimeVaryingMatrices>& expected);

/// model,from,to,ad_statistic,best_in_class
std::string ad_table_to_csv(const std::vector<AdRow>& rows);
std::vector<AdRow> ad_table_from_csv(const std::string& content);

/// model,relative_improvement against MC, averaged over cells.
std::string improvement_to_csv(const std::vector<AdRow>& rows);

/// calendar_month,from,to,actual,expected for the eight cells.
std::string series_to_csv(const markov::TimeVaryingMatrices& actual,
                          const markov::TimeVaryingMatrices& expected);

}  // namespace msrisk::compare
