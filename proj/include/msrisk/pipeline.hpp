#pragma once

// Glue between the estimators and the batch front end: training/validation
// split, portfolio-level regression samples, model files and predictions.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "msrisk/betareg.hpp"
#include "msrisk/compare.hpp"
#include "msrisk/diagnostics.hpp"
#include "msrisk/markov.hpp"
#include "msrisk/mlr.hpp"
#include "msrisk/panel.hpp"

namespace msrisk::pipeline {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SplitSettings {
  std::uint64_t seed = 1;
  double train_fraction = 0.7;
};

struct Split {
  panel::PanelDataset train;
  panel::PanelDataset valid;
};

Split make_split(const panel::PanelDataset& panel, const SplitSettings& settings);

/// Precision covariate: log of the number of loans at risk in the starting
/// state.
inline constexpr const char* kLogExposure = "log_exposure";

/// The six cells modeled by beta regression.
const std::vector<compare::Cell>& br_cells();

/// Per transition month t': covariate means over loans in `from` at t'-1
/// that have a record at t', with their count.
struct PortfolioMonth {
  int calendar_month = 0;
  std::size_t at_risk = 0;
  std::vector<double> covariate_means;  // panel covariate order
};
std::vector<PortfolioMonth> portfolio_covariates(const panel::PanelDataset& panel, State from);

/// Named columns for a beta regression on portfolio months: every panel
/// covariate plus log_exposure.
std::map<std::string, std::vector<double>> portfolio_columns(
    const panel::PanelDataset& panel, const std::vector<PortfolioMonth>& months);

struct BrSample {
  compare::Cell cell;
  std::vector<int> months;
  std::vector<double> y;
  std::map<std::string, std::vector<double>> columns;
  std::vector<std::string> warnings;
};

/// Monthly realized rates of `cell` with portfolio covariates; months whose
/// rate is exactly 0 or 1 are dropped with a warning.
BrSample br_sample(const panel::PanelDataset& panel, const compare::Cell& cell);

struct BrOptions {
  std::vector<std::string> mean_covariates;  // empty: every panel covariate
  std::vector<std::string> precision_covariates{kLogExposure};
  betareg::Link mean_link{betareg::LinkKind::loglog};
  betareg::Link precision_link{betareg::LinkKind::log};
  bool forward_select = false;
};

struct BrModel {
  compare::Cell cell;
  betareg::BetaRegSpec spec;
  betareg::BetaRegFit fit;
  std::optional<diagnostics::ForwardSelection> selection;
};

BrModel fit_br(const BrSample& sample, const std::vector<std::string>& panel_covariates,
               const BrOptions& options);

/// Predicted mean rate per transition month of `panel`.
panel::RateSeries predict_br(const BrModel& model, const panel::PanelDataset& panel);

struct MlrOptions {
  std::vector<std::string> covariates;  // empty: every panel covariate
  /// Knot count per covariate entered through a natural spline.
  std::map<std::string, std::size_t> spline_knots;
  /// Explicit interior knots; boundary knots come from the data.
  std::map<std::string, std::vector<double>> explicit_knots;
  bool forward_select = false;
};

struct MlrModel {
  mlr::MlrSpec spec;
  mlr::MlrFit fit;
  std::optional<diagnostics::ForwardSelection> selection;
};

MlrModel fit_mlr_model(const panel::PanelDataset& train, State from, const MlrOptions& options);

/// Aggregated loan-level predictions for every cell starting in the model's
/// state, by transition month.
compare::CellSeries predict_mlr(const MlrModel& model, const panel::PanelDataset& panel);

// ---------------------------------------------------------------------------
// Model files

struct ModelDirectory {
  std::optional<markov::TransitionMatrix> mc;
  std::vector<BrModel> br;
  std::vector<MlrModel> mlr;
  std::optional<SplitSettings> split;
};

std::map<std::string, std::string> read_summary(const std::filesystem::path& path);

/// Writes mc_matrix.csv and mc_summary.txt.
void write_mc(const std::filesystem::path& dir, const markov::TransitionMatrix& m,
              const markov::TransitionCounts& counts, const SplitSettings& split);
/// Writes br_<tag>_coefficients.csv and br_<tag>_summary.txt.
void write_br(const std::filesystem::path& dir, const BrModel& model, const BrSample& sample,
              const SplitSettings& split);
/// Writes mlr_<state>_coefficients.csv, _summary.txt and _auc.csv.
void write_mlr(const std::filesystem::path& dir, const MlrModel& model, const mlr::MlrDesign& design,
               const SplitSettings& split);

/// Loads every model file present. Throws when models disagree on the split.
ModelDirectory read_models(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Comparison

struct CompareSettings {
  compare::Substitution substitution = compare::Substitution::realized;
};

struct ComparisonInputs {
  markov::TimeVaryingMatrices actual;
  std::map<compare::ModelTag, markov::TimeVaryingMatrices> expected;
  std::vector<std::string> warnings;
};

/// Actual matrices of `valid` and each model's expected matrices over the
/// same transition months. Window-mean substitution uses `train`.
ComparisonInputs build_comparison(const ModelDirectory& models, const panel::PanelDataset& train,
                                  const panel::PanelDataset& valid, const CompareSettings& settings);

struct TermStructureReport {
  panel::MonthWindow window;
  compare::TermStructure actual;
  std::map<compare::ModelTag, compare::TermStructure> expected;
  /// Mean absolute gap between each model's cumulative P->D curve and the
  /// actual one.
  std::map<compare::ModelTag, double> mae_pd;
};

/// Cumulates actual and expected matrices over the comparison months.
TermStructureReport term_structures(const ComparisonInputs& inputs, compare::FillPolicy fill);

}  // namespace msrisk::pipeline
