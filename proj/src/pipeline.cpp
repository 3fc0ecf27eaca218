#include "msrisk/pipeline.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "msrisk/csv.hpp"

namespace msrisk::pipeline {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  if (s.empty()) return {};
  return csv::split_line(s, ',');
}

std::string split_lines(const SplitSettings& split) {
  return "split_seed: " + std::to_string(split.seed) + "\ntrain_fraction: " +
         csv::format_double(split.train_fraction) + '\n';
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key,
                        const fs::path& where) {
  auto it = kv.find(key);
  if (it == kv.end()) throw PipelineError(where.string() + ": missing '" + key + "'");
  return it->second;
}

SplitSettings split_from(const std::map<std::string, std::string>& kv, const fs::path& where) {
  SplitSettings s;
  s.seed = static_cast<std::uint64_t>(csv::parse_int(need(kv, "split_seed", where), "split_seed"));
  s.train_fraction = csv::parse_double(need(kv, "train_fraction", where), "train_fraction");
  return s;
}

}  // namespace

Split make_split(const panel::PanelDataset& panel, const SplitSettings& settings) {
  auto [train, valid] = panel::split_train_valid(panel, settings.train_fraction, settings.seed);
  return {std::move(train), std::move(valid)};
}

const std::vector<compare::Cell>& br_cells() {
  static const std::vector<compare::Cell> cells{
      {State::P, State::P}, {State::P, State::D}, {State::P, State::S},
      {State::D, State::D}, {State::D, State::S}, {State::D, State::W}};
  return cells;
}

std::vector<PortfolioMonth> portfolio_covariates(const panel::PanelDataset& panel, State from) {
  const std::size_t p = panel.covariate_names().size();
  std::map<int, std::pair<std::vector<double>, std::size_t>> acc;
  const auto& recs = panel.records();
  for (const auto& span : panel.loans()) {
    for (std::size_t r = span.begin; r + 1 < span.end; ++r) {
      if (recs[r].state != from) continue;
      auto [it, fresh] = acc.try_emplace(recs[r + 1].calendar_month, std::vector<double>(p, 0.0), 0);
      for (std::size_t j = 0; j < p; ++j) it->second.first[j] += recs[r].covariates[j];
      ++it->second.second;
    }
  }
  std::vector<PortfolioMonth> out;
  for (auto& [month, a] : acc) {
    for (double& v : a.first) v /= static_cast<double>(a.second);
    out.push_back({month, a.second, std::move(a.first)});
  }
  return out;
}

std::map<std::string, std::vector<double>> portfolio_columns(
    const panel::PanelDataset& panel, const std::vector<PortfolioMonth>& months) {
  std::map<std::string, std::vector<double>> cols;
  const auto& names = panel.covariate_names();
  for (std::size_t j = 0; j < names.size(); ++j) {
    auto& c = cols[names[j]];
    for (const auto& m : months) c.push_back(m.covariate_means[j]);
  }
  auto& e = cols[kLogExposure];
  for (const auto& m : months) e.push_back(std::log(static_cast<double>(m.at_risk)));
  return cols;
}

BrSample br_sample(const panel::PanelDataset& panel, const compare::Cell& cell) {
  const auto tv = markov::estimate_time_varying(panel);
  const auto months = portfolio_covariates(panel, cell.first);
  std::vector<PortfolioMonth> kept;
  BrSample s;
  s.cell = cell;
  std::vector<int> dropped;
  for (const auto& m : months) {
    const auto* mm = tv.find(m.calendar_month);
    if (!mm || !mm->row_defined[index_of(cell.first)]) continue;
    const double y = (*mm)(cell.first, cell.second);
    if (!(y > 0.0 && y < 1.0)) {
      dropped.push_back(m.calendar_month);
      continue;
    }
    s.months.push_back(m.calendar_month);
    s.y.push_back(y);
    kept.push_back(m);
  }
  if (!dropped.empty()) {
    std::string list;
    for (int m : dropped) list += (list.empty() ? "" : " ") + std::to_string(m);
    s.warnings.push_back(compare::cell_tag(cell) + ": dropped " + std::to_string(dropped.size()) +
                         " month(s) with a boundary rate of 0 or 1: " + list);
  }
  s.columns = portfolio_columns(panel, kept);
  return s;
}

BrModel fit_br(const BrSample& sample, const std::vector<std::string>& panel_covariates,
               const BrOptions& options) {
  BrModel model;
  model.cell = sample.cell;
  model.spec.mean_link = options.mean_link;
  model.spec.precision_link = options.precision_link;
  model.spec.precision_covariates = options.precision_covariates;
  const auto candidates = options.mean_covariates.empty() ? panel_covariates : options.mean_covariates;
  model.spec.mean_covariates = candidates;
  const std::string tag = compare::cell_tag(sample.cell);
  try {
    if (options.forward_select) {
      auto fit_fn = [&](const std::vector<std::string>& covs) {
        betareg::BetaRegSpec spec = model.spec;
        spec.mean_covariates = covs;
        const auto data = betareg::make_data(spec, sample.y, sample.columns);
        const auto fit = betareg::fit_vdbr(spec, data);
        return diagnostics::aic(fit.loglik, static_cast<int>(spec.num_params()));
      };
      model.selection = diagnostics::forward_select(candidates, fit_fn);
      model.spec.mean_covariates = model.selection->selected;
    }
    const auto data = betareg::make_data(model.spec, sample.y, sample.columns);
    model.fit = betareg::fit_vdbr(model.spec, data);
  } catch (const std::exception& e) {
    throw PipelineError("beta regression " + tag + ": " + e.what());
  }
  return model;
}

panel::RateSeries predict_br(const BrModel& model, const panel::PanelDataset& panel) {
  const auto months = portfolio_covariates(panel, model.cell.first);
  const auto cols = portfolio_columns(panel, months);
  std::vector<panel::RatePoint> pts;
  Eigen::VectorXd x(static_cast<Eigen::Index>(model.spec.num_mean_params()));
  for (std::size_t i = 0; i < months.size(); ++i) {
    x[0] = 1.0;
    for (std::size_t j = 0; j < model.spec.mean_covariates.size(); ++j) {
      auto it = cols.find(model.spec.mean_covariates[j]);
      if (it == cols.end())
        throw PipelineError("beta regression " + compare::cell_tag(model.cell) +
                            ": panel lacks covariate '" + model.spec.mean_covariates[j] + "'");
      x[static_cast<Eigen::Index>(j) + 1] = it->second[i];
    }
    pts.push_back({months[i].calendar_month, betareg::predict_mean(model.fit, model.spec, x),
                   months[i].at_risk});
  }
  return panel::RateSeries(std::move(pts));
}

namespace {

mlr::MlrSpec mlr_spec_for(const panel::PanelDataset& train, State from,
                          const std::vector<std::string>& covs, const MlrOptions& options) {
  mlr::MlrSpec spec;
  spec.starting_state = from;
  std::vector<std::string> splined;
  for (const auto& c : covs)
    if (options.spline_knots.contains(c) || options.explicit_knots.contains(c)) {
      splined.push_back(c);
    } else {
      spec.covariates.push_back(c);
    }
  if (splined.empty()) return spec;

  std::vector<std::vector<double>> values(splined.size());
  std::vector<std::size_t> col(splined.size());
  for (std::size_t k = 0; k < splined.size(); ++k) {
    const auto idx = train.covariate_index(splined[k]);
    if (!idx) throw PipelineError("spline covariate '" + splined[k] + "' is not in the panel");
    col[k] = *idx;
  }
  const auto& recs = train.records();
  for (const auto& span : train.loans())
    for (std::size_t r = span.begin; r + 1 < span.end; ++r)
      if (recs[r].state == from)
        for (std::size_t k = 0; k < splined.size(); ++k) values[k].push_back(recs[r].covariates[col[k]]);
  for (std::size_t k = 0; k < splined.size(); ++k) {
    if (auto it = options.explicit_knots.find(splined[k]); it != options.explicit_knots.end()) {
      mlr::SplineSpec s = mlr::resolve_knots(splined[k], values[k], 0);
      s.interior_knots = it->second;
      s.validate();
      spec.splines.push_back(std::move(s));
    } else {
      spec.splines.push_back(
          mlr::resolve_knots(splined[k], values[k], options.spline_knots.at(splined[k])));
    }
  }
  return spec;
}

}  // namespace

MlrModel fit_mlr_model(const panel::PanelDataset& train, State from, const MlrOptions& options) {
  const auto candidates = options.covariates.empty() ? train.covariate_names() : options.covariates;
  MlrModel model;
  try {
    std::vector<std::string> chosen = candidates;
    if (options.forward_select) {
      auto fit_fn = [&](const std::vector<std::string>& covs) {
        const auto spec = mlr_spec_for(train, from, covs, options);
        return mlr::fit_mlr(spec, mlr::build_design(spec, train)).aic;
      };
      model.selection = diagnostics::forward_select(candidates, fit_fn);
      chosen = model.selection->selected;
    }
    model.spec = mlr_spec_for(train, from, chosen, options);
    model.fit = mlr::fit_mlr(model.spec, mlr::build_design(model.spec, train));
  } catch (const std::exception& e) {
    throw PipelineError("multinomial logit from " + to_string(from) + ": " + e.what());
  }
  return model;
}

compare::CellSeries predict_mlr(const MlrModel& model, const panel::PanelDataset& panel) {
  const mlr::MlrDesign design = mlr::build_design(model.spec, panel);
  const auto& dest = model.fit.destinations;
  std::vector<std::vector<compare::LoanPrediction>> preds(dest.size());
  for (auto& v : preds) v.reserve(design.rows());
  for (std::size_t i = 0; i < design.rows(); ++i) {
    const Eigen::VectorXd p =
        mlr::predict_probs(model.fit, design.x.row(static_cast<Eigen::Index>(i)).transpose());
    for (std::size_t j = 0; j < dest.size(); ++j)
      preds[j].push_back({design.calendar_month[i], p[static_cast<Eigen::Index>(j)]});
  }
  compare::CellSeries out;
  for (std::size_t j = 0; j < dest.size(); ++j)
    out[{model.spec.starting_state, dest[j]}] = compare::aggregate_loan_predictions(preds[j]).series;
  return out;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> read_summary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.find(": ");
    if (pos == std::string::npos) {
      if (!line.empty() && line.back() == ':') kv[line.substr(0, line.size() - 1)] = "";
      continue;
    }
    kv[line.substr(0, pos)] = line.substr(pos + 2);
  }
  return kv;
}

void write_mc(const fs::path& dir, const markov::TransitionMatrix& m,
              const markov::TransitionCounts& counts, const SplitSettings& split) {
  csv::write_file(dir / "mc_matrix.csv", markov::matrix_to_csv(m, &counts));
  std::uint64_t total = 0;
  for (State s : kTransientStates) total += counts.row_total(s);
  csv::write_file(dir / "mc_summary.txt", "model: mc\ntransitions: " + std::to_string(total) +
                                              '\n' + split_lines(split));
}

void write_br(const fs::path& dir, const BrModel& model, const BrSample& sample,
              const SplitSettings& split) {
  const std::string stem = "br_" + compare::cell_tag(model.cell);
  const auto data = betareg::make_data(model.spec, sample.y, sample.columns);
  csv::write_file(dir / (stem + "_coefficients.csv"),
                  betareg::coefficients_to_csv(model.fit, model.spec));
  std::string summary = "transition: " + compare::cell_tag(model.cell) + '\n' +
                        betareg::fit_summary(model.fit, model.spec, data) + split_lines(split);
  for (const auto& w : sample.warnings) summary += "warning: " + w + '\n';
  csv::write_file(dir / (stem + "_summary.txt"), summary);
  if (model.selection)
    csv::write_file(dir / (stem + "_selection.csv"), diagnostics::selection_to_csv(*model.selection));
}

void write_mlr(const fs::path& dir, const MlrModel& model, const mlr::MlrDesign& design,
               const SplitSettings& split) {
  const std::string stem = "mlr_" + to_string(model.spec.starting_state);
  csv::write_file(dir / (stem + "_coefficients.csv"), mlr::coefficients_to_csv(model.fit));
  csv::write_file(dir / (stem + "_summary.txt"),
                  mlr::fit_summary(model.fit, model.spec) + split_lines(split));
  csv::write_file(dir / (stem + "_auc.csv"), mlr::auc_to_csv(mlr::destination_auc(model.fit, design)));
  if (model.selection)
    csv::write_file(dir / (stem + "_selection.csv"), diagnostics::selection_to_csv(*model.selection));
}

namespace {

BrModel read_br(const fs::path& coef_path, const fs::path& summary_path, const compare::Cell& cell) {
  const auto kv = read_summary(summary_path);
  BrModel m;
  m.cell = cell;
  const auto link = betareg::parse_link(need(kv, "mean_link", summary_path));
  const auto plink = betareg::parse_link(need(kv, "precision_link", summary_path));
  if (!link || !plink) throw PipelineError(summary_path.string() + ": unknown link");
  m.spec.mean_link = *link;
  m.spec.precision_link = *plink;
  m.spec.mean_covariates = split_list(need(kv, "mean_covariates", summary_path));
  m.spec.precision_covariates = split_list(need(kv, "precision_covariates", summary_path));

  const auto t = csv::read_table(coef_path);
  const auto cn = t.require("coefficient");
  const auto ce = t.require("estimate");
  const auto names = betareg::coefficient_names(m.spec);
  if (t.rows.size() != names.size())
    throw PipelineError(coef_path.string() + ": coefficient count does not match the summary");
  Eigen::VectorXd all(static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (t.rows[i][cn] != names[i])
      throw PipelineError(coef_path.string() + ": expected coefficient '" + names[i] + "'");
    all[static_cast<Eigen::Index>(i)] = csv::parse_double(t.rows[i][ce], names[i]);
  }
  const auto p1 = static_cast<Eigen::Index>(m.spec.num_mean_params());
  m.fit.beta = all.head(p1);
  m.fit.theta = all.tail(all.size() - p1);
  m.fit.loglik = csv::parse_double(need(kv, "loglik", summary_path), "loglik");
  m.fit.converged = need(kv, "converged", summary_path) == "true";
  return m;
}

MlrModel read_mlr(const fs::path& coef_path, const fs::path& summary_path, State from) {
  const auto kv = read_summary(summary_path);
  MlrModel m;
  m.spec.starting_state = from;
  m.spec.covariates = split_list(need(kv, "covariates", summary_path));
  for (const auto& [key, value] : kv) {
    if (key.rfind("spline.", 0) != 0) continue;
    mlr::SplineSpec s;
    s.covariate = key.substr(7);
    std::vector<double> knots;
    for (const auto& tok : csv::split_line(value, ';')) knots.push_back(csv::parse_double(tok, key));
    if (knots.size() < 2) throw PipelineError(summary_path.string() + ": bad knots for " + s.covariate);
    s.boundary = {knots.front(), knots.back()};
    s.interior_knots.assign(knots.begin() + 1, knots.end() - 1);
    m.spec.splines.push_back(std::move(s));
  }
  // Spline order follows the coefficient file, which follows the fit.
  const auto t = csv::read_table(coef_path);
  const auto cd = t.require("destination");
  const auto ct = t.require("term");
  const auto ce = t.require("estimate");
  const auto cs = t.require("std_error");
  std::vector<std::string> spline_order;
  for (const auto& row : t.rows) {
    const auto pos = row[ct].rfind(":ns");
    if (pos == std::string::npos) continue;
    const std::string cov = row[ct].substr(0, pos);
    if (std::find(spline_order.begin(), spline_order.end(), cov) == spline_order.end())
      spline_order.push_back(cov);
  }
  std::stable_sort(m.spec.splines.begin(), m.spec.splines.end(), [&](const auto& a, const auto& b) {
    return std::find(spline_order.begin(), spline_order.end(), a.covariate) <
           std::find(spline_order.begin(), spline_order.end(), b.covariate);
  });
  m.spec.validate();

  m.fit.starting_state = from;
  m.fit.destinations = m.spec.destinations();
  m.fit.terms = m.spec.term_names();
  const auto k = static_cast<Eigen::Index>(m.fit.destinations.size() - 1);
  const auto p = static_cast<Eigen::Index>(m.fit.terms.size());
  if (static_cast<Eigen::Index>(t.rows.size()) != k * p)
    throw PipelineError(coef_path.string() + ": expected " + std::to_string(k * p) + " coefficients");
  m.fit.coefficients.resize(k, p);
  m.fit.std_errors.resize(k, p);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i) / p;
    const auto c = static_cast<Eigen::Index>(i) % p;
    const auto& row = t.rows[i];
    if (row[cd] != to_string(m.fit.destinations[static_cast<std::size_t>(r) + 1]) ||
        row[ct] != m.fit.terms[static_cast<std::size_t>(c)])
      throw PipelineError(coef_path.string() + ": unexpected row order at line " +
                          std::to_string(t.line_numbers[i]));
    m.fit.coefficients(r, c) = csv::parse_double(row[ce], "estimate");
    m.fit.std_errors(r, c) = csv::parse_double(row[cs], "std_error");
  }
  m.fit.loglik = csv::parse_double(need(kv, "loglik", summary_path), "loglik");
  m.fit.null_loglik = csv::parse_double(need(kv, "null_loglik", summary_path), "null_loglik");
  m.fit.aic = csv::parse_double(need(kv, "aic", summary_path), "aic");
  m.fit.n_obs = static_cast<std::size_t>(csv::parse_int(need(kv, "n_obs", summary_path), "n_obs"));
  m.fit.converged = need(kv, "converged", summary_path) == "true";
  return m;
}

}  // namespace

ModelDirectory read_models(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw PipelineError("model directory " + dir.string() + " not found");
  ModelDirectory out;
  auto note_split = [&](const fs::path& summary) {
    const SplitSettings s = split_from(read_summary(summary), summary);
    if (out.split && (out.split->seed != s.seed || out.split->train_fraction != s.train_fraction))
      throw PipelineError("models in " + dir.string() +
                          " were fitted on different training/validation splits");
    out.split = s;
  };
  if (fs::exists(dir / "mc_matrix.csv")) {
    auto mc = markov::matrices_from_csv(dir / "mc_matrix.csv");
    if (!mc.homogeneous) throw PipelineError("mc_matrix.csv holds no homogeneous matrix");
    out.mc = *mc.homogeneous;
    note_split(dir / "mc_summary.txt");
  }
  for (const auto& cell : br_cells()) {
    const std::string stem = "br_" + compare::cell_tag(cell);
    if (!fs::exists(dir / (stem + "_coefficients.csv"))) continue;
    out.br.push_back(read_br(dir / (stem + "_coefficients.csv"), dir / (stem + "_summary.txt"), cell));
    note_split(dir / (stem + "_summary.txt"));
  }
  for (State s : kTransientStates) {
    const std::string stem = "mlr_" + to_string(s);
    if (!fs::exists(dir / (stem + "_coefficients.csv"))) continue;
    out.mlr.push_back(read_mlr(dir / (stem + "_coefficients.csv"), dir / (stem + "_summary.txt"), s));
    note_split(dir / (stem + "_summary.txt"));
  }
  if (!out.mc && out.br.empty() && out.mlr.empty())
    throw PipelineError("no fitted model files in " + dir.string());
  return out;
}

ComparisonInputs build_comparison(const ModelDirectory& models, const panel::PanelDataset& train,
                                  const panel::PanelDataset& valid, const CompareSettings& settings) {
  ComparisonInputs out;
  out.actual = markov::estimate_time_varying(valid);
  std::vector<int> months;
  for (const auto& m : out.actual.by_month) months.push_back(m.calendar_month);

  compare::ExpectedInputs in;
  in.mc = models.mc;
  if (!models.br.empty()) {
    if (models.br.size() != br_cells().size()) {
      out.warnings.push_back("beta regression skipped: only " + std::to_string(models.br.size()) +
                             " of 6 transition models fitted");
    } else {
      compare::CellSeries br;
      for (const auto& m : models.br) br[m.cell] = predict_br(m, valid);
      in.br = std::move(br);
      in.fill.mode = settings.substitution;
      const auto train_tv = markov::estimate_time_varying(train);
      for (const auto& cell : compare::kSubstitutedCells) {
        in.fill.realized[cell] = out.actual.series(cell.first, cell.second);
        in.fill.window_mean[cell] = train_tv.series(cell.first, cell.second).mean();
      }
    }
  }
  if (!models.mlr.empty()) {
    if (models.mlr.size() != 2) {
      out.warnings.push_back("multinomial logit skipped: models for both P and D are needed");
    } else {
      compare::CellSeries all;
      for (const auto& m : models.mlr) all.merge(predict_mlr(m, valid));
      in.mlr = std::move(all);
    }
  }
  out.expected = compare::build_expected_matrices(in, months);
  return out;
}

TermStructureReport term_structures(const ComparisonInputs& inputs, compare::FillPolicy fill) {
  const auto& months = inputs.actual.by_month;
  if (months.empty()) throw PipelineError("no transition months to cumulate");
  TermStructureReport r;
  r.window = {months.front().calendar_month, months.back().calendar_month};
  r.actual = compare::cumulate_term_structure(inputs.actual, r.window, fill);
  std::vector<double> actual_pd;
  for (const auto& [m, v] : r.actual.curve(State::P, State::D)) actual_pd.push_back(v);
  for (const auto& [tag, tv] : inputs.expected) {
    try {
      auto ts = compare::cumulate_term_structure(tv, r.window, fill);
      std::vector<double> pd;
      for (const auto& [m, v] : ts.curve(State::P, State::D)) pd.push_back(v);
      r.mae_pd[tag] = diagnostics::mae(actual_pd, pd);
      r.expected.emplace(tag, std::move(ts));
    } catch (const compare::CompareError& e) {
      throw PipelineError(compare::to_string(tag) + " term-structure: " + e.what());
    }
  }
  return r;
}

}  // namespace msrisk::pipeline
