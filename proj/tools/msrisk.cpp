// Batch front end: simulate -> fit -> diagnose -> compare -> term-structure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "msrisk/betareg.hpp"
#include "msrisk/compare.hpp"
#include "msrisk/csv.hpp"
#include "msrisk/diagnostics.hpp"
#include "msrisk/markov.hpp"
#include "msrisk/panel.hpp"
#include "msrisk/pipeline.hpp"
#include "msrisk/simulator.hpp"
#include "msrisk/svg.hpp"

namespace fs = std::filesystem;
using namespace msrisk;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& tok : csv::split_line(s, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

fs::path prepare_output(const std::string& dir, const std::vector<std::string>& inputs) {
  const fs::path out = fs::weakly_canonical(dir);
  for (const auto& in : inputs)
    if (!in.empty() && fs::weakly_canonical(in) == out)
      throw UsageError("--output-dir must differ from input path " + in);
  if (fs::exists(out) && !fs::is_directory(out))
    throw UsageError("--output-dir " + dir + " is not a directory");
  fs::create_directories(out);
  return out;
}

void warn(const std::string& w) { std::cerr << "warning: " << w << '\n'; }

struct Formats {
  bool csv = false;
  bool svg = false;
};

Formats parse_formats(const std::string& s) {
  Formats f;
  for (const auto& tok : split_list(s)) {
    if (tok == "csv") f.csv = true;
    else if (tok == "svg") f.svg = true;
    else throw UsageError("--format: unknown format '" + tok + "' (expected csv, svg)");
  }
  if (!f.csv && !f.svg) throw UsageError("--format: no format given");
  return f;
}

compare::FillPolicy parse_fill(const std::string& s) {
  auto p = compare::parse_fill_policy(s);
  if (!p) throw UsageError("--fill: expected strict, carry-forward or window-mean, got '" + s + "'");
  return *p;
}

compare::Substitution parse_substitution(const std::string& s) {
  auto p = compare::parse_substitution(s);
  if (!p) throw UsageError("--substitution: expected realized or window-mean, got '" + s + "'");
  return *p;
}

betareg::Link parse_link_flag(const std::string& flag, const std::string& s) {
  auto l = betareg::parse_link(s);
  if (!l) throw UsageError(flag + ": unknown link '" + s + "'");
  return *l;
}

/// "cov:count" or "cov=k1;k2;..." items separated by commas.
void parse_splines(const std::string& s, pipeline::MlrOptions& opt) {
  for (const auto& item : split_list(s)) {
    if (auto eq = item.find('='); eq != std::string::npos) {
      std::vector<double> knots;
      for (const auto& k : csv::split_line(item.substr(eq + 1), ';')) {
        try {
          knots.push_back(csv::parse_double(k, "knot"));
        } catch (const std::exception&) {
          throw UsageError("--splines: bad knot '" + k + "' in '" + item + "'");
        }
      }
      opt.explicit_knots[item.substr(0, eq)] = knots;
    } else if (auto colon = item.find(':'); colon != std::string::npos) {
      long long n = 0;
      try {
        n = csv::parse_int(item.substr(colon + 1), "knot count");
      } catch (const std::exception&) {
        throw UsageError("--splines: bad knot count in '" + item + "'");
      }
      if (n < 0) throw UsageError("--splines: negative knot count in '" + item + "'");
      opt.spline_knots[item.substr(0, colon)] = static_cast<std::size_t>(n);
    } else {
      throw UsageError("--splines: expected cov:count or cov=k1;k2, got '" + item + "'");
    }
  }
}

void require_covariates(const panel::PanelDataset& p, const std::vector<std::string>& names,
                        const std::string& flag) {
  for (const auto& n : names)
    if (!p.covariate_index(n)) throw UsageError(flag + ": panel has no covariate '" + n + "'");
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

int run_simulate(const SimulateArgs& a) {
  auto cfg = sim::load_scenario(a.scenario);
  if (a.seed) cfg.seed = *a.seed;
  if (a.threads) cfg.threads = *a.threads;
  const fs::path out = prepare_output(a.output_dir, {a.scenario});
  const auto s = sim::simulate_portfolio(cfg);
  panel::save_panel(s.panel, out / "panel.csv");
  sim::export_truth(s.truth, out / "truth.csv");
  const auto counts = markov::count_transitions(s.panel);
  std::cout << "loans: " << s.panel.num_loans() << "\nmonths: " << cfg.n_months
            << "\nrecords: " << s.panel.records().size()
            << "\ntransitions: " << s.panel.num_transitions() << '\n';
  for (const auto& c : compare::transient_cells())
    std::cout << "  " << compare::cell_tag(c) << ": " << counts(c.first, c.second) << '\n';
  return 0;
}

struct FitArgs {
  std::string model;
  std::string input;
  std::string output_dir;
  std::uint64_t seed = 1;
  double train_fraction = 0.7;
  std::string link = "loglog";
  std::string precision_link = "log";
  std::string splines;
  std::string transitions;
  std::string covariates;
  bool forward_select = false;
};

int run_fit(const FitArgs& a, const CLI::App& cmd) {
  const bool is_br = a.model == "br", is_mlr = a.model == "mlr";
  if (!is_br && (cmd.count("--link") || cmd.count("--precision-link")))
    throw UsageError("--link and --precision-link apply to --model br only");
  if (!is_mlr && cmd.count("--splines")) throw UsageError("--splines applies to --model mlr only");
  if (a.model == "mc" && (cmd.count("--transitions") || cmd.count("--covariates") || a.forward_select))
    throw UsageError("--transitions, --covariates and --forward-select do not apply to --model mc");
  if (!(a.train_fraction > 0.0 && a.train_fraction < 1.0))
    throw UsageError("--train-fraction must lie in (0,1)");

  pipeline::BrOptions br_opt;
  pipeline::MlrOptions mlr_opt;
  std::vector<compare::Cell> cells;
  std::vector<State> starts;
  const auto covs = split_list(a.covariates);
  if (is_br) {
    br_opt.mean_link = parse_link_flag("--link", a.link);
    br_opt.precision_link = parse_link_flag("--precision-link", a.precision_link);
    if (br_opt.precision_link.kind() != betareg::LinkKind::log)
      throw UsageError("--precision-link: only log is supported");
    br_opt.mean_covariates = covs;
    br_opt.forward_select = a.forward_select;
    for (const auto& tok : split_list(a.transitions)) {
      const auto& all = pipeline::br_cells();
      auto it = std::find_if(all.begin(), all.end(),
                             [&](const auto& c) { return compare::cell_tag(c) == tok; });
      if (it == all.end())
        throw UsageError("--transitions: '" + tok + "' is not one of PP,PD,PS,DD,DS,DW");
      cells.push_back(*it);
    }
    if (cells.empty()) cells = pipeline::br_cells();
  }
  if (is_mlr) {
    mlr_opt.covariates = covs;
    mlr_opt.forward_select = a.forward_select;
    parse_splines(a.splines, mlr_opt);
    for (const auto& tok : split_list(a.transitions)) {
      const auto s = parse_state(tok);
      if (!s || is_absorbing(*s)) throw UsageError("--transitions: '" + tok + "' is not P or D");
      starts.push_back(*s);
    }
    if (starts.empty()) starts = {State::P, State::D};
  }

  const auto data = panel::load_panel(a.input);
  if (is_br) require_covariates(data, covs, "--covariates");
  if (is_mlr) {
    require_covariates(data, covs, "--covariates");
    std::vector<std::string> spl;
    for (const auto& [c, n] : mlr_opt.spline_knots) spl.push_back(c);
    for (const auto& [c, k] : mlr_opt.explicit_knots) spl.push_back(c);
    require_covariates(data, spl, "--splines");
    for (const auto& c : spl)
      if (!covs.empty() && std::find(covs.begin(), covs.end(), c) == covs.end())
        throw UsageError("--splines: '" + c + "' is not among --covariates");
  }
  const fs::path out = prepare_output(a.output_dir, {a.input});
  const pipeline::SplitSettings split{a.seed, a.train_fraction};
  const auto sp = pipeline::make_split(data, split);
  std::cout << "training loans: " << sp.train.num_loans()
            << "\nvalidation loans: " << sp.valid.num_loans() << '\n';

  if (a.model == "mc") {
    const auto counts = markov::count_transitions(sp.train);
    markov::TransitionMatrix m;
    try {
      m = markov::estimate_homogeneous(counts);
    } catch (const std::exception& e) {
      throw pipeline::PipelineError(std::string("markov chain: ") + e.what());
    }
    pipeline::write_mc(out, m, counts, split);
    std::cout << "transition matrix (rows P,D,S,W):\n" << m.values() << '\n';
  } else if (is_br) {
    for (const auto& cell : cells) {
      const auto sample = pipeline::br_sample(sp.train, cell);
      for (const auto& w : sample.warnings) warn(w);
      const auto model = pipeline::fit_br(sample, sp.train.covariate_names(), br_opt);
      pipeline::write_br(out, model, sample, split);
      std::cout << compare::cell_tag(cell) << ": n=" << model.fit.n_obs
                << " loglik=" << csv::format_double(model.fit.loglik) << '\n';
    }
  } else {
    for (State s : starts) {
      const auto model = pipeline::fit_mlr_model(sp.train, s, mlr_opt);
      const auto valid_design = mlr::build_design(model.spec, sp.valid);
      pipeline::write_mlr(out, model, valid_design, split);
      std::cout << to_string(s) << ": n=" << model.fit.n_obs
                << " coefficients=" << model.fit.num_coefficients()
                << " loglik=" << csv::format_double(model.fit.loglik) << '\n';
    }
  }
  return 0;
}

struct DiagnoseArgs {
  std::string input;
  std::string output_dir;
  std::uint64_t seed = 1;
  double train_fraction = 0.7;
  int horizon = 12;
  std::string link = "loglog";
  std::string precision_link = "log";
  std::size_t influential = 3;
  bool skip_br = false;
};

int run_diagnose(const DiagnoseArgs& a) {
  if (a.horizon < 1) throw UsageError("--horizon must be at least 1");
  if (!(a.train_fraction > 0.0 && a.train_fraction < 1.0))
    throw UsageError("--train-fraction must lie in (0,1)");
  pipeline::BrOptions br_opt;
  br_opt.mean_link = parse_link_flag("--link", a.link);
  br_opt.precision_link = parse_link_flag("--precision-link", a.precision_link);

  const auto data = panel::load_panel(a.input);
  const fs::path out = prepare_output(a.output_dir, {a.input});

  const auto soj = markov::sojourn_times(data);
  std::string s = "from,to,n,mean,q10,q25,q50,q75,q90,skewness\n";
  for (const auto& [cell, d] : soj.durations) {
    const auto sum = soj.summary(cell.first, cell.second);
    s += to_string(cell.first) + ',' + to_string(cell.second) + ',' + std::to_string(sum.n) + ',' +
         csv::format_double(sum.mean);
    for (double q : sum.quantiles) s += ',' + csv::format_double(q);
    s += ',' + csv::format_double(sum.skewness) + '\n';
  }
  csv::write_file(out / "sojourn_times.csv", s);

  const auto sp = pipeline::make_split(data, {a.seed, a.train_fraction});
  const auto full = panel::forward_default_rate(data, a.horizon);
  const auto train = panel::forward_default_rate(sp.train, a.horizon);
  csv::write_file(out / "default_rate.csv", panel::rate_series_to_csv(full.rates));
  csv::write_file(out / "default_rate_train.csv", panel::rate_series_to_csv(train.rates));
  const double rep = panel::representativeness_mae(full.rates, train.rates);
  csv::write_file(out / "representativeness.txt",
                  "horizon: " + std::to_string(a.horizon) + "\nmae: " + csv::format_double(rep) +
                      "\nright_censored_loans: " + std::to_string(full.right_censored_loans) +
                      "\nleft_censored_spells: " + std::to_string(soj.left_censored_spells) + '\n');
  std::cout << "sojourn spells: " << soj.total() << "\nrepresentativeness mae: "
            << csv::format_double(rep) << '\n';
  if (a.skip_br) return 0;

  std::string influence = "transition,removed,r2_before,r2_after\n";
  for (const auto& cell : pipeline::br_cells()) {
    const std::string tag = compare::cell_tag(cell);
    const auto sample = pipeline::br_sample(sp.train, cell);
    for (const auto& w : sample.warnings) warn(w);
    const auto model = pipeline::fit_br(sample, sp.train.covariate_names(), br_opt);
    const auto bd = betareg::make_data(model.spec, sample.y, sample.columns);
    const Eigen::VectorXd r = betareg::pearson_residuals(model.fit, bd);
    const Eigen::VectorXd h = betareg::leverage(model.fit, model.spec, bd);
    const Eigen::VectorXd cook = betareg::cooks_distance(model.fit, model.spec, bd);
    std::string rows = "calendar_month,observed,fitted,pearson_residual,leverage,cooks_distance\n";
    for (std::size_t i = 0; i < sample.y.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      rows += std::to_string(sample.months[i]) + ',' + csv::format_double(sample.y[i]) + ',' +
              csv::format_double(model.fit.fitted_mu[k]) + ',' + csv::format_double(r[k]) + ',' +
              csv::format_double(h[k]) + ',' + csv::format_double(cook[k]) + '\n';
    }
    csv::write_file(out / ("br_" + tag + "_residuals.csv"), rows);
    const std::vector<double> rv(r.data(), r.data() + r.size());
    csv::write_file(out / ("br_" + tag + "_ks.csv"),
                    diagnostics::ks_to_csv(diagnostics::ks_test_standard_normal(rv)));
    const auto refit = betareg::remove_influential_and_refit(model.fit, model.spec, bd, a.influential);
    std::string removed;
    for (auto i : refit.removed) removed += (removed.empty() ? "" : ";") + std::to_string(sample.months[i]);
    influence += tag + ',' + removed + ',' + csv::format_double(refit.r2_before) + ',' +
                 csv::format_double(refit.r2_after) + '\n';
  }
  csv::write_file(out / "br_influence.csv", influence);
  return 0;
}

struct CompareArgs {
  std::string input;
  std::string models;
  std::string output_dir;
  std::string fill = "window-mean";
  std::string substitution = "realized";
  std::string format = "csv,svg";
};

pipeline::ComparisonInputs load_comparison(const CompareArgs& a) {
  const auto models = pipeline::read_models(a.models);
  const auto data = panel::load_panel(a.input);
  const auto sp = pipeline::make_split(data, *models.split);
  auto ci = pipeline::build_comparison(models, sp.train, sp.valid,
                                       {parse_substitution(a.substitution)});
  for (const auto& w : ci.warnings) warn(w);
  if (ci.expected.empty()) throw pipeline::PipelineError("no complete model to compare");
  return ci;
}

std::vector<std::pair<double, double>> points(const panel::RateSeries& s) {
  std::vector<std::pair<double, double>> p;
  for (const auto& pt : s.points())
    p.emplace_back(pt.calendar_month, pt.defined() ? pt.value : std::nan(""));
  return p;
}

int run_compare(const CompareArgs& a) {
  const auto fill = parse_fill(a.fill);
  const auto formats = parse_formats(a.format);
  parse_substitution(a.substitution);
  const fs::path out = prepare_output(a.output_dir, {a.input, a.models});
  const auto ci = load_comparison(a);

  const auto rows = compare::ad_table(ci.actual, ci.expected);
  if (formats.csv) {
    csv::write_file(out / "ad_table.csv", compare::ad_table_to_csv(rows));
    if (ci.expected.contains(compare::ModelTag::MC))
      csv::write_file(out / "improvement.csv", compare::improvement_to_csv(rows));
    for (const auto& [tag, tv] : ci.expected)
      csv::write_file(out / ("series_" + compare::to_string(tag) + ".csv"),
                      compare::series_to_csv(ci.actual, tv));
  }
  if (formats.svg) {
    for (const auto& cell : compare::transient_cells()) {
      svg::Chart chart;
      chart.title = "Transition " + compare::cell_tag(cell) + ": actual vs expected";
      chart.x_label = "calendar month";
      chart.y_label = "monthly probability";
      chart.lines.push_back({"actual", points(ci.actual.series(cell.first, cell.second))});
      std::string note = "AD";
      for (const auto& [tag, tv] : ci.expected) {
        chart.lines.push_back({compare::to_string(tag), points(tv.series(cell.first, cell.second))});
        for (const auto& r : rows)
          if (r.model == tag && r.cell == cell) {
            char buf[64];
            std::snprintf(buf, sizeof buf, " %s=%.5f", compare::to_string(tag).c_str(), r.ad);
            note += buf;
          }
      }
      chart.annotation = note;
      csv::write_file(out / ("compare_" + compare::cell_tag(cell) + ".svg"), svg::render(chart));
    }
  }
  const auto ts = pipeline::term_structures(ci, fill);
  if (formats.csv) {
    std::string s = "model,mae_pd\n";
    for (const auto& [tag, v] : ts.mae_pd) s += compare::to_string(tag) + ',' + csv::format_double(v) + '\n';
    csv::write_file(out / "term_structure_mae.csv", s);
  }
  for (const auto& r : rows)
    std::cout << compare::to_string(r.model) << ' ' << compare::cell_tag(r.cell) << ' '
              << csv::format_double(r.ad) << (r.best_in_class ? " *" : "") << '\n';
  return 0;
}

int run_term_structure(const CompareArgs& a) {
  const auto fill = parse_fill(a.fill);
  const auto formats = parse_formats(a.format);
  parse_substitution(a.substitution);
  const fs::path out = prepare_output(a.output_dir, {a.input, a.models});
  const auto ci = load_comparison(a);
  const auto ts = pipeline::term_structures(ci, fill);

  const auto actual_pd = ts.actual.curve(State::P, State::D);
  if (formats.csv) {
    csv::write_file(out / "term_structure_actual.csv", compare::term_structure_to_csv(ts.actual));
    std::string pd = "calendar_month,actual";
    for (const auto& [tag, t] : ts.expected) pd += ',' + compare::to_string(tag);
    pd += '\n';
    std::vector<std::vector<std::pair<int, double>>> curves;
    for (const auto& [tag, t] : ts.expected) {
      csv::write_file(out / ("term_structure_" + compare::to_string(tag) + ".csv"),
                      compare::term_structure_to_csv(t));
      curves.push_back(t.curve(State::P, State::D));
    }
    for (std::size_t i = 0; i < actual_pd.size(); ++i) {
      pd += std::to_string(actual_pd[i].first) + ',' + csv::format_double(actual_pd[i].second);
      for (const auto& c : curves) pd += ',' + csv::format_double(c[i].second);
      pd += '\n';
    }
    csv::write_file(out / "term_structure_PD.csv", pd);
    std::string mae = "model,mae_pd\n";
    for (const auto& [tag, v] : ts.mae_pd) mae += compare::to_string(tag) + ',' + csv::format_double(v) + '\n';
    csv::write_file(out / "term_structure_mae.csv", mae);
  }
  if (formats.svg) {
    svg::Chart chart;
    chart.title = "Cumulative P to D probability";
    chart.x_label = "calendar month";
    chart.y_label = "cumulative probability";
    auto to_points = [](const std::vector<std::pair<int, double>>& c) {
      std::vector<std::pair<double, double>> p;
      for (const auto& [m, v] : c) p.emplace_back(m, v);
      return p;
    };
    chart.lines.push_back({"actual", to_points(actual_pd)});
    std::string note = "MAE";
    for (const auto& [tag, t] : ts.expected) {
      chart.lines.push_back({compare::to_string(tag), to_points(t.curve(State::P, State::D))});
      char buf[64];
      std::snprintf(buf, sizeof buf, " %s=%.5f", compare::to_string(tag).c_str(), ts.mae_pd.at(tag));
      note += buf;
    }
    chart.annotation = note;
    csv::write_file(out / "term_structure_PD.svg", svg::render(chart));
  }
  std::cout << "window: " << ts.window.first << '-' << ts.window.last << '\n';
  for (const auto& [tag, v] : ts.mae_pd)
    std::cout << compare::to_string(tag) << " mae_pd " << csv::format_double(v) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loan state-transition modelling toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic panel and its ground truth");
  sim_cmd->add_option("--scenario", sim_args.scenario, "Scenario INI file")
      ->required()
      ->check(CLI::ExistingFile);
  sim_cmd->add_option("--output-dir", sim_args.output_dir, "Directory for panel.csv and truth.csv")
      ->required();
  sim_cmd->add_option("--seed", sim_args.seed, "Overrides the scenario seed");
  sim_cmd->add_option("--threads", sim_args.threads, "Worker threads")->check(CLI::PositiveNumber);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one model family on the training split");
  fit_cmd->add_option("--model", fit_args.model, "mc, br or mlr")
      ->required()
      ->check(CLI::IsMember({"mc", "br", "mlr"}));
  fit_cmd->add_option("--input", fit_args.input, "Panel CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--output-dir", fit_args.output_dir, "Model directory")->required();
  fit_cmd->add_option("--seed", fit_args.seed, "Training/validation split seed")->capture_default_str();
  fit_cmd->add_option("--train-fraction", fit_args.train_fraction, "Share of loans used for fitting")->capture_default_str();
  fit_cmd->add_option("--link", fit_args.link, "Mean link (br)")->capture_default_str();
  fit_cmd->add_option("--precision-link", fit_args.precision_link, "Precision link (br)")->capture_default_str();
  fit_cmd->add_option("--splines", fit_args.splines, "cov:count or cov=k1;k2, comma separated (mlr)");
  fit_cmd->add_option("--transitions", fit_args.transitions,
                      "br: cells such as PD,DS; mlr: starting states P,D");
  fit_cmd->add_option("--covariates", fit_args.covariates, "Comma-separated covariates");
  fit_cmd->add_flag("--forward-select", fit_args.forward_select, "Stepwise forward selection by AIC");

  DiagnoseArgs diag_args;
  auto* diag_cmd = app.add_subcommand("diagnose", "Sojourn times, default rates and residual checks");
  diag_cmd->add_option("--input", diag_args.input, "Panel CSV")->required()->check(CLI::ExistingFile);
  diag_cmd->add_option("--output-dir", diag_args.output_dir, "Report directory")->required();
  diag_cmd->add_option("--seed", diag_args.seed, "Training/validation split seed")->capture_default_str();
  diag_cmd->add_option("--train-fraction", diag_args.train_fraction, "Share of loans in training")->capture_default_str();
  diag_cmd->add_option("--horizon", diag_args.horizon, "Forward default-rate horizon in months")->capture_default_str();
  diag_cmd->add_option("--link", diag_args.link, "Mean link for the beta regressions")->capture_default_str();
  diag_cmd->add_option("--precision-link", diag_args.precision_link, "Precision link")->capture_default_str();
  diag_cmd->add_option("--influential", diag_args.influential,
                       "Rows with the largest Cook's distance removed in the refit")->capture_default_str();
  diag_cmd->add_flag("--skip-br", diag_args.skip_br, "Skip the beta regression checks");

  CompareArgs cmp_args;
  auto add_compare_options = [](CLI::App* c, CompareArgs& a) {
    c->add_option("--input", a.input, "Panel CSV the models were fitted on")
        ->required()
        ->check(CLI::ExistingFile);
    c->add_option("--models", a.models, "Model directory written by fit")
        ->required()
        ->check(CLI::ExistingDirectory);
    c->add_option("--output-dir", a.output_dir, "Report directory")->required();
    c->add_option("--fill", a.fill, "strict, carry-forward or window-mean")->capture_default_str();
    c->add_option("--substitution", a.substitution,
                  "Source of the two cells beta regression leaves out: realized or window-mean")->capture_default_str();
    c->add_option("--format", a.format, "csv, svg or both")->capture_default_str();
  };
  auto* cmp_cmd = app.add_subcommand("compare", "AD statistics of fitted models on the validation split");
  add_compare_options(cmp_cmd, cmp_args);
  CompareArgs ts_args;
  auto* ts_cmd = app.add_subcommand("term-structure", "Cumulative transition probabilities");
  add_compare_options(ts_cmd, ts_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    const CLI::App* sub = nullptr;
    for (const auto* c : app.get_subcommands()) sub = c;
    std::cerr << (sub ? sub->help() : app.help());
    return 2;
  }

  try {
    if (*sim_cmd) return run_simulate(sim_args);
    if (*fit_cmd) return run_fit(fit_args, *fit_cmd);
    if (*diag_cmd) return run_diagnose(diag_args);
    if (*cmp_cmd) return run_compare(cmp_args);
    if (*ts_cmd) return run_term_structure(ts_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
