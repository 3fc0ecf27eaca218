#include "msrisk/compare.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include "msrisk/csv.hpp"

namespace msrisk::compare {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string month_list(const std::vector<int>& months) {
  if (months.empty()) return "(none)";
  return std::to_string(months.front()) + ".." + std::to_string(months.back());
}

std::vector<int> defined_months(const panel::RateSeries& s) {
  std::vector<int> out;
  for (const auto& p : s.points())
    if (p.defined()) out.push_back(p.calendar_month);
  return out;
}

/// Model series carry no exposure; each defined month counts as one
/// evaluation so the point is marked defined.
panel::RateSeries expected_series(const markov::TimeVaryingMatrices& tv, const Cell& c) {
  std::vector<panel::RatePoint> pts;
  for (const auto& m : tv.by_month) {
    if (m.row_defined[index_of(c.first)]) {
      pts.push_back({m.calendar_month, m(c.first, c.second), 1});
    } else {
      pts.push_back({m.calendar_month, kNaN, 0});
    }
  }
  return panel::RateSeries(std::move(pts));
}

markov::MonthlyMatrix empty_month(int month) {
  markov::MonthlyMatrix m;
  m.calendar_month = month;
  m.p = markov::Matrix4::Identity();
  for (State s : kTransientStates) {
    m.p.row(index_of(s)).setConstant(kNaN);
    m.row_defined[index_of(s)] = false;
  }
  return m;
}

void set_row(markov::MonthlyMatrix& m, State from, const std::vector<double>& row) {
  for (int j = 0; j < kNumStates; ++j) m.p(index_of(from), j) = row[static_cast<std::size_t>(j)];
  m.row_defined[index_of(from)] = true;
}

const panel::RateSeries& require_series(const CellSeries& s, const Cell& c, const char* model) {
  auto it = s.find(c);
  if (it == s.end())
    throw CompareError(std::string("missing ") + model + " series for transition " + cell_tag(c));
  return it->second;
}

}  // namespace

std::string to_string(ModelTag tag) {
  switch (tag) {
    case ModelTag::MC: return "MC";
    case ModelTag::BR: return "BR";
    case ModelTag::MLR: return "MLR";
  }
  return "?";
}

std::optional<ModelTag> parse_model_tag(std::string_view s) {
  for (auto t : {ModelTag::MC, ModelTag::BR, ModelTag::MLR}) {
    const std::string name = to_string(t);
    if (s.size() == name.size() &&
        std::equal(s.begin(), s.end(), name.begin(),
                   [](char a, char b) { return std::toupper(static_cast<unsigned char>(a)) == b; }))
      return t;
  }
  return std::nullopt;
}

std::string to_string(FillPolicy p) {
  switch (p) {
    case FillPolicy::strict: return "strict";
    case FillPolicy::carry_forward: return "carry-forward";
    case FillPolicy::window_mean: return "window-mean";
  }
  return "?";
}

std::optional<FillPolicy> parse_fill_policy(std::string_view s) {
  for (auto p : {FillPolicy::strict, FillPolicy::carry_forward, FillPolicy::window_mean})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

std::string to_string(Substitution s) {
  return s == Substitution::realized ? "realized" : "window-mean";
}

std::optional<Substitution> parse_substitution(std::string_view s) {
  if (s == "realized") return Substitution::realized;
  if (s == "window-mean") return Substitution::window_mean;
  return std::nullopt;
}

const std::array<Cell, 8>& transient_cells() {
  static const std::array<Cell, 8> cells{
      Cell{State::P, State::P}, Cell{State::P, State::D}, Cell{State::P, State::S},
      Cell{State::P, State::W}, Cell{State::D, State::P}, Cell{State::D, State::D},
      Cell{State::D, State::S}, Cell{State::D, State::W}};
  return cells;
}

std::string cell_tag(const Cell& c) { return transition_tag(c.first, c.second); }

AggregatedRates aggregate_loan_predictions(std::span<const LoanPrediction> predictions,
                                           std::optional<panel::MonthWindow> window) {
  std::map<int, std::pair<double, std::size_t>> by_month;
  for (const auto& p : predictions) {
    if (window && !window->contains(p.calendar_month)) continue;
    if (!(p.probability >= 0.0 && p.probability <= 1.0))
      throw CompareError("loan-level probability outside [0,1] in month " +
                         std::to_string(p.calendar_month));
    auto& slot = by_month[p.calendar_month];
    slot.first += p.probability;
    ++slot.second;
  }
  AggregatedRates out;
  std::vector<panel::RatePoint> pts;
  for (const auto& [month, acc] : by_month)
    pts.push_back({month, acc.first / static_cast<double>(acc.second), acc.second});
  if (window) {
    for (int m = window->first; m <= window->last; ++m)
      if (!by_month.contains(m)) out.empty_months.push_back(m);
  }
  out.series = panel::RateSeries(std::move(pts));
  return out;
}

std::vector<double> closure_scale(std::span<const double> row) {
  if (row.empty()) throw CompareError("closure of an empty row");
  double sum = 0.0;
  for (double v : row) {
    if (!(v > 0.0)) throw CompareError("closure needs positive entries, got " + csv::format_double(v));
    sum += v;
  }
  const double z = 1.0 / sum;
  std::vector<double> out(row.begin(), row.end());
  for (double& v : out) v *= z;
  return out;
}

std::vector<double> closure_scale_row(std::span<const double> predicted, std::size_t missing_index,
                                      double fill_value) {
  if (missing_index > predicted.size()) throw CompareError("substituted cell index out of range");
  for (double v : predicted)
    if (!(v > 0.0))
      throw CompareError("closure needs positive predicted entries, got " + csv::format_double(v));
  if (!(fill_value >= 0.0) || !std::isfinite(fill_value))
    throw CompareError("substituted value must be a nonnegative probability");
  std::vector<double> row(predicted.begin(), predicted.end());
  row.insert(row.begin() + static_cast<long>(missing_index), fill_value);
  double sum = 0.0;
  for (double v : row) sum += v;
  const double z = 1.0 / sum;
  for (double& v : row) v *= z;
  return row;
}

double ad_statistic(const panel::RateSeries& r1, const panel::RateSeries& r2) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : r1.points()) {
    if (!p.defined()) continue;
    const auto other = r2.at(p.calendar_month);
    if (!other) continue;
    sum += std::abs(p.value - *other);
    ++n;
  }
  if (n == 0)
    throw CompareError("series share no defined month (windows " + month_list(defined_months(r1)) +
                       " and " + month_list(defined_months(r2)) + ")");
  return sum / static_cast<double>(n);
}

double relative_improvement(double ad_model, double ad_baseline) {
  if (!(ad_baseline > 0.0)) throw CompareError("relative improvement needs a positive baseline AD");
  return 1.0 - ad_model / ad_baseline;
}

double relative_improvement(std::span<const double> ad_model, std::span<const double> ad_baseline) {
  if (ad_model.size() != ad_baseline.size() || ad_model.empty())
    throw CompareError("relative improvement needs paired, non-empty AD vectors");
  double sum = 0.0;
  for (std::size_t i = 0; i < ad_model.size(); ++i)
    sum += relative_improvement(ad_model[i], ad_baseline[i]);
  return sum / static_cast<double>(ad_model.size());
}

std::vector<std::pair<int, double>> TermStructure::curve(State from, State to) const {
  std::vector<std::pair<int, double>> out;
  out.reserve(cumulative.size());
  for (const auto& [month, m] : cumulative) out.emplace_back(month, m(index_of(from), index_of(to)));
  return out;
}

TermStructure cumulate_term_structure(const markov::TimeVaryingMatrices& matrices,
                                      const panel::MonthWindow& window, FillPolicy policy) {
  if (window.last < window.first) throw CompareError("empty term-structure window");
  std::array<Eigen::RowVector4d, kNumStates> mean_row;
  std::array<bool, kNumStates> has_mean{};
  if (policy == FillPolicy::window_mean) {
    for (State s : kTransientStates) {
      Eigen::RowVector4d acc = Eigen::RowVector4d::Zero();
      int n = 0;
      for (int m = window.first; m <= window.last; ++m) {
        const auto* mm = matrices.find(m);
        if (mm && mm->row_defined[index_of(s)]) {
          acc += mm->p.row(index_of(s));
          ++n;
        }
      }
      if (n > 0) {
        mean_row[index_of(s)] = acc / static_cast<double>(n);
        has_mean[index_of(s)] = true;
      }
    }
  }

  TermStructure ts;
  markov::Matrix4 prev = markov::Matrix4::Identity();
  markov::Matrix4 running = markov::Matrix4::Identity();
  for (int m = window.first; m <= window.last; ++m) {
    const auto* mm = matrices.find(m);
    markov::Matrix4 cur = markov::Matrix4::Identity();
    for (State s : kTransientStates) {
      const int r = index_of(s);
      if (mm && mm->row_defined[r]) {
        cur.row(r) = mm->p.row(r);
        continue;
      }
      const std::string where = "month " + std::to_string(m) + " has no defined " + to_string(s) +
                                " row (fill policy " + to_string(policy) + ")";
      switch (policy) {
        case FillPolicy::strict: throw CompareError(where);
        case FillPolicy::carry_forward:
          if (m == window.first) throw CompareError(where + ": nothing to carry forward");
          cur.row(r) = prev.row(r);
          break;
        case FillPolicy::window_mean:
          if (!has_mean[r]) throw CompareError(where + ": no defined month in the window");
          cur.row(r) = mean_row[r];
          break;
      }
    }
    running = (m == window.first) ? cur : markov::Matrix4(running * cur);
    ts.cumulative.emplace_back(m, running);
    prev = cur;
  }
  return ts;
}

TermStructure cumulate_term_structure(const markov::TransitionMatrix& constant,
                                      const panel::MonthWindow& window) {
  std::vector<int> months;
  for (int m = window.first; m <= window.last; ++m) months.push_back(m);
  return cumulate_term_structure(replicate_constant(constant, months), window, FillPolicy::strict);
}

std::string term_structure_to_csv(const TermStructure& ts) {
  std::string out = "calendar_month,from,to,cumulative_probability\n";
  for (const auto& [month, m] : ts.cumulative)
    for (State a : kAllStates)
      for (State b : kAllStates)
        out += std::to_string(month) + ',' + to_string(a) + ',' + to_string(b) + ',' +
               csv::format_double(m(index_of(a), index_of(b))) + '\n';
  return out;
}

TermStructure term_structure_from_csv(const std::string& content) {
  std::istringstream in(content);
  const csv::Table t = csv::parse_table(in, "term-structure");
  const auto c_month = t.require("calendar_month");
  const auto c_from = t.require("from");
  const auto c_to = t.require("to");
  const auto c_p = t.require("cumulative_probability");
  std::map<int, markov::Matrix4> by_month;
  for (const auto& row : t.rows) {
    const int month = static_cast<int>(csv::parse_int(row[c_month], "calendar_month"));
    const auto a = parse_state(row[c_from]);
    const auto b = parse_state(row[c_to]);
    if (!a || !b) throw CompareError("term-structure row with an unknown state");
    auto [it, fresh] = by_month.try_emplace(month, markov::Matrix4::Zero());
    it->second(index_of(*a), index_of(*b)) = csv::parse_double(row[c_p], "cumulative_probability");
  }
  TermStructure ts;
  for (auto& [month, m] : by_month) ts.cumulative.emplace_back(month, m);
  return ts;
}

markov::TimeVaryingMatrices replicate_constant(const markov::TransitionMatrix& m,
                                               const std::vector<int>& months) {
  markov::TimeVaryingMatrices tv;
  for (int month : months) {
    markov::MonthlyMatrix mm;
    mm.calendar_month = month;
    mm.p = m.values();
    tv.by_month.push_back(mm);
  }
  return tv;
}

markov::TimeVaryingMatrices assemble_br(const CellSeries& predicted, const MissingCellFill& fill,
                                        const std::vector<int>& months) {
  struct RowPlan {
    State from;
    std::array<Cell, 3> modeled;
    Cell substituted;
    std::size_t missing_index;
  };
  const std::array<RowPlan, 2> plans{
      RowPlan{State::P,
              {Cell{State::P, State::P}, Cell{State::P, State::D}, Cell{State::P, State::S}},
              Cell{State::P, State::W}, 3},
      RowPlan{State::D,
              {Cell{State::D, State::D}, Cell{State::D, State::S}, Cell{State::D, State::W}},
              Cell{State::D, State::P}, 0}};

  markov::TimeVaryingMatrices tv;
  for (int month : months) {
    markov::MonthlyMatrix mm = empty_month(month);
    for (const auto& plan : plans) {
      std::vector<double> vals;
      for (const auto& c : plan.modeled) {
        const auto v = require_series(predicted, c, "BR").at(month);
        if (!v) break;
        vals.push_back(*v);
      }
      if (vals.size() != plan.modeled.size()) continue;
      std::optional<double> sub;
      if (fill.mode == Substitution::realized) {
        sub = require_series(fill.realized, plan.substituted, "realized").at(month);
      } else {
        auto it = fill.window_mean.find(plan.substituted);
        if (it == fill.window_mean.end())
          throw CompareError("missing training-window mean for " + cell_tag(plan.substituted));
        sub = it->second;
      }
      if (!sub) continue;
      set_row(mm, plan.from, closure_scale_row(vals, plan.missing_index, *sub));
    }
    tv.by_month.push_back(std::move(mm));
  }
  return tv;
}

markov::TimeVaryingMatrices assemble_full(const CellSeries& predicted,
                                          const std::vector<int>& months) {
  markov::TimeVaryingMatrices tv;
  for (int month : months) {
    markov::MonthlyMatrix mm = empty_month(month);
    for (State from : kTransientStates) {
      std::vector<double> vals;
      for (State to : kAllStates) {
        const auto v = require_series(predicted, Cell{from, to}, "MLR").at(month);
        if (!v) break;
        vals.push_back(*v);
      }
      if (vals.size() == kNumStates) set_row(mm, from, closure_scale(vals));
    }
    tv.by_month.push_back(std::move(mm));
  }
  return tv;
}

std::map<ModelTag, markov::TimeVaryingMatrices> build_expected_matrices(
    const ExpectedInputs& inputs, const std::vector<int>& months) {
  std::map<ModelTag, markov::TimeVaryingMatrices> out;
  if (inputs.mc) out[ModelTag::MC] = replicate_constant(*inputs.mc, months);
  if (inputs.br) out[ModelTag::BR] = assemble_br(*inputs.br, inputs.fill, months);
  if (inputs.mlr) out[ModelTag::MLR] = assemble_full(*inputs.mlr, months);
  if (out.empty()) throw CompareError("no fitted model to compare");
  return out;
}

std::vector<AdRow> ad_table(const markov::TimeVaryingMatrices& actual,
                            const std::map<ModelTag, markov::TimeVaryingMatrices>& expected) {
  std::vector<AdRow> rows;
  for (const auto& cell : transient_cells()) {
    const panel::RateSeries a = actual.series(cell.first, cell.second);
    const std::size_t first = rows.size();
    for (const auto& [tag, tv] : expected) {
      try {
        rows.push_back({tag, cell, ad_statistic(a, expected_series(tv, cell)), false});
      } catch (const CompareError& e) {
        throw CompareError(to_string(tag) + " " + cell_tag(cell) + ": " + e.what());
      }
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = first; i < rows.size(); ++i) best = std::min(best, rows[i].ad);
    for (std::size_t i = first; i < rows.size(); ++i) rows[i].best_in_class = rows[i].ad == best;
  }
  return rows;
}

std::string ad_table_to_csv(const std::vector<AdRow>& rows) {
  std::string out = "model,from,to,ad_statistic,best_in_class\n";
  for (const auto& r : rows)
    out += to_string(r.model) + ',' + to_string(r.cell.first) + ',' + to_string(r.cell.second) +
           ',' + csv::format_double(r.ad) + ',' + (r.best_in_class ? "true" : "false") + '\n';
  return out;
}

std::vector<AdRow> ad_table_from_csv(const std::string& content) {
  std::istringstream in(content);
  const csv::Table t = csv::parse_table(in, "AD report");
  const auto c_model = t.require("model");
  const auto c_from = t.require("from");
  const auto c_to = t.require("to");
  const auto c_ad = t.require("ad_statistic");
  const auto c_best = t.require("best_in_class");
  std::vector<AdRow> rows;
  for (const auto& r : t.rows) {
    const auto tag = parse_model_tag(r[c_model]);
    const auto a = parse_state(r[c_from]);
    const auto b = parse_state(r[c_to]);
    if (!tag || !a || !b) throw CompareError("malformed AD report row");
    rows.push_back({*tag, {*a, *b}, csv::parse_double(r[c_ad], "ad_statistic"),
                    r[c_best] == "true"});
  }
  return rows;
}

std::string improvement_to_csv(const std::vector<AdRow>& rows) {
  std::map<Cell, double> baseline;
  for (const auto& r : rows)
    if (r.model == ModelTag::MC) baseline[r.cell] = r.ad;
  std::string out = "model,relative_improvement\n";
  if (baseline.empty()) return out;
  for (auto tag : {ModelTag::BR, ModelTag::MLR}) {
    std::vector<double> model_ad, base_ad;
    for (const auto& r : rows) {
      if (r.model != tag) continue;
      auto it = baseline.find(r.cell);
      if (it == baseline.end() || !(it->second > 0.0)) continue;
      model_ad.push_back(r.ad);
      base_ad.push_back(it->second);
    }
    if (model_ad.empty()) continue;
    out += to_string(tag) + ',' + csv::format_double(relative_improvement(model_ad, base_ad)) + '\n';
  }
  return out;
}

std::string series_to_csv(const markov::TimeVaryingMatrices& actual,
                          const markov::TimeVaryingMatrices& expected) {
  std::string out = "calendar_month,from,to,actual,expected\n";
  for (const auto& cell : transient_cells()) {
    const auto a = actual.series(cell.first, cell.second);
    const auto e = expected_series(expected, cell);
    for (const auto& p : a.points()) {
      const auto ev = e.at(p.calendar_month);
      out += std::to_string(p.calendar_month) + ',' + to_string(cell.first) + ',' +
             to_string(cell.second) + ',' + csv::format_double(p.defined() ? p.value : kNaN) + ',' +
             csv::format_double(ev ? *ev : kNaN) + '\n';
    }
  }
  return out;
}

}  // namespace msrisk::compare
