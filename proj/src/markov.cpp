#include "msrisk/markov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msrisk/csv.hpp"
#include "msrisk/diagnostics.hpp"

namespace msrisk::markov {

std::uint64_t TransitionCounts::row_total(State from) const {
  std::uint64_t s = 0;
  for (auto v : n[index_of(from)]) s += v;
  return s;
}

std::uint64_t TransitionCounts::off_diagonal_total() const {
  std::uint64_t s = 0;
  for (int k = 0; k < kNumStates; ++k)
    for (int l = 0; l < kNumStates; ++l)
      if (k != l) s += n[k][l];
  return s;
}

TransitionCounts& TransitionCounts::operator+=(const TransitionCounts& o) {
  for (int k = 0; k < kNumStates; ++k)
    for (int l = 0; l < kNumStates; ++l) n[k][l] += o.n[k][l];
  return *this;
}

TransitionMatrix::TransitionMatrix() : p_(Matrix4::Identity()) {}

TransitionMatrix TransitionMatrix::from_rows(const Matrix4& p, double tolerance) {
  for (int k = 0; k < kNumStates; ++k) {
    for (int l = 0; l < kNumStates; ++l) {
      if (!(p(k, l) >= 0.0 && p(k, l) <= 1.0)) {
        throw MarkovError("transition probability " + transition_tag(state_at(k), state_at(l)) +
                          " outside [0,1]");
      }
    }
    if (std::abs(p.row(k).sum() - 1.0) > tolerance) {
      throw MarkovError("row " + to_string(state_at(k)) + " sums to " +
                        csv::format_double(p.row(k).sum()));
    }
  }
  for (State s : {State::S, State::W}) {
    const int k = index_of(s);
    if (p(k, k) != 1.0) throw MarkovError("absorbing row " + to_string(s) + " is not a unit vector");
  }
  return TransitionMatrix(p);
}

double TransitionMatrix::max_row_sum_error() const {
  return (p_.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

TransitionMatrix matrix_product(const TransitionMatrix& a, const TransitionMatrix& b) {
  return TransitionMatrix(a.p_ * b.p_);
}

TransitionCounts count_transitions(const panel::PanelDataset& panel,
                                   std::optional<panel::MonthWindow> window) {
  TransitionCounts c;
  const auto& recs = panel.records();
  for (const auto& span : panel.loans()) {
    for (std::size_t r = span.begin + 1; r < span.end; ++r) {
      const auto& prev = recs[r - 1];
      if (is_absorbing(prev.state)) break;
      if (window && !window->contains(recs[r].calendar_month)) continue;
      ++c(prev.state, recs[r].state);
    }
  }
  return c;
}

TransitionMatrix estimate_homogeneous(const TransitionCounts& counts) {
  Matrix4 p = Matrix4::Identity();
  for (State k : kTransientStates) {
    const auto total = counts.row_total(k);
    if (total == 0) throw MarkovError("no transitions observed out of state " + to_string(k));
    for (State l : kAllStates) {
      p(index_of(k), index_of(l)) =
          static_cast<double>(counts(k, l)) / static_cast<double>(total);
    }
  }
  return TransitionMatrix::from_rows(p);
}

MonthlyMatrix monthly_from_counts(int calendar_month, const TransitionCounts& counts) {
  MonthlyMatrix m;
  m.calendar_month = calendar_month;
  m.counts = counts;
  for (State k : kTransientStates) {
    const int i = index_of(k);
    const auto total = counts.row_total(k);
    if (total == 0) {
      m.row_defined[i] = false;
      m.p.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    for (State l : kAllStates) {
      m.p(i, index_of(l)) = static_cast<double>(counts(k, l)) / static_cast<double>(total);
    }
  }
  return m;
}

const MonthlyMatrix* TimeVaryingMatrices::find(int month) const {
  auto it = std::lower_bound(by_month.begin(), by_month.end(), month,
                             [](const MonthlyMatrix& m, int x) { return m.calendar_month < x; });
  if (it == by_month.end() || it->calendar_month != month) return nullptr;
  return &*it;
}

TransitionCounts TimeVaryingMatrices::pooled_counts() const {
  TransitionCounts c;
  for (const auto& m : by_month) c += m.counts;
  return c;
}

panel::RateSeries TimeVaryingMatrices::series(State from, State to) const {
  std::vector<panel::RatePoint> pts;
  pts.reserve(by_month.size());
  for (const auto& m : by_month) {
    if (m.row_defined[index_of(from)]) {
      const std::size_t exposure = is_absorbing(from) ? 0 : m.counts.row_total(from);
      pts.push_back({m.calendar_month, m(from, to), exposure});
    } else {
      pts.push_back({m.calendar_month, std::numeric_limits<double>::quiet_NaN(), 0});
    }
  }
  return panel::RateSeries(std::move(pts));
}

TimeVaryingMatrices estimate_time_varying(const panel::PanelDataset& panel) {
  const auto& win = panel.window();
  const int first = win.first + 1;
  std::vector<TransitionCounts> per_month(static_cast<std::size_t>(std::max(0, win.last - first + 1)));
  const auto& recs = panel.records();
  for (const auto& span : panel.loans()) {
    for (std::size_t r = span.begin + 1; r < span.end; ++r) {
      const auto& prev = recs[r - 1];
      if (is_absorbing(prev.state)) break;
      ++per_month[static_cast<std::size_t>(recs[r].calendar_month - first)](prev.state,
                                                                           recs[r].state);
    }
  }
  TimeVaryingMatrices tv;
  tv.by_month.reserve(per_month.size());
  for (std::size_t i = 0; i < per_month.size(); ++i) {
    tv.by_month.push_back(monthly_from_counts(first + static_cast<int>(i), per_month[i]));
  }
  return tv;
}

// ---------------------------------------------------------------------------

std::size_t SojournTimes::total() const {
  std::size_t n = 0;
  for (const auto& [key, v] : durations) n += v.size();
  return n;
}

namespace {

double quantile_type7(const std::vector<double>& sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

SojournSummary SojournTimes::summary(State from, State to) const {
  SojournSummary s;
  auto it = durations.find({from, to});
  if (it == durations.end() || it->second.empty()) {
    s.mean = s.skewness = std::numeric_limits<double>::quiet_NaN();
    s.quantiles.fill(std::numeric_limits<double>::quiet_NaN());
    return s;
  }
  std::vector<double> x(it->second.begin(), it->second.end());
  std::sort(x.begin(), x.end());
  s.n = x.size();
  double sum = 0.0;
  for (double v : x) sum += v;
  s.mean = sum / static_cast<double>(x.size());
  constexpr std::array<double, 5> probs{0.10, 0.25, 0.50, 0.75, 0.90};
  for (std::size_t i = 0; i < probs.size(); ++i) s.quantiles[i] = quantile_type7(x, probs[i]);
  try {
    s.skewness = diagnostics::fisher_pearson_skewness(x);
  } catch (const std::exception&) {
    s.skewness = std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

SojournTimes sojourn_times(const panel::PanelDataset& panel) {
  SojournTimes out;
  const auto& recs = panel.records();
  for (const auto& span : panel.loans()) {
    std::size_t spell_start = span.begin;
    for (std::size_t r = span.begin + 1; r < span.end; ++r) {
      const auto& prev = recs[r - 1];
      if (is_absorbing(prev.state)) break;
      if (recs[r].state == prev.state) continue;
      out.durations[{prev.state, recs[r].state}].push_back(static_cast<int>(r - spell_start));
      if (spell_start == span.begin && recs[span.begin].period > 1) ++out.left_censored_spells;
      spell_start = r;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void append_matrix_rows(std::string& out, const Matrix4& p, const TransitionCounts* counts,
                        const std::string& month) {
  for (State k : kAllStates) {
    for (State l : kAllStates) {
      out += to_string(k) + ',' + to_string(l) + ',' + month + ',' +
             csv::format_double(p(index_of(k), index_of(l))) + ',' +
             (counts ? std::to_string((*counts)(k, l)) : std::string()) + '\n';
    }
  }
}

constexpr const char* kMatrixHeader = "from_state,to_state,calendar_month,probability,count\n";

}  // namespace

std::string matrix_to_csv(const TransitionMatrix& m, const TransitionCounts* counts) {
  std::string out = kMatrixHeader;
  append_matrix_rows(out, m.values(), counts, "");
  return out;
}

std::string time_varying_to_csv(const TimeVaryingMatrices& tv) {
  std::string out = kMatrixHeader;
  for (const auto& m : tv.by_month) {
    append_matrix_rows(out, m.p, &m.counts, std::to_string(m.calendar_month));
  }
  return out;
}

MatrixCsv matrices_from_csv(const std::filesystem::path& path, double tolerance) {
  const auto t = csv::read_table(path);
  const auto cf = t.require("from_state"), ct = t.require("to_state"),
             cm = t.require("calendar_month"), cp = t.require("probability"),
             cc = t.require("count");
  Matrix4 hom = Matrix4::Zero();
  TransitionCounts hom_counts;
  bool have_hom = false, have_counts = false;
  std::map<int, std::pair<Matrix4, TransitionCounts>> months;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const auto from = parse_state(row[cf]);
    const auto to = parse_state(row[ct]);
    if (!from || !to) {
      throw MarkovError(path.string() + ": bad state at line " + std::to_string(t.line_numbers[i]));
    }
    const double prob = csv::parse_double(row[cp], "probability");
    const bool has_count = !row[cc].empty();
    const auto count = has_count ? static_cast<std::uint64_t>(csv::parse_int(row[cc], "count")) : 0;
    if (row[cm].empty()) {
      have_hom = true;
      hom(index_of(*from), index_of(*to)) = prob;
      if (has_count) {
        have_counts = true;
        hom_counts(*from, *to) = count;
      }
    } else {
      const int month = static_cast<int>(csv::parse_int(row[cm], "calendar_month"));
      auto& entry =
          months.try_emplace(month, Matrix4::Zero(), TransitionCounts{}).first->second;
      entry.first(index_of(*from), index_of(*to)) = prob;
      entry.second(*from, *to) = count;
    }
  }
  MatrixCsv out;
  if (have_hom) out.homogeneous = TransitionMatrix::from_rows(hom, tolerance);
  if (have_counts) out.counts = hom_counts;
  if (!months.empty()) {
    TimeVaryingMatrices tv;
    for (const auto& [month, entry] : months) {
      auto m = monthly_from_counts(month, entry.second);
      for (State k : kTransientStates) {
        if (m.row_defined[index_of(k)]) m.p.row(index_of(k)) = entry.first.row(index_of(k));
      }
      tv.by_month.push_back(std::move(m));
    }
    out.time_varying = std::move(tv);
  }
  return out;
}

}  // namespace msrisk::markov
