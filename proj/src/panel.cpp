#include "msrisk/panel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "msrisk/csv.hpp"

namespace msrisk::panel {

namespace {

std::string row_ref(const LoanRecord& r) {
  std::ostringstream os;
  if (r.source_row > 0) os << "row " << r.source_row << ": ";
  os << "loan " << r.loan_id << " period " << r.period;
  return os.str();
}

}  // namespace

PanelDataset PanelDataset::build(std::vector<std::string> covariate_names,
                                 std::vector<LoanRecord> records,
                                 std::optional<MonthWindow> window) {
  if (records.empty()) throw PanelError("panel has no records");
  const std::size_t p = covariate_names.size();

  MonthWindow observed{records.front().calendar_month, records.front().calendar_month};
  for (const auto& r : records) {
    if (r.covariates.size() != p) {
      throw PanelError(row_ref(r) + ": expected " + std::to_string(p) + " covariates, got " +
                       std::to_string(r.covariates.size()));
    }
    for (std::size_t j = 0; j < p; ++j) {
      if (!std::isfinite(r.covariates[j])) {
        throw PanelError(row_ref(r) + ": covariate '" + covariate_names[j] + "' is not finite");
      }
    }
    if (r.period < 1) throw PanelError(row_ref(r) + ": period must be >= 1");
    observed.first = std::min(observed.first, r.calendar_month);
    observed.last = std::max(observed.last, r.calendar_month);
  }
  const MonthWindow win = window.value_or(observed);
  if (win.last < win.first) throw PanelError("sampling window is empty");
  for (const auto& r : records) {
    if (!win.contains(r.calendar_month)) {
      throw PanelError(row_ref(r) + ": calendar month " + std::to_string(r.calendar_month) +
                       " outside window [" + std::to_string(win.first) + ", " +
                       std::to_string(win.last) + "]");
    }
  }

  std::stable_sort(records.begin(), records.end(), [](const LoanRecord& a, const LoanRecord& b) {
    if (a.loan_id != b.loan_id) return a.loan_id < b.loan_id;
    return a.period < b.period;
  });

  std::vector<LoanSpan> loans;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i == 0 || records[i - 1].loan_id != r.loan_id) {
      loans.push_back({i, i + 1});
      continue;
    }
    const auto& prev = records[i - 1];
    if (prev.period == r.period) {
      throw PanelError(row_ref(r) + ": duplicate (loan, period)");
    }
    if (r.period != prev.period + 1) {
      throw PanelError(row_ref(r) + ": gap in periods (previous period " +
                       std::to_string(prev.period) + ")");
    }
    if (r.calendar_month != prev.calendar_month + 1) {
      throw PanelError(row_ref(r) + ": gap in calendar months (previous month " +
                       std::to_string(prev.calendar_month) + ")");
    }
    if (is_absorbing(prev.state) && r.state != prev.state) {
      throw PanelError(row_ref(r) + ": transition out of absorbing state " +
                       to_string(prev.state) + " -> " + to_string(r.state));
    }
    loans.back().end = i + 1;
  }

  PanelDataset out;
  out.covariate_names_ = std::move(covariate_names);
  out.records_ = std::move(records);
  out.loans_ = std::move(loans);
  out.window_ = win;
  return out;
}

std::optional<std::size_t> PanelDataset::covariate_index(const std::string& name) const {
  for (std::size_t j = 0; j < covariate_names_.size(); ++j)
    if (covariate_names_[j] == name) return j;
  return std::nullopt;
}

PanelDataset PanelDataset::subset(const std::vector<std::size_t>& loan_indices) const {
  PanelDataset out;
  out.covariate_names_ = covariate_names_;
  out.window_ = window_;
  std::vector<std::size_t> sorted = loan_indices;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (std::size_t li : sorted) {
    const auto& span = loans_.at(li);
    const std::size_t begin = out.records_.size();
    out.records_.insert(out.records_.end(), records_.begin() + span.begin,
                        records_.begin() + span.end);
    out.loans_.push_back({begin, out.records_.size()});
  }
  return out;
}

// ---------------------------------------------------------------------------

PanelDataset load_panel(const std::filesystem::path& path, const CsvSchema& schema) {
  csv::Table table;
  try {
    table = csv::read_table(path);
  } catch (const csv::CsvError& e) {
    throw PanelError(e.what());
  }
  std::size_t c_id, c_period, c_month, c_state;
  try {
    c_id = table.require(schema.loan_id);
    c_period = table.require(schema.period);
    c_month = table.require(schema.calendar_month);
    c_state = table.require(schema.state);
  } catch (const csv::CsvError& e) {
    throw PanelError(path.string() + ": " + e.what());
  }

  std::vector<std::string> cov_names = schema.covariates;
  std::vector<std::size_t> cov_cols;
  if (cov_names.empty()) {
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (j == c_id || j == c_period || j == c_month || j == c_state) continue;
      cov_names.push_back(table.header[j]);
      cov_cols.push_back(j);
    }
  } else {
    for (const auto& name : cov_names) {
      try {
        cov_cols.push_back(table.require(name));
      } catch (const csv::CsvError& e) {
        throw PanelError(path.string() + ": " + e.what());
      }
    }
  }

  std::vector<LoanRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = table.line_numbers[i];
    LoanRecord r;
    r.source_row = line;
    r.loan_id = row[c_id];
    try {
      r.period = static_cast<int>(csv::parse_int(row[c_period], "period"));
      r.calendar_month = static_cast<int>(csv::parse_int(row[c_month], "calendar_month"));
      r.covariates.reserve(cov_cols.size());
      for (std::size_t j = 0; j < cov_cols.size(); ++j) {
        r.covariates.push_back(csv::parse_double(row[cov_cols[j]], cov_names[j]));
      }
    } catch (const csv::CsvError& e) {
      throw PanelError("row " + std::to_string(line) + ": " + e.what());
    }
    auto st = parse_state(row[c_state]);
    if (!st) {
      throw PanelError("row " + std::to_string(line) + ": unparseable state '" + row[c_state] +
                       "'");
    }
    r.state = *st;
    records.push_back(std::move(r));
  }
  return PanelDataset::build(std::move(cov_names), std::move(records), schema.window);
}

std::string panel_to_csv(const PanelDataset& panel) {
  std::string out = "loan_id,period,calendar_month,state";
  for (const auto& n : panel.covariate_names()) out += "," + n;
  out += '\n';
  for (const auto& r : panel.records()) {
    out += r.loan_id;
    out += ',' + std::to_string(r.period) + ',' + std::to_string(r.calendar_month) + ',' +
           state_letter(r.state);
    for (double v : r.covariates) out += ',' + csv::format_double(v);
    out += '\n';
  }
  return out;
}

void save_panel(const PanelDataset& panel, const std::filesystem::path& path) {
  csv::write_file(path, panel_to_csv(panel));
}

// ---------------------------------------------------------------------------

Allocation allocate_largest_remainder(const std::vector<double>& weights,
                                      const std::vector<std::size_t>& capacities,
                                      std::size_t n) {
  const std::size_t k = weights.size();
  if (capacities.size() != k) throw PanelError("weights and capacities differ in length");
  const std::size_t total_cap = std::accumulate(capacities.begin(), capacities.end(), std::size_t{0});
  if (n > total_cap) {
    throw PanelError("cannot allocate " + std::to_string(n) + " units to strata holding " +
                     std::to_string(total_cap));
  }

  Allocation out;
  out.counts.assign(k, 0);
  std::vector<bool> capped(k, false);
  while (true) {
    std::size_t left = n;
    double total_w = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (capped[i]) left -= out.counts[i];
      else if (weights[i] > 0.0 && capacities[i] > 0) total_w += weights[i];
    }
    std::vector<std::size_t> alloc(k, 0);
    if (left > 0 && total_w <= 0.0) {
      // only zero-weight strata remain: fill them in index order
      for (std::size_t i = 0; i < k && left > 0; ++i) {
        if (capped[i]) continue;
        alloc[i] = std::min(left, capacities[i]);
        left -= alloc[i];
      }
    } else if (left > 0) {
      std::vector<std::pair<double, std::size_t>> remainders;
      std::size_t assigned = 0;
      for (std::size_t i = 0; i < k; ++i) {
        if (capped[i] || weights[i] <= 0.0 || capacities[i] == 0) continue;
        const double quota = static_cast<double>(left) * weights[i] / total_w;
        alloc[i] = static_cast<std::size_t>(std::floor(quota));
        assigned += alloc[i];
        remainders.emplace_back(quota - std::floor(quota), i);
      }
      std::stable_sort(remainders.begin(), remainders.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      for (std::size_t r = 0; assigned < left && r < remainders.size(); ++r, ++assigned) {
        ++alloc[remainders[r].second];
      }
    }
    bool overflow = false;
    for (std::size_t i = 0; i < k; ++i) {
      if (capped[i] || alloc[i] <= capacities[i]) continue;
      overflow = true;
      capped[i] = true;
      out.counts[i] = capacities[i];
      out.warnings.push_back("stratum " + std::to_string(i) + " requested " +
                             std::to_string(alloc[i]) + " but holds " +
                             std::to_string(capacities[i]) + "; drew all and reallocated " +
                             std::to_string(alloc[i] - capacities[i]));
    }
    if (!overflow) {
      for (std::size_t i = 0; i < k; ++i)
        if (!capped[i]) out.counts[i] = alloc[i];
      return out;
    }
  }
}

StratifiedSample stratified_sample(const PanelDataset& panel, std::size_t n_loans,
                                   std::uint64_t seed) {
  if (n_loans > panel.num_loans()) {
    throw PanelError("requested " + std::to_string(n_loans) + " loans from a panel of " +
                     std::to_string(panel.num_loans()));
  }
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < panel.num_loans(); ++i) strata[panel.origination_month(i)].push_back(i);

  std::vector<double> weights;
  std::vector<std::size_t> caps;
  for (const auto& [month, members] : strata) {
    weights.push_back(static_cast<double>(members.size()));
    caps.push_back(members.size());
  }
  auto alloc = allocate_largest_remainder(weights, caps, n_loans);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  StratifiedSample out{PanelDataset{}, {}, std::move(alloc.warnings)};
  std::size_t s = 0;
  for (auto& [month, members] : strata) {
    const std::size_t take = alloc.counts[s++];
    std::shuffle(members.begin(), members.end(), rng);
    chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<long>(take));
    out.allocation[month] = take;
  }
  out.panel = panel.subset(chosen);
  return out;
}

std::pair<PanelDataset, PanelDataset> split_train_valid(const PanelDataset& panel,
                                                        double train_fraction,
                                                        std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw PanelError("train_fraction must lie in (0, 1)");
  }
  const std::size_t n = panel.num_loans();
  if (n < 2) throw PanelError("need at least 2 loans to split");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> valid(order.begin() + static_cast<long>(n_train), order.end());
  return {panel.subset(train), panel.subset(valid)};
}

// ---------------------------------------------------------------------------

RateSeries::RateSeries(std::vector<RatePoint> points) : points_(std::move(points)) {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (i > 0 && p.calendar_month <= points_[i - 1].calendar_month) {
      throw PanelError("rate series months must be strictly increasing (month " +
                       std::to_string(p.calendar_month) + ")");
    }
    if (p.defined() && !(p.value >= 0.0 && p.value <= 1.0)) {
      throw PanelError("rate value outside [0,1] at month " + std::to_string(p.calendar_month));
    }
  }
}

std::optional<double> RateSeries::at(int month) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), month,
                             [](const RatePoint& p, int m) { return p.calendar_month < m; });
  if (it == points_.end() || it->calendar_month != month || !it->defined()) return std::nullopt;
  return it->value;
}

double RateSeries::mean() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : points_) {
    if (!p.defined()) continue;
    sum += p.value;
    ++n;
  }
  if (n == 0) throw PanelError("rate series has no defined values");
  return sum / static_cast<double>(n);
}

std::string rate_series_to_csv(const RateSeries& series) {
  std::string out = "calendar_month,value,n_at_risk\n";
  for (const auto& p : series.points()) {
    out += std::to_string(p.calendar_month) + ',' + csv::format_double(p.value) + ',' +
           std::to_string(p.n_at_risk) + '\n';
  }
  return out;
}

RateSeries rate_series_from_csv(const std::filesystem::path& path) {
  const auto t = csv::read_table(path);
  const auto cm = t.require("calendar_month"), cv = t.require("value"), cn = t.require("n_at_risk");
  std::vector<RatePoint> pts;
  for (const auto& row : t.rows) {
    pts.push_back({static_cast<int>(csv::parse_int(row[cm], "calendar_month")),
                   csv::parse_double(row[cv], "value"),
                   static_cast<std::size_t>(csv::parse_int(row[cn], "n_at_risk"))});
  }
  return RateSeries(std::move(pts));
}

ForwardDefaultRate forward_default_rate(const PanelDataset& panel, int v) {
  if (v < 1) throw PanelError("v must be >= 1");
  const auto& win = panel.window();
  std::vector<std::size_t> at_risk(static_cast<std::size_t>(win.length()), 0);
  std::vector<std::size_t> events(at_risk.size(), 0);
  std::size_t censored_loans = 0;

  const auto& recs = panel.records();
  for (const auto& span : panel.loans()) {
    bool censored = false;
    const bool closed = is_absorbing(recs[span.end - 1].state);
    for (std::size_t r = span.begin; r + 1 < span.end; ++r) {
      if (recs[r].state != State::P) continue;
      const std::size_t horizon_end = std::min(span.end, r + 1 + static_cast<std::size_t>(v));
      bool hit = false;
      for (std::size_t q = r + 1; q < horizon_end; ++q) {
        if (recs[q].state == State::D) {
          hit = true;
          break;
        }
      }
      if (horizon_end - (r + 1) < static_cast<std::size_t>(v) && !closed) censored = true;
      const auto slot = static_cast<std::size_t>(recs[r].calendar_month - win.first);
      ++at_risk[slot];
      if (hit) ++events[slot];
    }
    if (censored) ++censored_loans;
  }

  std::vector<RatePoint> pts;
  for (std::size_t s = 0; s < at_risk.size(); ++s) {
    if (at_risk[s] == 0) continue;
    pts.push_back({win.first + static_cast<int>(s),
                   static_cast<double>(events[s]) / static_cast<double>(at_risk[s]), at_risk[s]});
  }
  return {RateSeries(std::move(pts)), censored_loans};
}

double representativeness_mae(const RateSeries& a, const RateSeries& b) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : a.points()) {
    if (!p.defined()) continue;
    if (auto q = b.at(p.calendar_month)) {
      sum += std::abs(p.value - *q);
      ++n;
    }
  }
  if (n == 0) throw PanelError("rate series share no defined calendar month");
  return sum / static_cast<double>(n);
}

}  // namespace msrisk::panel
