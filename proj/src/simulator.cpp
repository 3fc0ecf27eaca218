#include "msrisk/simulator.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "msrisk/csv.hpp"
#include "msrisk/mlr.hpp"

namespace msrisk::sim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream per (seed, index); index ~0 is reserved for macro.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(index + 1)));
}

constexpr std::uint64_t kMacroStream = ~std::uint64_t{0};

std::string loan_id(std::size_t i, std::size_t n) {
  const std::size_t width = std::max<std::size_t>(6, std::to_string(n).size());
  std::string digits = std::to_string(i + 1);
  return "L" + std::string(width - digits.size(), '0') + digits;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& tok : csv::split_line(text, ',')) out.push_back(csv::parse_double(tok, what));
  return out;
}

}  // namespace

std::array<State, 3> coefficient_rows(State from) {
  if (from == State::P) return {State::D, State::S, State::W};
  if (from == State::D) return {State::P, State::S, State::W};
  throw SimError("only P and D have transition coefficients");
}

std::vector<std::string> SimConfig::covariate_names() const {
  std::vector<std::string> names;
  for (const auto& m : macro) names.push_back(m.name);
  for (const auto& l : loan_covariates) names.push_back(l.name);
  return names;
}

void SimConfig::validate() const {
  if (n_loans < 1) throw SimError("scenario needs at least one loan");
  if (n_months < 2) throw SimError("scenario needs at least two months");
  if (threads < 1) throw SimError("thread count must be positive");
  std::set<std::string> seen;
  for (const auto& name : covariate_names())
    if (!seen.insert(name).second) throw SimError("duplicate covariate name '" + name + "'");
  for (const auto& m : macro) {
    if (!(std::abs(m.persistence) < 1.0))
      throw SimError("macro '" + m.name + "': persistence must lie in (-1,1)");
    if (!(m.sd >= 0.0)) throw SimError("macro '" + m.name + "': sd must be nonnegative");
  }
  for (const auto& l : loan_covariates) {
    switch (l.distribution) {
      case Distribution::normal:
        if (!(l.b >= 0.0)) throw SimError("loan covariate '" + l.name + "': sd must be nonnegative");
        break;
      case Distribution::uniform:
        if (!(l.a < l.b)) throw SimError("loan covariate '" + l.name + "': need min < max");
        break;
      case Distribution::bernoulli:
        if (!(l.a >= 0.0 && l.a <= 1.0))
          throw SimError("loan covariate '" + l.name + "': p must lie in [0,1]");
        break;
    }
  }
  const auto cols = static_cast<Eigen::Index>(1 + macro.size() + loan_covariates.size());
  for (State s : kTransientStates) {
    auto it = coefficients.find(s);
    if (it == coefficients.end())
      throw SimError("missing coefficient matrix for starting state " + to_string(s));
    if (it->second.rows() != 3 || it->second.cols() != cols)
      throw SimError("coefficient matrix for " + to_string(s) + " must be 3 x " +
                     std::to_string(cols));
    if (!it->second.allFinite())
      throw SimError("coefficient matrix for " + to_string(s) + " has non-finite entries");
  }
  if (origination_weights.empty()) {
    if (!(initial_share >= 0.0 && initial_share <= 1.0))
      throw SimError("initial_share must lie in [0,1]");
  } else {
    if (origination_weights.size() != static_cast<std::size_t>(n_months))
      throw SimError("origination weights need one value per month");
    double sum = 0.0;
    for (double w : origination_weights) {
      if (!(w >= 0.0)) throw SimError("origination weights must be nonnegative");
      sum += w;
    }
    if (!(sum > 0.0)) throw SimError("origination weights sum to zero");
  }
}

SimConfig parse_scenario(const std::string& content) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(content);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw SimError(std::string("scenario: ") + e.what());
  }
  auto number = [](const pt::ptree& sec, const std::string& section, const std::string& key,
                   std::optional<double> fallback = std::nullopt) {
    const auto v = sec.get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) {
      if (fallback) return *fallback;
      throw SimError("scenario: [" + section + "] lacks '" + key + "'");
    }
    return csv::parse_double(*v, section + "." + key);
  };

  SimConfig c;
  std::map<State, std::map<State, std::vector<double>>> rows;
  for (const auto& [section, body] : tree) {
    if (section == "portfolio") {
      c.n_loans = static_cast<std::size_t>(number(body, section, "loans"));
      c.n_months = static_cast<int>(number(body, section, "months"));
      c.first_month = static_cast<int>(number(body, section, "first_month", 1.0));
      c.seed = static_cast<std::uint64_t>(number(body, section, "seed", 1.0));
      c.threads = static_cast<unsigned>(number(body, section, "threads", 1.0));
    } else if (section.rfind("macro:", 0) == 0) {
      c.macro.push_back({section.substr(6), number(body, section, "mean"),
                         number(body, section, "persistence"), number(body, section, "sd")});
    } else if (section.rfind("loan:", 0) == 0) {
      LoanCovariateSpec l;
      l.name = section.substr(5);
      const std::string dist = body.get<std::string>("distribution", "normal");
      if (dist == "normal") {
        l.distribution = Distribution::normal;
        l.a = number(body, section, "mean");
        l.b = number(body, section, "sd");
      } else if (dist == "uniform") {
        l.distribution = Distribution::uniform;
        l.a = number(body, section, "min");
        l.b = number(body, section, "max");
      } else if (dist == "bernoulli") {
        l.distribution = Distribution::bernoulli;
        l.a = number(body, section, "p");
        l.b = 0.0;
      } else {
        throw SimError("scenario: [" + section + "] has unknown distribution '" + dist + "'");
      }
      c.loan_covariates.push_back(l);
    } else if (section == "origination") {
      if (auto w = body.get_optional<std::string>("weights")) {
        c.origination_weights = parse_list(*w, "origination.weights");
      }
      c.initial_share = number(body, section, "initial_share", c.initial_share);
    } else if (section.rfind("coefficients:", 0) == 0) {
      const auto from = parse_state(section.substr(13));
      if (!from || is_absorbing(*from))
        throw SimError("scenario: [" + section + "] must name state P or D");
      for (const auto& [key, value] : body) {
        const auto to = parse_state(key);
        if (!to) throw SimError("scenario: [" + section + "] has unknown destination '" + key + "'");
        rows[*from][*to] = parse_list(value.data(), section + "." + key);
      }
    } else {
      throw SimError("scenario: unknown section [" + section + "]");
    }
  }

  const std::size_t cols = 1 + c.macro.size() + c.loan_covariates.size();
  for (const auto& [from, dests] : rows) {
    Eigen::MatrixXd b(3, static_cast<Eigen::Index>(cols));
    const auto order = coefficient_rows(from);
    for (std::size_t r = 0; r < order.size(); ++r) {
      auto it = dests.find(order[r]);
      if (it == dests.end())
        throw SimError("scenario: [coefficients:" + to_string(from) + "] lacks destination " +
                       to_string(order[r]));
      if (it->second.size() != cols)
        throw SimError("scenario: [coefficients:" + to_string(from) + "] " + to_string(order[r]) +
                       " needs " + std::to_string(cols) + " values (intercept + covariates)");
      for (std::size_t j = 0; j < cols; ++j)
        b(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = it->second[j];
    }
    if (dests.size() != order.size())
      throw SimError("scenario: [coefficients:" + to_string(from) +
                     "] lists the baseline or a repeated destination");
    c.coefficients[from] = b;
  }
  c.validate();
  return c;
}

SimConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot open scenario " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_scenario(os.str());
}

std::map<std::string, std::vector<double>> simulate_macro(const SimConfig& config) {
  auto rng = stream(config.seed, kMacroStream);
  std::normal_distribution<double> z(0.0, 1.0);
  std::map<std::string, std::vector<double>> out;
  // Paths are drawn in declaration order from one stream.
  for (const auto& m : config.macro) {
    std::vector<double> path(static_cast<std::size_t>(config.n_months));
    const double stationary_sd = m.sd / std::sqrt(1.0 - m.persistence * m.persistence);
    double x = m.mean + stationary_sd * z(rng);
    for (auto& v : path) {
      v = x;
      x = m.mean + m.persistence * (x - m.mean) + m.sd * z(rng);
    }
    out[m.name] = std::move(path);
  }
  return out;
}

markov::TimeVaryingMatrices GroundTruth::true_matrices() const {
  markov::TimeVaryingMatrices tv;
  for (const auto& m : months) {
    markov::MonthlyMatrix mm;
    mm.calendar_month = m.calendar_month;
    mm.p = m.p;
    for (State s : kTransientStates) mm.row_defined[index_of(s)] = m.row_defined(s);
    tv.by_month.push_back(mm);
  }
  return tv;
}

namespace {

struct LoanStep {
  int month_index = 0;  // index of the later month
  State from = State::P;
  Eigen::Vector4d probs;  // P, D, S, W
};

struct LoanOutput {
  std::vector<panel::LoanRecord> records;
  std::vector<LoanStep> steps;
};

LoanOutput simulate_loan(const SimConfig& c, std::size_t i,
                         const std::vector<std::vector<double>>& macro_by_month,
                         const std::vector<double>& origination_weights) {
  auto rng = stream(c.seed, i);
  std::discrete_distribution<int> cohort(origination_weights.begin(), origination_weights.end());
  const int start = cohort(rng);

  std::vector<double> loan_values;
  for (const auto& l : c.loan_covariates) {
    switch (l.distribution) {
      case Distribution::normal:
        loan_values.push_back(std::normal_distribution<double>(l.a, l.b)(rng));
        break;
      case Distribution::uniform:
        loan_values.push_back(std::uniform_real_distribution<double>(l.a, l.b)(rng));
        break;
      case Distribution::bernoulli:
        loan_values.push_back(std::bernoulli_distribution(l.a)(rng) ? 1.0 : 0.0);
        break;
    }
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  LoanOutput out;
  const std::string id = loan_id(i, c.n_loans);
  State state = State::P;
  const auto p = static_cast<Eigen::Index>(1 + macro_by_month.front().size() + loan_values.size());
  Eigen::VectorXd x(p);
  for (int t = start; t < c.n_months; ++t) {
    panel::LoanRecord rec;
    rec.loan_id = id;
    rec.period = t - start + 1;
    rec.calendar_month = c.first_month + t;
    rec.state = state;
    rec.covariates = macro_by_month[static_cast<std::size_t>(t)];
    rec.covariates.insert(rec.covariates.end(), loan_values.begin(), loan_values.end());
    if (is_absorbing(state) || t + 1 == c.n_months) {
      out.records.push_back(std::move(rec));
      break;
    }
    x[0] = 1.0;
    for (std::size_t j = 0; j < rec.covariates.size(); ++j)
      x[static_cast<Eigen::Index>(j) + 1] = rec.covariates[j];
    out.records.push_back(std::move(rec));

    const Eigen::VectorXd probs = mlr::baseline_softmax(c.coefficients.at(state) * x);
    const auto rows = coefficient_rows(state);
    const std::array<State, 4> order{state, rows[0], rows[1], rows[2]};
    LoanStep step;
    step.month_index = t + 1;
    step.from = state;
    step.probs.setZero();
    for (int j = 0; j < 4; ++j) step.probs[index_of(order[static_cast<std::size_t>(j)])] = probs[j];
    out.steps.push_back(step);

    const double u = unif(rng);
    double acc = 0.0;
    State next = order[3];
    for (int j = 0; j < 4; ++j) {
      acc += probs[j];
      if (u < acc) {
        next = order[static_cast<std::size_t>(j)];
        break;
      }
    }
    state = next;
  }
  return out;
}

}  // namespace

Simulation simulate_portfolio(const SimConfig& config) {
  config.validate();
  const auto macro = simulate_macro(config);
  const auto n_months = static_cast<std::size_t>(config.n_months);

  std::vector<std::vector<double>> macro_by_month(n_months);
  for (std::size_t t = 0; t < n_months; ++t)
    for (const auto& m : config.macro) macro_by_month[t].push_back(macro.at(m.name)[t]);

  std::vector<double> weights = config.origination_weights;
  if (weights.empty()) {
    weights.assign(n_months, (1.0 - config.initial_share) / static_cast<double>(n_months - 1));
    weights[0] = config.initial_share;
  }

  std::vector<LoanOutput> loans(config.n_loans);
  const unsigned threads = std::min<unsigned>(config.threads, static_cast<unsigned>(config.n_loans));
  auto work = [&](unsigned tid) {
    for (std::size_t i = tid; i < config.n_loans; i += threads)
      loans[i] = simulate_loan(config, i, macro_by_month, weights);
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }

  // Sequential reduction in loan order keeps sums independent of threading.
  std::vector<std::array<Eigen::Vector4d, 2>> sums(n_months);
  std::vector<std::array<std::size_t, 2>> at_risk(n_months, {0, 0});
  for (auto& s : sums) s = {Eigen::Vector4d::Zero(), Eigen::Vector4d::Zero()};
  std::vector<panel::LoanRecord> records;
  for (auto& l : loans) {
    for (const auto& st : l.steps) {
      const auto r = static_cast<std::size_t>(index_of(st.from));
      sums[static_cast<std::size_t>(st.month_index)][r] += st.probs;
      ++at_risk[static_cast<std::size_t>(st.month_index)][r];
    }
    std::move(l.records.begin(), l.records.end(), std::back_inserter(records));
    l = LoanOutput{};
  }

  Simulation sim{panel::PanelDataset::build(config.covariate_names(), std::move(records),
                                            config.window()),
                 {}};
  GroundTruth& truth = sim.truth;
  truth.covariate_names = config.covariate_names();
  truth.coefficients = config.coefficients;
  truth.first_month = config.first_month;
  truth.macro_paths = macro;
  for (std::size_t t = 1; t < n_months; ++t) {
    TrueMonth m;
    m.calendar_month = config.first_month + static_cast<int>(t);
    m.at_risk = at_risk[t];
    for (State s : kTransientStates) {
      const auto r = static_cast<std::size_t>(index_of(s));
      if (at_risk[t][r] > 0) {
        m.p.row(index_of(s)) = (sums[t][r] / static_cast<double>(at_risk[t][r])).transpose();
      } else {
        m.p.row(index_of(s)).setConstant(kNaN);
      }
    }
    truth.months.push_back(m);
  }
  return sim;
}

std::string truth_to_csv(const GroundTruth& truth) {
  std::string out = "kind,calendar_month,from_state,to_state,term,value\n";
  std::vector<std::string> terms{"(intercept)"};
  terms.insert(terms.end(), truth.covariate_names.begin(), truth.covariate_names.end());
  for (const auto& [from, b] : truth.coefficients) {
    const auto rows = coefficient_rows(from);
    for (Eigen::Index r = 0; r < b.rows(); ++r)
      for (Eigen::Index j = 0; j < b.cols(); ++j)
        out += "coefficient,," + to_string(from) + ',' + to_string(rows[static_cast<std::size_t>(r)]) +
               ',' + terms[static_cast<std::size_t>(j)] + ',' + csv::format_double(b(r, j)) + '\n';
  }
  for (const auto& m : truth.months) {
    const std::string month = std::to_string(m.calendar_month);
    for (State a : kAllStates)
      for (State b : kAllStates)
        out += "matrix," + month + ',' + to_string(a) + ',' + to_string(b) + ",," +
               csv::format_double(m.p(index_of(a), index_of(b))) + '\n';
    for (State s : kTransientStates)
      out += "at_risk," + month + ',' + to_string(s) + ",,," +
             std::to_string(m.at_risk[static_cast<std::size_t>(index_of(s))]) + '\n';
  }
  for (const auto& [name, path] : truth.macro_paths)
    for (std::size_t t = 0; t < path.size(); ++t)
      out += "macro," + std::to_string(truth.first_month + static_cast<int>(t)) + ",,," + name +
             ',' + csv::format_double(path[t]) + '\n';
  return out;
}

void export_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  csv::write_file(path, truth_to_csv(truth));
}

GroundTruth parse_truth(const std::string& content) {
  std::istringstream in(content);
  const csv::Table t = csv::parse_table(in, "truth");
  const auto c_kind = t.require("kind");
  const auto c_month = t.require("calendar_month");
  const auto c_from = t.require("from_state");
  const auto c_to = t.require("to_state");
  const auto c_term = t.require("term");
  const auto c_value = t.require("value");

  GroundTruth g;
  std::map<State, std::map<State, std::vector<double>>> coef;
  std::map<int, TrueMonth> months;
  std::map<std::string, std::map<int, double>> macro;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string where = "truth line " + std::to_string(t.line_numbers[i]);
    const std::string& kind = row[c_kind];
    const double value = csv::parse_double(row[c_value], where);
    if (kind == "coefficient") {
      const auto from = parse_state(row[c_from]);
      const auto to = parse_state(row[c_to]);
      if (!from || !to) throw SimError(where + ": bad state");
      if (*from == State::P && *to == State::D && row[c_term] != "(intercept)")
        g.covariate_names.push_back(row[c_term]);
      coef[*from][*to].push_back(value);
    } else if (kind == "matrix" || kind == "at_risk") {
      const int month = static_cast<int>(csv::parse_int(row[c_month], where));
      auto [it, fresh] = months.try_emplace(month);
      it->second.calendar_month = month;
      const auto from = parse_state(row[c_from]);
      if (!from) throw SimError(where + ": bad state");
      if (kind == "matrix") {
        const auto to = parse_state(row[c_to]);
        if (!to) throw SimError(where + ": bad state");
        it->second.p(index_of(*from), index_of(*to)) = value;
      } else {
        if (is_absorbing(*from)) throw SimError(where + ": at-risk count for an absorbing state");
        it->second.at_risk[static_cast<std::size_t>(index_of(*from))] =
            static_cast<std::size_t>(value);
      }
    } else if (kind == "macro") {
      macro[row[c_term]][static_cast<int>(csv::parse_int(row[c_month], where))] = value;
    } else {
      throw SimError(where + ": unknown kind '" + kind + "'");
    }
  }
  for (const auto& [from, dests] : coef) {
    const auto order = coefficient_rows(from);
    const auto cols = static_cast<Eigen::Index>(dests.begin()->second.size());
    Eigen::MatrixXd b(3, cols);
    for (std::size_t r = 0; r < 3; ++r) {
      auto it = dests.find(order[r]);
      if (it == dests.end() || static_cast<Eigen::Index>(it->second.size()) != cols)
        throw SimError("truth: incomplete coefficients for " + to_string(from));
      for (Eigen::Index j = 0; j < cols; ++j) b(static_cast<Eigen::Index>(r), j) = it->second[static_cast<std::size_t>(j)];
    }
    g.coefficients[from] = b;
  }
  for (auto& [m, tm] : months) g.months.push_back(tm);
  g.first_month = g.months.empty() ? 1 : g.months.front().calendar_month - 1;
  for (const auto& [name, by_month] : macro) {
    std::vector<double> path;
    for (const auto& [m, v] : by_month) path.push_back(v);
    g.first_month = by_month.begin()->first;
    g.macro_paths[name] = std::move(path);
  }
  return g;
}

GroundTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot open truth file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_truth(os.str());
}

}  // namespace msrisk::sim
