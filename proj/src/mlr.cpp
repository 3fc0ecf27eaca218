#include "msrisk/mlr.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "msrisk/csv.hpp"
#include "msrisk/diagnostics.hpp"
#include "msrisk/optimize.hpp"
#include "msrisk/roc.hpp"

namespace msrisk::mlr {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd unflatten(const Eigen::VectorXd& w, Eigen::Index k, Eigen::Index p) {
  return Eigen::Map<const RowMajor>(w.data(), k, p);
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& b) {
  RowMajor rm = b;
  return Eigen::Map<const Eigen::VectorXd>(rm.data(), rm.size());
}

/// Row-wise softmax over (0, eta_1..eta_K); returns n x K non-baseline
/// probabilities and fills log p of the observed category.
double evaluate(const Eigen::MatrixXd& b, const MlrDesign& d, Eigen::MatrixXd* probs,
                Eigen::VectorXd* grad) {
  const Eigen::Index k = b.rows();
  const Eigen::MatrixXd eta = d.x * b.transpose();  // n x K
  Eigen::MatrixXd pr(eta.rows(), k);
  Eigen::MatrixXd resid;  // indicator - p, n x K
  if (grad) resid.resize(eta.rows(), k);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    const double m = std::max(0.0, eta.row(i).maxCoeff());
    double denom = std::exp(-m);
    for (Eigen::Index j = 0; j < k; ++j) {
      pr(i, j) = std::exp(eta(i, j) - m);
      denom += pr(i, j);
    }
    pr.row(i) /= denom;
    const int y = d.response[static_cast<std::size_t>(i)];
    ll += (y == 0 ? 0.0 : eta(i, y - 1)) - m - std::log(denom);
    if (grad) {
      for (Eigen::Index j = 0; j < k; ++j) resid(i, j) = (y == j + 1 ? 1.0 : 0.0) - pr(i, j);
    }
  }
  if (grad) *grad = flatten(resid.transpose() * d.x);
  if (probs) *probs = std::move(pr);
  return ll;
}

/// Fisher information of the flattened coefficients at probabilities `pr`.
Eigen::MatrixXd fisher_information(const Eigen::MatrixXd& pr, const Eigen::MatrixXd& x) {
  const Eigen::Index k = pr.cols();
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd info(k * p, k * p);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index c = a; c < k; ++c) {
      Eigen::VectorXd w = -pr.col(a).cwiseProduct(pr.col(c));
      if (a == c) w += pr.col(a);
      const Eigen::MatrixXd block = x.transpose() * w.asDiagonal() * x;
      info.block(a * p, c * p, p, p) = block;
      info.block(c * p, a * p, p, p) = block.transpose();
    }
  }
  return info;
}

std::string join(const std::vector<std::string>& v, char sep = ',') {
  std::string s;
  for (const auto& x : v) {
    if (!s.empty()) s += sep;
    s += x;
  }
  return s;
}

}  // namespace

std::vector<State> MlrSpec::destinations() const {
  if (starting_state == State::P) return {State::P, State::D, State::S, State::W};
  if (starting_state == State::D) return {State::D, State::P, State::S, State::W};
  throw MlrError("MLR starting state must be P or D");
}

std::vector<std::string> MlrSpec::term_names() const {
  std::vector<std::string> t{"(intercept)"};
  t.insert(t.end(), covariates.begin(), covariates.end());
  for (const auto& s : splines)
    for (std::size_t k = 1; k <= s.dimension(); ++k) t.push_back(s.covariate + ":ns" + std::to_string(k));
  return t;
}

std::size_t MlrSpec::num_terms() const {
  std::size_t n = 1 + covariates.size();
  for (const auto& s : splines) n += s.dimension();
  return n;
}

void MlrSpec::validate() const {
  (void)destinations();
  for (const auto& s : splines) {
    s.validate();
    if (std::find(covariates.begin(), covariates.end(), s.covariate) != covariates.end())
      throw MlrError("covariate '" + s.covariate + "' is listed both linearly and as a spline");
  }
}

int MlrFit::destination_index(State s) const {
  for (std::size_t i = 0; i < destinations.size(); ++i)
    if (destinations[i] == s) return static_cast<int>(i);
  throw MlrError("state " + to_string(s) + " is not a destination of this model");
}

namespace {

std::vector<std::size_t> resolve_columns(const MlrSpec& spec,
                                         const std::vector<std::string>& names) {
  auto lookup = [&](const std::string& c) {
    auto it = std::find(names.begin(), names.end(), c);
    if (it == names.end()) throw MlrError("missing covariate '" + c + "'");
    return static_cast<std::size_t>(it - names.begin());
  };
  std::vector<std::size_t> cols;
  for (const auto& c : spec.covariates) cols.push_back(lookup(c));
  for (const auto& s : spec.splines) cols.push_back(lookup(s.covariate));
  return cols;
}

void fill_row(const MlrSpec& spec, const std::vector<std::size_t>& cols,
              const std::vector<double>& covariates, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  row[0] = 1.0;
  Eigen::Index pos = 1;
  std::size_t c = 0;
  for (; c < spec.covariates.size(); ++c) row[pos++] = covariates[cols[c]];
  for (const auto& s : spec.splines) {
    const Eigen::VectorXd basis = natural_spline_basis(s, covariates[cols[c++]]);
    row.segment(pos, basis.size()) = basis.transpose();
    pos += basis.size();
  }
}

}  // namespace

Eigen::VectorXd design_row(const MlrSpec& spec, const std::vector<std::string>& covariate_names,
                           const std::vector<double>& covariates) {
  const auto cols = resolve_columns(spec, covariate_names);
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(spec.num_terms()));
  fill_row(spec, cols, covariates, row);
  return row.transpose();
}

MlrDesign build_design(const MlrSpec& spec, const panel::PanelDataset& panel) {
  spec.validate();
  const auto cols = resolve_columns(spec, panel.covariate_names());
  const auto dest = spec.destinations();
  const auto& recs = panel.records();

  std::size_t n = 0;
  for (const auto& span : panel.loans())
    for (std::size_t r = span.begin; r + 1 < span.end; ++r)
      if (recs[r].state == spec.starting_state) ++n;
  if (n == 0)
    throw MlrError("no transitions start in state " + to_string(spec.starting_state));

  MlrDesign d;
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.num_terms()));
  d.response.reserve(n);
  d.calendar_month.reserve(n);
  d.loan.reserve(n);
  Eigen::Index row = 0;
  for (std::size_t l = 0; l < panel.loans().size(); ++l) {
    const auto& span = panel.loans()[l];
    for (std::size_t r = span.begin; r + 1 < span.end; ++r) {
      if (recs[r].state != spec.starting_state) continue;
      fill_row(spec, cols, recs[r].covariates, d.x.row(row++));
      const auto it = std::find(dest.begin(), dest.end(), recs[r + 1].state);
      d.response.push_back(static_cast<int>(it - dest.begin()));
      d.calendar_month.push_back(recs[r + 1].calendar_month);
      d.loan.push_back(l);
    }
  }
  return d;
}

double mlr_loglik(const Eigen::MatrixXd& coefficients, const MlrDesign& design,
                  Eigen::VectorXd* gradient) {
  return evaluate(coefficients, design, nullptr, gradient);
}

MlrFit fit_mlr(const MlrSpec& spec, const MlrDesign& design, const MlrOptions& options) {
  spec.validate();
  const auto dest = spec.destinations();
  const auto terms = spec.term_names();
  const Eigen::Index k = static_cast<Eigen::Index>(dest.size()) - 1;
  const Eigen::Index p = design.x.cols();
  if (static_cast<std::size_t>(p) != terms.size())
    throw MlrError("design has " + std::to_string(p) + " columns, spec expects " +
                   std::to_string(terms.size()));
  if (design.rows() == 0) throw MlrError("empty design");

  std::vector<double> freq(dest.size(), 0.0);
  for (int y : design.response) freq[static_cast<std::size_t>(y)] += 1.0;
  for (std::size_t j = 0; j < dest.size(); ++j)
    if (freq[j] == 0.0)
      throw MlrError("destination " + to_string(dest[j]) + " from " +
                     to_string(spec.starting_state) + " is never observed");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.x);
  if (qr.rank() < p) {
    std::string bad;
    for (Eigen::Index j = qr.rank(); j < p; ++j)
      bad += (bad.empty() ? "" : ", ") + terms[static_cast<std::size_t>(qr.colsPermutation().indices()[j])];
    throw MlrError("MLR design is rank deficient; collinear column(s): " + bad);
  }

  const auto n = static_cast<double>(design.rows());
  Eigen::MatrixXd b0 = Eigen::MatrixXd::Zero(k, p);
  for (Eigen::Index j = 0; j < k; ++j) b0(j, 0) = std::log(freq[static_cast<std::size_t>(j) + 1] / freq[0]);

  const double ridge = options.ridge;
  optim::Objective objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g) {
    Eigen::VectorXd grad;
    const double ll = evaluate(unflatten(w, k, p), design, nullptr, &grad);
    g = -grad + 2.0 * ridge * w;
    return -ll + ridge * w.squaredNorm();
  };

  Eigen::MatrixXd pr0;
  evaluate(b0, design, &pr0, nullptr);
  Eigen::MatrixXd info0 = fisher_information(pr0, design.x);
  info0.diagonal().array() += 2.0 * ridge;
  optim::BfgsOptions bo;
  bo.gradient_tolerance = options.gradient_tolerance;
  bo.max_iterations = options.max_iterations;
  bo.initial_inverse_hessian = info0.ldlt().solve(Eigen::MatrixXd::Identity(k * p, k * p));
  const optim::BfgsResult r = optim::minimize_bfgs(objective, flatten(b0), bo);

  MlrFit fit;
  fit.starting_state = spec.starting_state;
  fit.destinations = dest;
  fit.terms = terms;
  fit.coefficients = unflatten(r.x, k, p);
  Eigen::MatrixXd pr;
  fit.loglik = evaluate(fit.coefficients, design, &pr, nullptr);
  fit.iterations = r.iterations;
  fit.converged = r.converged;
  fit.n_obs = design.rows();
  fit.null_loglik = 0.0;
  for (double f : freq) fit.null_loglik += f * std::log(f / n);
  fit.aic = diagnostics::aic(fit.loglik, static_cast<int>(k * p));

  if (fit.coefficients.cwiseAbs().maxCoeff() > options.separation_bound) {
    const double further = evaluate(1.5 * fit.coefficients, design, nullptr, nullptr);
    if (further > fit.loglik + 1e-9 * std::abs(fit.loglik))
      throw MlrError("complete or quasi-complete separation from state " +
                     to_string(spec.starting_state) +
                     ": coefficients diverge while the likelihood keeps rising; check for "
                     "covariates that perfectly predict a destination");
  }

  Eigen::MatrixXd info = fisher_information(pr, design.x);
  info.diagonal().array() += 2.0 * ridge;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  fit.std_errors = Eigen::MatrixXd::Constant(k, p, std::numeric_limits<double>::quiet_NaN());
  if (lu.isInvertible()) {
    const Eigen::VectorXd var = lu.inverse().diagonal();
    fit.std_errors = unflatten(var.cwiseMax(0.0).cwiseSqrt(), k, p);
  }
  return fit;
}

Eigen::VectorXd baseline_softmax(const Eigen::VectorXd& eta) {
  const double m = eta.size() > 0 ? std::max(0.0, eta.maxCoeff()) : 0.0;
  Eigen::VectorXd out(eta.size() + 1);
  out[0] = std::exp(-m);
  for (Eigen::Index j = 0; j < eta.size(); ++j) out[j + 1] = std::exp(eta[j] - m);
  return out / out.sum();
}

Eigen::VectorXd predict_probs(const MlrFit& fit, const Eigen::VectorXd& x) {
  if (x.size() != fit.coefficients.cols())
    throw MlrError("design row has " + std::to_string(x.size()) + " entries, expected " +
                   std::to_string(fit.coefficients.cols()));
  return baseline_softmax(fit.coefficients * x);
}

double relative_odds(const MlrFit& fit, const Eigen::VectorXd& x, State a1, State a2) {
  if (a1 == a2) throw MlrError("relative odds need two different destinations");
  const Eigen::VectorXd p = predict_probs(fit, x);
  return p[fit.destination_index(a1)] / p[fit.destination_index(a2)];
}

double mcfadden_r2(const MlrFit& fit) {
  if (!(fit.null_loglik < 0.0)) throw MlrError("McFadden R2 needs a negative null log-likelihood");
  return 1.0 - fit.loglik / fit.null_loglik;
}

std::string coefficients_to_csv(const MlrFit& fit) {
  std::string out = "destination,term,estimate,std_error\n";
  for (Eigen::Index j = 0; j < fit.coefficients.rows(); ++j)
    for (Eigen::Index t = 0; t < fit.coefficients.cols(); ++t)
      out += to_string(fit.destinations[static_cast<std::size_t>(j) + 1]) + ',' +
             fit.terms[static_cast<std::size_t>(t)] + ',' +
             csv::format_double(fit.coefficients(j, t)) + ',' +
             csv::format_double(fit.std_errors(j, t)) + '\n';
  return out;
}

std::string fit_summary(const MlrFit& fit, const MlrSpec& spec) {
  std::vector<std::string> dest;
  for (State s : fit.destinations) dest.push_back(to_string(s));
  std::ostringstream os;
  os << "model: mlr\n"
     << "starting_state: " << to_string(fit.starting_state) << '\n'
     << "destinations: " << join(dest) << '\n'
     << "covariates: " << join(spec.covariates) << '\n';
  for (const auto& s : spec.splines) {
    std::vector<std::string> knots{csv::format_double(s.boundary[0])};
    for (double k : s.interior_knots) knots.push_back(csv::format_double(k));
    knots.push_back(csv::format_double(s.boundary[1]));
    os << "spline." << s.covariate << ": " << join(knots, ';') << '\n';
  }
  double r2 = std::numeric_limits<double>::quiet_NaN();
  if (fit.null_loglik < 0.0) r2 = mcfadden_r2(fit);
  os << "n_obs: " << fit.n_obs << '\n'
     << "coefficients: " << fit.num_coefficients() << '\n'
     << "loglik: " << csv::format_double(fit.loglik) << '\n'
     << "null_loglik: " << csv::format_double(fit.null_loglik) << '\n'
     << "aic: " << csv::format_double(fit.aic) << '\n'
     << "mcfadden_r2: " << csv::format_double(r2) << '\n'
     << "iterations: " << fit.iterations << '\n'
     << "converged: " << (fit.converged ? "true" : "false") << '\n';
  return os.str();
}

std::vector<AucRow> destination_auc(const MlrFit& fit, const MlrDesign& design, double level) {
  const Eigen::Index n = design.x.rows();
  Eigen::MatrixXd probs(n, static_cast<Eigen::Index>(fit.destinations.size()));
  for (Eigen::Index i = 0; i < n; ++i)
    probs.row(i) = predict_probs(fit, design.x.row(i).transpose()).transpose();
  std::vector<AucRow> rows;
  std::vector<double> scores(static_cast<std::size_t>(n));
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (std::size_t j = 0; j < fit.destinations.size(); ++j) {
    std::size_t pos = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      scores[ii] = probs(i, static_cast<Eigen::Index>(j));
      labels[ii] = design.response[ii] == static_cast<int>(j) ? 1 : 0;
      pos += static_cast<std::size_t>(labels[ii]);
    }
    if (pos < 2 || pos + 2 > static_cast<std::size_t>(n)) continue;
    const AucInterval ci = delong_ci(scores, labels, level);
    rows.push_back({fit.destinations[j], static_cast<std::size_t>(n), ci.auc, ci.lower, ci.upper});
  }
  return rows;
}

std::string auc_to_csv(const std::vector<AucRow>& rows) {
  std::string out = "destination,sample_size,auc,ci_lower,ci_upper\n";
  for (const auto& r : rows)
    out += to_string(r.destination) + ',' + std::to_string(r.sample_size) + ',' +
           csv::format_double(r.auc) + ',' + csv::format_double(r.ci_lower) + ',' +
           csv::format_double(r.ci_upper) + '\n';
  return out;
}

}  // namespace msrisk::mlr
