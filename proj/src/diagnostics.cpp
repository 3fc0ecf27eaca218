#include "msrisk/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msrisk/csv.hpp"

namespace msrisk::diagnostics {

double aic(double loglik, int n_params) {
  if (n_params < 1) throw DiagnosticsError("AIC needs at least one parameter");
  return 2.0 * n_params - 2.0 * loglik;
}

double fisher_pearson_skewness(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3) throw DiagnosticsError("skewness needs at least 3 observations");
  const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / static_cast<double>(n);
  double m2 = 0.0, m3 = 0.0;
  for (double x : sample) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  if (!(m2 > 0.0)) throw DiagnosticsError("skewness undefined for zero variance");
  return m3 / std::pow(m2, 1.5);
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  // The alternating series is useless below ~0.2 where the CDF is < 1e-15.
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test_standard_normal(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 5) throw DiagnosticsError("KS test needs at least 5 observations");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  double d = 0.0;
  const double nn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double cdf = 0.5 * std::erfc(-x[i] / std::sqrt(2.0));
    const double upper = static_cast<double>(i + 1) / nn - cdf;
    const double lower = cdf - static_cast<double>(i) / nn;
    d = std::max({d, upper, lower});
  }
  return {d, kolmogorov_survival(std::sqrt(nn) * d), n};
}

double mae(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DiagnosticsError("MAE inputs differ in length");
  if (a.empty()) throw DiagnosticsError("MAE of empty vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

ForwardSelection forward_select(const std::vector<std::string>& candidates, const AicFitFn& fit,
                                const std::vector<std::string>& base) {
  if (candidates.empty()) throw DiagnosticsError("forward selection needs at least one candidate");
  ForwardSelection out;
  std::vector<std::string> pool = candidates;
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  std::vector<std::string> current = base;
  double current_aic = fit(current);
  out.trace.push_back({0, "", current_aic});

  while (!pool.empty()) {
    double best_aic = current_aic;
    std::size_t best = pool.size();
    for (std::size_t c = 0; c < pool.size(); ++c) {
      auto trial = current;
      trial.push_back(pool[c]);
      double a = 0.0;
      try {
        a = fit(trial);
      } catch (const std::exception& e) {
        out.warnings.push_back("skipped candidate '" + pool[c] + "': " + e.what());
        continue;
      }
      if (!std::isfinite(a)) {
        out.warnings.push_back("skipped candidate '" + pool[c] + "': non-finite AIC");
        continue;
      }
      if (a < best_aic) {
        best_aic = a;
        best = c;
      }
    }
    if (best == pool.size()) break;
    current.push_back(pool[best]);
    out.selected.push_back(pool[best]);
    current_aic = best_aic;
    out.trace.push_back({out.trace.size(), pool[best], best_aic});
    pool.erase(pool.begin() + static_cast<long>(best));
  }
  return out;
}

std::string selection_to_csv(const ForwardSelection& sel) {
  std::string out = "step,candidate,aic\n";
  for (const auto& s : sel.trace) {
    out += std::to_string(s.step) + ',' + (s.candidate.empty() ? "(none)" : s.candidate) + ',' +
           csv::format_double(s.aic) + '\n';
  }
  return out;
}

std::string ks_to_csv(const KsResult& ks) {
  return "statistic,p_value,n\n" + csv::format_double(ks.statistic) + ',' +
         csv::format_double(ks.p_value) + ',' + std::to_string(ks.n) + '\n';
}

}  // namespace msrisk::diagnostics
