#include "msrisk/roc.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>
#include <vector>

namespace msrisk::mlr {

namespace {

/// 1-based mid-ranks (ties share the mean rank).
std::vector<double> midranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

struct Split {
  std::vector<double> pos, neg;
};

Split split(std::span<const double> scores, std::span<const int> labels, std::size_t min_each) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels differ in length");
  Split s;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) {
      s.pos.push_back(scores[i]);
    } else if (labels[i] == 0) {
      s.neg.push_back(scores[i]);
    } else {
      throw std::invalid_argument("labels must be 0 or 1");
    }
  }
  if (s.pos.size() < min_each || s.neg.size() < min_each)
    throw std::invalid_argument("AUC needs at least " + std::to_string(min_each) +
                                " observation(s) in each class");
  return s;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const Split s = split(scores, labels, 1);
  std::vector<double> all = s.pos;
  all.insert(all.end(), s.neg.begin(), s.neg.end());
  const auto rank = midranks(all);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < s.pos.size(); ++i) rank_sum += rank[i];
  const double m = static_cast<double>(s.pos.size());
  const double n = static_cast<double>(s.neg.size());
  return (rank_sum - m * (m + 1.0) / 2.0) / (m * n);
}

AucInterval delong_ci(std::span<const double> scores, std::span<const int> labels, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0,1)");
  const Split s = split(scores, labels, 2);
  const std::size_t m = s.pos.size();
  const std::size_t n = s.neg.size();
  std::vector<double> all = s.pos;
  all.insert(all.end(), s.neg.begin(), s.neg.end());
  const auto rank_all = midranks(all);
  const auto rank_pos = midranks(s.pos);
  const auto rank_neg = midranks(s.neg);

  // Placement values: share of the other class beaten (ties one half).
  std::vector<double> v10(m), v01(n);
  for (std::size_t i = 0; i < m; ++i)
    v10[i] = (rank_all[i] - rank_pos[i]) / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j)
    v01[j] = 1.0 - (rank_all[m + j] - rank_neg[j]) / static_cast<double>(m);

  AucInterval out;
  out.auc = std::accumulate(v10.begin(), v10.end(), 0.0) / static_cast<double>(m);
  auto sample_var = [](const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
  };
  out.variance = sample_var(v10) / static_cast<double>(m) + sample_var(v01) / static_cast<double>(n);
  if (!(out.variance > 0.0)) {
    out.variance = 0.0;
    out.degenerate = true;
    out.lower = out.upper = out.auc;
    return out;
  }
  const double z =
      boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
  const double half = z * std::sqrt(out.variance);
  out.lower = std::max(0.0, out.auc - half);
  out.upper = std::min(1.0, out.auc + half);
  return out;
}

}  // namespace msrisk::mlr
