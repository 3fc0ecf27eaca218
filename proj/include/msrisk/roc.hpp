#pragma once

#include <span>
#include <stdexcept>

namespace msrisk::mlr {

/// Area under the ROC curve as the Mann-Whitney statistic; tied
/// positive/negative pairs count one half. Labels are 0/1.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct AucInterval {
  double auc = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double variance = 0.0;
  /// Zero variance: the interval collapsed onto the point estimate.
  bool degenerate = false;
};

/// DeLong variance from placement values and a normal interval at `level`,
/// clipped to [0,1].
AucInterval delong_ci(std::span<const double> scores, std::span<const int> labels,
                      double level = 0.95);

}  // namespace msrisk::mlr
