#pragma once

// Static line charts for reports.

#include <string>
#include <utility>
#include <vector>

namespace msrisk::svg {

struct Line {
  std::string label;
  std::vector<std::pair<double, double>> points;  // NaN y values break the line
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Line> lines;
  /// Free text drawn under the title, e.g. an MAE figure.
  std::string annotation;
  int width = 720;
  int height = 420;
};

std::string render(const Chart& chart);

}  // namespace msrisk::svg
