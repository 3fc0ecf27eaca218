#include "msrisk/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

namespace msrisk::svg {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

constexpr std::array<const char*, 6> kColors{"#1f5aa6", "#c8461e", "#2e8b3a",
                                             "#7a3fa0", "#8a6d1c", "#444444"};

}  // namespace

std::string render(const Chart& c) {
  const double left = 70, right = 150, top = 50, bottom = 50;
  const double pw = c.width - left - right;
  const double ph = c.height - top - bottom;

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& l : c.lines)
    for (const auto& [x, y] : l.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + (y0 == 0 ? 1 : std::abs(y0) * 0.1);
  const double pad = (y1 - y0) * 0.05;
  y0 -= pad;
  y1 += pad;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(c.width) +
                  "\" height=\"" + std::to_string(c.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(left) + "\" y=\"22\" font-size=\"15\">" + escape(c.title) + "</text>\n";
  if (!c.annotation.empty())
    s += "<text x=\"" + num(left) + "\" y=\"40\" fill=\"#555\">" + escape(c.annotation) + "</text>\n";
  s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" +
       num(ph) + "\" fill=\"none\" stroke=\"#888\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y0 + (y1 - y0) * i / 4.0;
    const double xv = x0 + (x1 - x0) * i / 4.0;
    s += "<line x1=\"" + num(left) + "\" x2=\"" + num(left + pw) + "\" y1=\"" + num(sy(yv)) +
         "\" y2=\"" + num(sy(yv)) + "\" stroke=\"#eee\"/>\n";
    s += "<text x=\"" + num(left - 6) + "\" y=\"" + num(sy(yv) + 4) + "\" text-anchor=\"end\">" +
         tick(yv) + "</text>\n";
    s += "<text x=\"" + num(sx(xv)) + "\" y=\"" + num(top + ph + 16) + "\" text-anchor=\"middle\">" +
         tick(xv) + "</text>\n";
  }
  s += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(c.height - 12.0) +
       "\" text-anchor=\"middle\">" + escape(c.x_label) + "</text>\n";
  s += "<text transform=\"translate(16," + num(top + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + escape(c.y_label) + "</text>\n";

  for (std::size_t i = 0; i < c.lines.size(); ++i) {
    const auto& l = c.lines[i];
    const char* color = kColors[i % kColors.size()];
    std::string d;
    bool pen_down = false;
    for (const auto& [x, y] : l.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) {
        pen_down = false;
        continue;
      }
      d += (pen_down ? " L" : " M") + num(sx(x)) + ',' + num(sy(y));
      pen_down = true;
    }
    if (!d.empty())
      s += "<path d=\"" + d.substr(1) + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(i);
    s += "<line x1=\"" + num(left + pw + 12) + "\" x2=\"" + num(left + pw + 32) + "\" y1=\"" +
         num(ly - 4) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(left + pw + 38) + "\" y=\"" + num(ly) + "\">" + escape(l.label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace msrisk::svg
