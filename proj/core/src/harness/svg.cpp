#include "otblab/harness/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "otblab/common.hpp"

namespace otblab::harness {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#17becf", "#bcbd22"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

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

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;

  double map(double v, double from, double to) const {
    const double a = log ? std::log10(v) : v;
    const double l = log ? std::log10(lo) : lo;
    const double h = log ? std::log10(hi) : hi;
    return from + (a - l) / (h - l) * (to - from);
  }
  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0); }
};

Axis fit(const std::vector<double>& values, bool log, bool include_zero) {
  Axis a;
  a.log = log;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (!a.usable(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo)) {
    lo = log ? 1 : 0;
    hi = log ? 10 : 1;
  }
  if (include_zero && !log) {
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
  }
  if (hi <= lo) {
    if (log) {
      lo /= 2;
      hi *= 2;
    } else {
      const double pad = lo == 0 ? 1 : std::abs(lo) * 0.1;
      lo -= pad;
      hi += pad;
    }
  }
  a.lo = lo;
  a.hi = hi;
  return a;
}

std::string frame(const ChartLabels& labels, const Axis& x, const Axis& y, bool numeric_x) {
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
       num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
       escape(labels.title) + "</text>\n";
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" +
       num(y0) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" +
       num(y1) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double frac = i / 4.0;
    const double v = y.log ? std::pow(10.0, std::log10(y.lo) + frac * (std::log10(y.hi) - std::log10(y.lo)))
                           : y.lo + frac * (y.hi - y.lo);
    const double py = y.map(v, y0, y1);
    s += "<line x1=\"" + num(x0 - 4) + "\" y1=\"" + num(py) + "\" x2=\"" + num(x1) + "\" y2=\"" +
         num(py) + "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" +
         tick(v) + "</text>\n";
    if (numeric_x) {
      const double xv = x.log ? std::pow(10.0, std::log10(x.lo) + frac * (std::log10(x.hi) - std::log10(x.lo)))
                              : x.lo + frac * (x.hi - x.lo);
      const double px = x.map(xv, x0, x1);
      s += "<text x=\"" + num(px) + "\" y=\"" + num(y0 + 18) + "\" text-anchor=\"middle\">" +
           tick(xv) + "</text>\n";
    }
  }
  s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 15) +
       "\" text-anchor=\"middle\">" + escape(labels.x_label) + "</text>\n";
  s += "<text transform=\"translate(18," + num((y0 + y1) / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + escape(labels.y_label) + "</text>\n";
  return s;
}

}  // namespace

std::string line_chart(const std::vector<Series>& series, const ChartLabels& labels) {
  std::vector<double> xs, ys;
  for (const Series& s : series) {
    if (s.x.size() != s.y.size()) throw Error("series x and y lengths differ");
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  const Axis x = fit(xs, labels.log_x, false);
  const Axis y = fit(ys, labels.log_y, false);
  std::string out = frame(labels, x, y, true);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!x.usable(s.x[i]) || !y.usable(s.y[i])) continue;
      if (!points.empty()) points += ' ';
      points += num(x.map(s.x[i], x0, x1)) + "," + num(y.map(s.y[i], y0, y1));
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(k);
    out += "<line x1=\"" + num(x1 + 12) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(x1 + 32) +
           "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(x1 + 38) + "\" y=\"" + num(ly + 4) + "\">" + escape(s.name) +
           "</text>\n";
  }
  return out + "</svg>\n";
}

std::string bar_chart(const std::vector<std::string>& categories, const std::vector<double>& values,
                      const ChartLabels& labels) {
  if (categories.size() != values.size()) throw Error("bar labels and values differ in length");
  const Axis y = fit(values, labels.log_y, true);
  std::string out = frame(labels, Axis{}, y, false);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  const double slot = (x1 - x0) / static_cast<double>(std::max<std::size_t>(1, values.size()));
  const double base = y.log ? y0 : y.map(0.0, y0, y1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double cx = x0 + slot * (static_cast<double>(i) + 0.5);
    if (y.usable(values[i])) {
      const double top = y.map(values[i], y0, y1);
      out += "<rect x=\"" + num(cx - slot * 0.35) + "\" y=\"" + num(std::min(top, base)) +
             "\" width=\"" + num(slot * 0.7) + "\" height=\"" + num(std::abs(base - top)) +
             "\" fill=\"" + kPalette[i % std::size(kPalette)] + "\"/>\n";
    }
    out += "<text x=\"" + num(cx) + "\" y=\"" + num(y0 + 18) + "\" text-anchor=\"middle\">" +
           escape(categories[i]) + "</text>\n";
  }
  return out + "</svg>\n";
}

}  // namespace otblab::harness
