#pragma once

#include <string>
#include <vector>

namespace otblab::harness {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartLabels {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

/// Standalone SVG document; non-finite points (and nonpositive ones on a log
/// axis) are skipped. Output depends only on the inputs.
std::string line_chart(const std::vector<Series>& series, const ChartLabels& labels);

std::string bar_chart(const std::vector<std::string>& categories, const std::vector<double>& values,
                      const ChartLabels& labels);

}  // namespace otblab::harness
