#pragma once

#include <string>
#include <vector>

#include "maeguard/harness/stats.hpp"

namespace maeguard::harness {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct PlotLabels {
  std::string title;
  std::string x;
  std::string y;
};

// Standalone SVG documents.
std::string line_plot_svg(const std::vector<Series>& series, const PlotLabels& labels);
// Overlaid step histograms sharing one bin layout, normalized to densities.
std::string histogram_svg(const std::vector<std::pair<std::string, Histogram>>& hists,
                          const PlotLabels& labels);

}  // namespace maeguard::harness
