#pragma once

#include <string>
#include <vector>

#include "rpm/bench/report.hpp"

namespace rpm::bench {

class PlotError : public Error {
 public:
  using Error::Error;
};

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y), x ascending
};

/// Line chart with one polyline per series. x values are placed at evenly
/// spaced categorical positions, labelled with x_labels.
struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x_values;
  std::vector<std::string> x_labels;
  std::vector<Series> series;
};

/// Standalone SVG 1.1 document. Throws PlotError when there is nothing to plot.
std::string render_svg(const LineChart& chart);

/// Mean RTT per rooms, one series per topology.
LineChart latency_chart(const LatencyReport& report);
/// Mean packets per window per packet size, one series per topology.
LineChart throughput_chart(const ThroughputReport& report);

void emit_plot_svg(const LatencyReport& report, const std::string& path);
void emit_plot_svg(const ThroughputReport& report, const std::string& path);

}  // namespace rpm::bench
