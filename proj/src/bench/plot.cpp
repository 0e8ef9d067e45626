#include "rpm/bench/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

namespace rpm::bench {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

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

// Tick step of 1, 2 or 5 times a power of ten giving about five ticks.
double nice_step(double max) {
  const double raw = max / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

LineChart chart_from(const std::vector<CellSummary>& cells, std::string title, std::string x_label,
                     std::string y_label, bool kilobytes) {
  LineChart chart{std::move(title), std::move(x_label), std::move(y_label), {}, {}, {}};
  std::set<std::uint32_t> xs;
  for (const auto& c : cells) xs.insert(c.x);
  for (std::uint32_t x : xs) {
    chart.x_values.push_back(x);
    chart.x_labels.push_back(kilobytes ? fmt::format("{:g}", x / 1024.0) : fmt::format("{}", x));
  }
  for (TopologyMode mode : {TopologyMode::Fog, TopologyMode::Cloud}) {
    Series s{std::string(to_string(mode)), {}};
    for (const auto& c : cells) {
      if (c.topology == mode) s.points.emplace_back(c.x, c.mean);
    }
    if (!s.points.empty()) chart.series.push_back(std::move(s));
  }
  return chart;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PlotError(fmt::format("cannot open '{}' for writing", path));
  out << text;
  if (!out) throw PlotError(fmt::format("write to '{}' failed", path));
}

}  // namespace

std::string render_svg(const LineChart& chart) {
  if (chart.x_values.empty() || chart.series.empty()) throw PlotError("nothing to plot");
  double y_max = 0;
  for (const auto& s : chart.series) {
    for (const auto& [x, y] : s.points) y_max = std::max(y_max, y);
  }
  if (!(y_max > 0)) y_max = 1;
  const double step = nice_step(y_max * 1.1);
  const double y_top = step * std::ceil(y_max * 1.1 / step);

  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  const std::size_t nx = chart.x_values.size();
  const auto px = [&](double x) {
    const auto it = std::lower_bound(chart.x_values.begin(), chart.x_values.end(), x);
    const double i = static_cast<double>(it - chart.x_values.begin());
    return nx == 1 ? kLeft + plot_w / 2 : kLeft + plot_w * (0.05 + 0.9 * i / static_cast<double>(nx - 1));
  };
  const auto py = [&](double y) { return kTop + plot_h * (1.0 - y / y_top); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, kHeight);
  svg += fmt::format("<title>{}</title>\n", escape(chart.title));
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kWidth, kHeight);
  svg += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", kWidth / 2,
                     escape(chart.title));

  svg += "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\"/>\n", kLeft, kTop + plot_h, kLeft + plot_w);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\"/>\n", kLeft, kTop, kTop + plot_h);
  svg += "</g>\n<g class=\"ticks\">\n";
  for (double y = 0; y <= y_top + step / 2; y += step) {
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"#ddd\"/>\n", kLeft,
                       py(y), kLeft + plot_w);
    svg += fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\">{:g}</text>\n", kLeft - 6, py(y) + 4, y);
  }
  for (std::size_t i = 0; i < nx; ++i) {
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", px(chart.x_values[i]),
                       kTop + plot_h + 18, escape(chart.x_labels[i]));
  }
  svg += "</g>\n";
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", kLeft + plot_w / 2, kHeight - 14,
                     escape(chart.x_label));
  svg += fmt::format("<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
                     kTop + plot_h / 2, escape(chart.y_label));

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* color = kColors[k % std::size(kColors)];
    std::string pts;
    for (const auto& [x, y] : s.points) pts += fmt::format("{}{:.2f},{:.2f}", pts.empty() ? "" : " ", px(x), py(y));
    svg += fmt::format("<polyline class=\"series\" data-series=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\" "
                       "points=\"{}\"/>\n",
                       escape(s.name), color, pts);
    for (const auto& [x, y] : s.points) {
      svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", px(x), py(y), color);
    }
    const double ly = kTop + 14 + 16 * static_cast<double>(k);
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                       kLeft + plot_w - 90, ly, kLeft + plot_w - 70, color);
    svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", kLeft + plot_w - 64, ly + 4, escape(s.name));
  }
  svg += "</svg>\n";
  return svg;
}

LineChart latency_chart(const LatencyReport& report) {
  return chart_from(summarize(report), "Average latency", "rooms (2 devices each)", "mean round-trip time (ms)",
                    false);
}

LineChart throughput_chart(const ThroughputReport& report) {
  return chart_from(summarize(report), "Average packet count", "packet size (KB)", "packets accepted per window",
                    true);
}

void emit_plot_svg(const LatencyReport& report, const std::string& path) {
  if (report.rows.empty()) throw PlotError("empty latency report");
  write_file(path, render_svg(latency_chart(report)));
}

void emit_plot_svg(const ThroughputReport& report, const std::string& path) {
  if (report.rows.empty()) throw PlotError("empty throughput report");
  write_file(path, render_svg(throughput_chart(report)));
}

}  // namespace rpm::bench
