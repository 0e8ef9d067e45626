#include "rpm/bench/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

namespace rpm::bench {

namespace {

constexpr std::string_view kLatencyHeader = "experiment,topology,rooms,iteration,rtt_ms";
constexpr std::string_view kThroughputHeader = "experiment,topology,packet_size_bytes,trial,packets";

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ReportError(fmt::format("line {}: bad number '{}'", line_no, field));
  }
  return value;
}

TopologyMode parse_topology(std::string_view field, std::size_t line_no) {
  try {
    return topology_from_string(field);
  } catch (const ConfigError&) {
    throw ReportError(fmt::format("line {}: unknown topology '{}'", line_no, field));
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ReportError(fmt::format("cannot open '{}' for writing", path));
  out << text;
  out.flush();
  if (!out) throw ReportError(fmt::format("write to '{}' failed", path));
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReportError(fmt::format("cannot open '{}'", path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Rows of one CSV after the header check, each already split into 5 fields.
std::vector<std::pair<std::size_t, std::vector<std::string_view>>> body_of(const std::vector<std::string>& lines,
                                                                            std::string_view header,
                                                                            std::string_view experiment) {
  if (lines.empty() || lines.front() != header) {
    throw ReportError(fmt::format("expected header '{}'", header));
  }
  std::vector<std::pair<std::size_t, std::vector<std::string_view>>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto fields = split(lines[i]);
    if (fields.size() != 5) throw ReportError(fmt::format("line {}: expected 5 fields", i + 1));
    if (fields[0] != experiment) throw ReportError(fmt::format("line {}: experiment is not '{}'", i + 1, experiment));
    out.emplace_back(i + 1, std::move(fields));
  }
  return out;
}

struct Stats {
  std::size_t count = 0;
  double mean = 0, median = 0, stddev = 0;
};

Stats stats_of(const std::vector<double>& v) {
  Stats s;
  s.count = v.size();
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.median = median_of(v);
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

template <typename Row, typename Key, typename Value>
std::vector<CellSummary> summarize_rows(const std::vector<Row>& rows, Key key, Value value) {
  std::map<std::pair<TopologyMode, std::uint32_t>, std::vector<double>> cells;
  for (const Row& r : rows) {
    if (const auto v = value(r)) cells[{r.topology, key(r)}].push_back(*v);
  }
  std::vector<CellSummary> out;
  for (const auto& [k, values] : cells) {
    const Stats s = stats_of(values);
    out.push_back({k.first, k.second, s.count, s.mean, s.median, s.stddev});
  }
  return out;
}

template <typename Row, typename Key, typename Value>
Comparison compare_rows(std::span<const Row> fog, std::span<const Row> cloud, Key key, Value value,
                        bool lower_is_better) {
  const auto cells_of = [&](std::span<const Row> rows) {
    std::map<std::uint32_t, std::vector<double>> cells;
    for (const Row& r : rows) {
      if (const auto v = value(r)) cells[key(r)].push_back(*v);
    }
    return cells;
  };
  const auto f = cells_of(fog);
  const auto c = cells_of(cloud);
  std::vector<std::uint32_t> fk, ck;
  for (const auto& [k, _] : f) fk.push_back(k);
  for (const auto& [k, _] : c) ck.push_back(k);
  if (fk != ck || fk.empty()) throw ComparisonError("fog and cloud rows cover different cells");

  Comparison out;
  out.fog_better_everywhere = true;
  for (std::uint32_t k : fk) {
    const Stats fs = stats_of(f.at(k));
    const Stats cs = stats_of(c.at(k));
    CellVerdict v;
    v.x = k;
    v.mean_difference = fs.mean - cs.mean;
    v.median_difference = fs.median - cs.median;
    v.fog_better = lower_is_better ? (fs.mean < cs.mean && fs.median < cs.median)
                                   : (fs.mean > cs.mean && fs.median > cs.median);
    out.fog_better_everywhere = out.fog_better_everywhere && v.fog_better;
    out.cells.push_back(v);
  }
  return out;
}

auto rooms_key = [](const LatencyRow& r) { return r.rooms; };
auto rtt_value = [](const LatencyRow& r) { return r.rtt_ms; };
auto size_key = [](const ThroughputRow& r) { return r.packet_size_bytes; };
auto packets_value = [](const ThroughputRow& r) -> std::optional<double> {
  if (!r.packets) return std::nullopt;
  return static_cast<double>(*r.packets);
};

}  // namespace

double median_of(std::vector<double> values) {
  if (values.empty()) throw ReportError("median of no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double quantize_rtt(double ms) {
  const std::string text = fmt::format("{:.3f}", ms);
  return parse_number<double>(text, 0);
}

std::vector<CellSummary> summarize(const LatencyReport& report) {
  return summarize_rows(report.rows, rooms_key, rtt_value);
}

std::vector<CellSummary> summarize(const ThroughputReport& report) {
  return summarize_rows(report.rows, size_key, packets_value);
}

std::string to_csv(const LatencyReport& report) {
  std::string out(kLatencyHeader);
  out += '\n';
  for (const auto& r : report.rows) {
    out += fmt::format("latency,{},{},{},{}\n", to_string(r.topology), r.rooms, r.iteration,
                       r.rtt_ms ? fmt::format("{:.3f}", *r.rtt_ms) : "");
  }
  return out;
}

std::string to_csv(const ThroughputReport& report) {
  std::string out(kThroughputHeader);
  out += '\n';
  for (const auto& r : report.rows) {
    out += fmt::format("throughput,{},{},{},{}\n", to_string(r.topology), r.packet_size_bytes, r.trial,
                       r.packets ? fmt::format("{}", *r.packets) : "");
  }
  return out;
}

void write_csv(const LatencyReport& report, const std::string& path) { write_text(path, to_csv(report)); }
void write_csv(const ThroughputReport& report, const std::string& path) { write_text(path, to_csv(report)); }

LatencyReport read_latency_csv(const std::string& path) {
  LatencyReport report;
  const auto lines = read_lines(path);
  for (const auto& [no, f] : body_of(lines, kLatencyHeader, "latency")) {
    LatencyRow r;
    r.topology = parse_topology(f[1], no);
    r.rooms = parse_number<std::uint32_t>(f[2], no);
    r.iteration = parse_number<std::uint32_t>(f[3], no);
    if (!f[4].empty()) r.rtt_ms = parse_number<double>(f[4], no);
    report.rows.push_back(r);
  }
  return report;
}

ThroughputReport read_throughput_csv(const std::string& path) {
  ThroughputReport report;
  const auto lines = read_lines(path);
  for (const auto& [no, f] : body_of(lines, kThroughputHeader, "throughput")) {
    ThroughputRow r;
    r.topology = parse_topology(f[1], no);
    r.packet_size_bytes = parse_number<std::uint32_t>(f[2], no);
    r.trial = parse_number<std::uint32_t>(f[3], no);
    if (!f[4].empty()) r.packets = parse_number<std::uint64_t>(f[4], no);
    report.rows.push_back(r);
  }
  return report;
}

ReportKind detect_report_kind(const std::string& path) {
  const auto lines = read_lines(path);
  if (!lines.empty() && lines.front() == kLatencyHeader) return ReportKind::Latency;
  if (!lines.empty() && lines.front() == kThroughputHeader) return ReportKind::Throughput;
  throw ReportError(fmt::format("'{}' is not a latency or throughput CSV", path));
}

Comparison compare_reports(std::span<const LatencyRow> fog_rows, std::span<const LatencyRow> cloud_rows) {
  return compare_rows(fog_rows, cloud_rows, rooms_key, rtt_value, true);
}

Comparison compare_reports(std::span<const ThroughputRow> fog_rows, std::span<const ThroughputRow> cloud_rows) {
  return compare_rows(fog_rows, cloud_rows, size_key, packets_value, false);
}

std::vector<LatencyRow> rows_for(const LatencyReport& report, TopologyMode mode) {
  std::vector<LatencyRow> out;
  std::copy_if(report.rows.begin(), report.rows.end(), std::back_inserter(out),
               [&](const LatencyRow& r) { return r.topology == mode; });
  return out;
}

std::vector<ThroughputRow> rows_for(const ThroughputReport& report, TopologyMode mode) {
  std::vector<ThroughputRow> out;
  std::copy_if(report.rows.begin(), report.rows.end(), std::back_inserter(out),
               [&](const ThroughputRow& r) { return r.topology == mode; });
  return out;
}

bool nondecreasing_within(std::span<const double> values, double slack) {
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < (1.0 - slack) * values[i - 1]) return false;
  }
  return true;
}

bool nonincreasing_within(std::span<const double> values, double slack) {
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > (1.0 + slack) * values[i - 1]) return false;
  }
  return true;
}

}  // namespace rpm::bench
