#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rpm/domain/topology.hpp"

namespace rpm::bench {

class ReportError : public Error {
 public:
  using Error::Error;
};

/// Fog and cloud rows do not describe the same cells.
class ComparisonError : public Error {
 public:
  using Error::Error;
};

/// One device-side round trip, averaged over every device of the cell for that
/// iteration. An empty rtt marks a cell that failed to run.
struct LatencyRow {
  TopologyMode topology = TopologyMode::Fog;
  std::uint32_t rooms = 1;
  std::uint32_t iteration = 0;
  std::optional<double> rtt_ms;

  bool operator==(const LatencyRow&) const = default;
};

struct CellFailure {
  TopologyMode topology = TopologyMode::Fog;
  std::uint32_t x = 0;  // rooms or packet size
  std::string message;

  bool operator==(const CellFailure&) const = default;
};

struct LatencyReport {
  std::vector<LatencyRow> rows;
  std::vector<CellFailure> failures;

  bool operator==(const LatencyReport& o) const { return rows == o.rows; }
};

/// Frames from senders of one size accepted at the cloud in one window.
struct ThroughputRow {
  TopologyMode topology = TopologyMode::Fog;
  std::uint32_t packet_size_bytes = 0;
  std::uint32_t trial = 0;
  std::optional<std::uint64_t> packets;

  bool operator==(const ThroughputRow&) const = default;
};

struct ThroughputReport {
  std::vector<ThroughputRow> rows;
  std::vector<CellFailure> failures;

  bool operator==(const ThroughputReport& o) const { return rows == o.rows; }
};

struct CellSummary {
  TopologyMode topology = TopologyMode::Fog;
  std::uint32_t x = 0;
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single value
};

/// Per (topology, x) statistics over measured rows, ordered by topology then x.
std::vector<CellSummary> summarize(const LatencyReport& report);
std::vector<CellSummary> summarize(const ThroughputReport& report);

double median_of(std::vector<double> values);

/// The value the CSV will hold for rtt_ms (three decimals), so a report
/// survives a write/read round trip unchanged.
double quantize_rtt(double ms);

// CSV: latency `experiment,topology,rooms,iteration,rtt_ms`, throughput
// `experiment,topology,packet_size_bytes,trial,packets`. A failed cell has an
// empty measurement field.
void write_csv(const LatencyReport& report, const std::string& path);
void write_csv(const ThroughputReport& report, const std::string& path);
std::string to_csv(const LatencyReport& report);
std::string to_csv(const ThroughputReport& report);
LatencyReport read_latency_csv(const std::string& path);
ThroughputReport read_throughput_csv(const std::string& path);

enum class ReportKind { Latency, Throughput };

/// Kind of a CSV file from its header. Throws ReportError.
ReportKind detect_report_kind(const std::string& path);

struct CellVerdict {
  std::uint32_t x = 0;
  double mean_difference = 0.0;    // fog - cloud
  double median_difference = 0.0;  // fog - cloud
  bool fog_better = false;         // strictly better in both mean and median
};

struct Comparison {
  std::vector<CellVerdict> cells;
  bool fog_better_everywhere = false;
};

/// Latency: lower is better. Throws ComparisonError unless both sides cover
/// the same cells.
Comparison compare_reports(std::span<const LatencyRow> fog_rows, std::span<const LatencyRow> cloud_rows);
/// Throughput: higher is better.
Comparison compare_reports(std::span<const ThroughputRow> fog_rows, std::span<const ThroughputRow> cloud_rows);

std::vector<LatencyRow> rows_for(const LatencyReport& report, TopologyMode mode);
std::vector<ThroughputRow> rows_for(const ThroughputReport& report, TopologyMode mode);

/// Each value is at least (1 - slack) times its predecessor.
bool nondecreasing_within(std::span<const double> values, double slack);
/// Each value is at most (1 + slack) times its predecessor.
bool nonincreasing_within(std::span<const double> values, double slack);

}  // namespace rpm::bench
