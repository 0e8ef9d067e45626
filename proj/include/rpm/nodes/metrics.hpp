#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <mutex>
#include <ostream>
#include <vector>

#include "rpm/domain/types.hpp"
#include "rpm/nodes/net.hpp"

namespace rpm::nodes {

/// Counters shared by every connection of one node.
class NodeMetrics {
 public:
  std::atomic<std::uint64_t> frames_sent{0};
  std::atomic<std::uint64_t> frames_received{0};
  std::atomic<std::uint64_t> bytes_sent{0};
  std::atomic<std::uint64_t> bytes_received{0};
  std::atomic<std::uint64_t> crc_failures{0};
  std::atomic<std::uint64_t> protocol_errors{0};
  std::atomic<std::uint64_t> truncated_frames{0};
  std::atomic<std::uint64_t> topology_rejections{0};
  std::atomic<std::uint64_t> upstream_dropped{0};
  std::atomic<std::uint64_t> ack_mismatches{0};
  std::atomic<std::uint64_t> reconnects{0};
  std::array<std::atomic<std::uint64_t>, kCategoryCount> bytes_received_by_category{};
  std::array<std::atomic<std::uint64_t>, kCategoryCount> bytes_sent_by_category{};

  /// Adds the growth of a reader's counters since `before`.
  void absorb(const ReaderStats& before, const ReaderStats& after);

  void count_sent(const Frame& frame);
  void count_received(const Frame& frame);

  void record_rtt(double ms);
  std::vector<double> rtts() const;
  double mean_rtt_ms() const;  // 0 when nothing was acknowledged

 private:
  mutable std::mutex rtt_mu_;
  std::vector<double> rtts_;
};

/// key=value lines: frames_sent, frames_received, crc_failures, protocol_errors,
/// truncated_frames, topology_rejections, upstream_dropped, drops_by_category,
/// mean_rtt_ms.
void dump_metrics(std::ostream& out, const NodeMetrics& m, const std::array<std::uint64_t, kCategoryCount>& drops);

}  // namespace rpm::nodes
