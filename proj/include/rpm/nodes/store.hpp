#pragma once

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <vector>

#include "rpm/domain/payloads.hpp"
#include "rpm/nodes/net.hpp"

namespace rpm::nodes {

struct StoredFrame {
  Clock::time_point received;
  NodeRole source = NodeRole::Device;
  DataCategory category = DataCategory::Vitals;
  PatientId patient;
  std::uint32_t seq = 0;
  std::uint32_t total = 1;
  std::size_t payload_size = 0;
  std::optional<std::vector<std::uint8_t>> payload;  // kept only when retention is on
};

/// Append-only log of accepted frames with per-category counters.
class CloudStore {
 public:
  explicit CloudStore(bool retain_payloads = true) : retain_(retain_payloads) {}

  void append(const Frame& frame, NodeRole source, Clock::time_point received = Clock::now());

  std::size_t size() const;
  std::array<std::uint64_t, kCategoryCount> counters() const;
  std::uint64_t count(DataCategory c) const { return counters()[index_of(c)]; }

  /// Frames of the category received in [from, to).
  std::uint64_t count_between(DataCategory c, Clock::time_point from, Clock::time_point to) const;

  std::vector<StoredFrame> snapshot() const;

 private:
  bool retain_;
  mutable std::mutex mu_;
  std::vector<StoredFrame> log_;
  std::array<std::uint64_t, kCategoryCount> counters_{};
};

}  // namespace rpm::nodes
