#include "rpm/nodes/metrics.hpp"

#include <numeric>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "rpm/domain/codec.hpp"

namespace rpm::nodes {

void NodeMetrics::absorb(const ReaderStats& before, const ReaderStats& after) {
  crc_failures += after.crc_failures - before.crc_failures;
  protocol_errors += after.protocol_errors - before.protocol_errors;
  truncated_frames += after.truncated_frames - before.truncated_frames;
}

void NodeMetrics::count_sent(const Frame& frame) {
  const auto n = encoded_size(frame);
  ++frames_sent;
  bytes_sent += n;
  bytes_sent_by_category[index_of(frame.category)] += n;
}

void NodeMetrics::count_received(const Frame& frame) {
  const auto n = encoded_size(frame);
  ++frames_received;
  bytes_received += n;
  bytes_received_by_category[index_of(frame.category)] += n;
}

void NodeMetrics::record_rtt(double ms) {
  std::lock_guard lock(rtt_mu_);
  rtts_.push_back(ms);
}

std::vector<double> NodeMetrics::rtts() const {
  std::lock_guard lock(rtt_mu_);
  return rtts_;
}

double NodeMetrics::mean_rtt_ms() const {
  std::lock_guard lock(rtt_mu_);
  if (rtts_.empty()) return 0.0;
  return std::accumulate(rtts_.begin(), rtts_.end(), 0.0) / static_cast<double>(rtts_.size());
}

void dump_metrics(std::ostream& out, const NodeMetrics& m, const std::array<std::uint64_t, kCategoryCount>& drops) {
  std::string by_cat;
  for (DataCategory c : kAllCategories) {
    if (!by_cat.empty()) by_cat += ',';
    by_cat += fmt::format("{}:{}", to_string(c), drops[index_of(c)]);
  }
  fmt::print(out, "frames_sent={}\n", m.frames_sent.load());
  fmt::print(out, "frames_received={}\n", m.frames_received.load());
  fmt::print(out, "crc_failures={}\n", m.crc_failures.load());
  fmt::print(out, "protocol_errors={}\n", m.protocol_errors.load());
  fmt::print(out, "truncated_frames={}\n", m.truncated_frames.load());
  fmt::print(out, "topology_rejections={}\n", m.topology_rejections.load());
  fmt::print(out, "upstream_dropped={}\n", m.upstream_dropped.load());
  fmt::print(out, "drops_by_category={}\n", by_cat);
  fmt::print(out, "mean_rtt_ms={:.3f}\n", m.mean_rtt_ms());
}

}  // namespace rpm::nodes
