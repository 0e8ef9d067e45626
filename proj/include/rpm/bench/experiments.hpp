#pragma once

#include <memory>
#include <vector>

#include "rpm/bench/report.hpp"
#include "rpm/nodes/device.hpp"
#include "rpm/nodes/servers.hpp"

namespace rpm::bench {

/// Untrained classifier for runs that never send audio. Fog nodes and a cloud
/// in Cloud mode refuse to start without one.
std::shared_ptr<const kws::KeywordClassifier> stand_in_classifier(std::uint64_t seed = 1);

/// One running topology on loopback ephemeral ports: a cloud, one fog per room
/// in Fog mode, and devices_per_room devices per room attached to their room's
/// fog (Fog mode) or straight to the cloud (Cloud mode). Every hop carries the
/// configured delay and rate in both directions.
class Deployment {
 public:
  Deployment(const TopologyConfig& topology, std::shared_ptr<const kws::KeywordClassifier> classifier,
             const nodes::DeviceConfig& device_template = {}, bool retain_payloads = false);
  ~Deployment();
  Deployment(const Deployment&) = delete;
  Deployment& operator=(const Deployment&) = delete;

  std::vector<std::unique_ptr<nodes::DeviceNode>>& devices() { return devices_; }
  nodes::CloudNode& cloud() { return *cloud_; }
  std::vector<std::unique_ptr<nodes::FogNode>>& fogs() { return fogs_; }

  void shutdown();

 private:
  std::unique_ptr<nodes::CloudNode> cloud_;
  std::vector<std::unique_ptr<nodes::FogNode>> fogs_;
  std::vector<std::unique_ptr<nodes::DeviceNode>> devices_;
};

struct LatencyConfig {
  std::uint32_t max_rooms = 3;
  std::uint32_t iterations = 30;
  std::uint32_t warmup_iterations = 1;
  double pause_ms = 5.0;  // gap between iterations
  std::vector<TopologyMode> topologies = {TopologyMode::Fog, TopologyMode::Cloud};
  TopologyConfig profile;  // delay and service profile; mode and rooms are set per cell
  std::uint64_t seed = 1;
  std::shared_ptr<const kws::KeywordClassifier> classifier;  // stand-in when null

  void validate() const;
};

/// For every topology and rooms = 1..max_rooms, every device sends one vitals
/// frame at the same instant per iteration and waits for its ack. A row holds
/// the mean device-side round trip of that iteration, measured from the send
/// call to the ack's arrival, so it includes processing at the acking node.
LatencyReport run_latency_experiment(const LatencyConfig& config);

struct ThroughputConfig {
  std::vector<std::uint32_t> packet_sizes = {1024, 2048, 4096, 8192, 16384, 32768};
  double duration_s = 10.0;
  std::uint32_t trials = 1;
  std::uint32_t rooms = 2;
  std::size_t max_in_flight = 8;  // per sender
  std::vector<TopologyMode> topologies = {TopologyMode::Fog, TopologyMode::Cloud};
  TopologyConfig profile = default_throughput_profile();
  std::uint64_t seed = 1;
  std::shared_ptr<const kws::KeywordClassifier> classifier;

  /// The latency profile plus a payload-dependent processing cost of 8 MB/s.
  static TopologyConfig default_throughput_profile();
  void validate() const;
};

/// Every device sends packet_size-byte vitals frames back to back (bounded by
/// max_in_flight unacknowledged frames) for the window; a row counts the
/// frames the cloud stored during the window.
ThroughputReport run_throughput_experiment(const ThroughputConfig& config);

}  // namespace rpm::bench
