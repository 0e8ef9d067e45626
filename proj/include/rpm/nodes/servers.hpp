#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>

#include "rpm/nodes/processor.hpp"
#include "rpm/nodes/session.hpp"
#include "rpm/nodes/store.hpp"

namespace rpm::nodes {

/// Deployment policy used when a node is given no policy file: every patient
/// may send vitals, keyword events and camera control; raw audio and identity
/// stay local.
filter::PolicyFile default_policy_file();

struct FogConfig {
  Endpoint listen{"127.0.0.1", 0};
  Endpoint upstream;
  double service_time_ms = 5.0;
  double processing_bytes_per_s = 0.0;
  LinkProfile link;  // both directions: acks to devices and frames to the cloud
  std::size_t upstream_buffer = 1024;
  double reconnect_interval_ms = 200.0;

  void validate() const;
};

/// Local server between devices and the cloud. Each device frame is serviced
/// under the fog's own service lock, acknowledged as soon as it is processed,
/// and whatever the filter clears is queued for the cloud. The queue holds at
/// most upstream_buffer frames; beyond that the oldest frame is dropped.
class FogNode {
 public:
  /// Throws ConfigError when the classifier is missing.
  FogNode(FogConfig config, std::shared_ptr<const kws::KeywordClassifier> classifier,
          const filter::PolicyFile& policies = default_policy_file());
  ~FogNode();
  FogNode(const FogNode&) = delete;
  FogNode& operator=(const FogNode&) = delete;

  void start();
  /// Tries for up to `drain` to hand queued frames to the cloud, then closes.
  void stop(Clock::duration drain = std::chrono::seconds(2));

  Endpoint endpoint() const { return server_.endpoint(); }
  bool upstream_connected() const;
  std::size_t upstream_queue_size() const;

  NodeMetrics& metrics() { return metrics_; }
  const NodeMetrics& metrics() const { return metrics_; }
  filter::PolicyEngine& engine() { return engine_; }
  const Processor& processor() const { return processor_; }

 private:
  void handle(Connection& conn, const Frame& frame);
  void enqueue_upstream(Frame frame);
  void run_upstream();

  FogConfig config_;
  NodeMetrics metrics_;
  filter::PolicyEngine engine_;
  Processor processor_;
  std::mutex service_mu_;
  FrameServer server_;

  mutable std::mutex up_mu_;
  std::condition_variable up_cv_;
  std::deque<Frame> up_queue_;
  std::unique_ptr<ClientSession> upstream_;
  bool up_running_ = false;
  bool draining_ = false;
  std::size_t up_sending_ = 0;
  std::thread up_thread_;
};

struct CloudConfig {
  Endpoint listen{"127.0.0.1", 0};
  TopologyMode mode = TopologyMode::Fog;
  double service_time_ms = 5.0;
  double processing_bytes_per_s = 0.0;
  double store_time_ms = 0.0;  // per frame already processed by a fog
  LinkProfile link;            // return path to each client
  bool retain_payloads = true;

  void validate() const;
};

/// Central server. Accepts fogs in Fog mode and devices in Cloud mode; any
/// other role is refused. All connections share one service lock, so message
/// servicing is serialized across the whole node. In Cloud mode the cloud runs
/// the processor itself and stores what the filter clears; in Fog mode it
/// stores every frame it receives.
class CloudNode {
 public:
  /// Throws ConfigError in Cloud mode when the classifier is missing.
  explicit CloudNode(CloudConfig config, std::shared_ptr<const kws::KeywordClassifier> classifier = nullptr,
                     const filter::PolicyFile& policies = default_policy_file());
  ~CloudNode();
  CloudNode(const CloudNode&) = delete;
  CloudNode& operator=(const CloudNode&) = delete;

  void start();
  void stop();

  Endpoint endpoint() const { return server_.endpoint(); }
  const CloudConfig& config() const { return config_; }

  NodeMetrics& metrics() { return metrics_; }
  const NodeMetrics& metrics() const { return metrics_; }
  const CloudStore& store() const { return store_; }
  filter::PolicyEngine& engine() { return engine_; }
  const Processor& processor() const { return processor_; }

 private:
  void handle(Connection& conn, const Frame& frame);

  CloudConfig config_;
  NodeMetrics metrics_;
  filter::PolicyEngine engine_;
  Processor processor_;
  CloudStore store_;
  std::mutex service_mu_;
  FrameServer server_;
};

}  // namespace rpm::nodes
