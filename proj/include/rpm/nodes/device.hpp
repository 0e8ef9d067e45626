#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <random>
#include <thread>

#include "rpm/filter/policy.hpp"
#include "rpm/nodes/camera.hpp"
#include "rpm/nodes/session.hpp"

namespace rpm::nodes {

/// Operation not permitted in the current camera state.
class StateError : public Error {
 public:
  using Error::Error;
};

struct DeviceConfig {
  PatientId patient{1};
  Endpoint upstream;
  double period_ms = 100.0;  // vitals period once started; 0 = no periodic vitals
  std::size_t chunk_size = 8192;
  LinkProfile link;
  std::size_t max_in_flight = 0;  // 0 = no limit on unacknowledged frames
  int connect_attempts = 3;
  double retry_backoff_ms = 100.0;  // doubles after every failed attempt
  double heartbeat_period_ms = 1000.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Patient-side node. Periodic vitals run on a background thread after
/// start(); the other send calls may be used from any thread.
///
/// In Sleep state only vitals and control frames are transmitted; audio and
/// identity require a checkup. While Streaming, a 720p heartbeat goes out
/// every heartbeat period.
class DeviceNode {
 public:
  explicit DeviceNode(DeviceConfig config);
  ~DeviceNode();
  DeviceNode(const DeviceNode&) = delete;
  DeviceNode& operator=(const DeviceNode&) = delete;

  /// Up to connect_attempts tries with backoff; throws NetError after the last.
  void connect();

  void start();

  /// False once the periodic thread has stopped on a lost connection.
  bool healthy() const { return !lost_.load(); }

  /// Stops the periodic thread, waits up to `drain` for outstanding acks and
  /// closes the connection cleanly.
  void stop(Clock::duration drain = std::chrono::seconds(2));

  VitalSample send_vital();
  void send_frame(Frame frame);

  /// Segments per chunk_size. Throws StateError in Sleep.
  void send_audio(const AudioClip& clip);
  void send_identity(const IdentityRecord& record);

  /// Applies the command locally and reports it upstream.
  CameraState camera_command(CameraCommand cmd);
  void request_policy(const filter::FilterPolicy& policy);

  /// Waits until every sent frame is acknowledged.
  bool wait_for_acks(Clock::duration timeout);

  CameraState camera_state() const;
  const NodeMetrics& metrics() const { return metrics_; }
  NodeMetrics& metrics() { return metrics_; }
  const DeviceConfig& config() const { return config_; }
  std::uint64_t rejected_acks() const;

 private:
  void transmit(const Frame& frame);
  void open_session();
  void run_periodic();
  void send_heartbeat();

  DeviceConfig config_;
  NodeMetrics metrics_;

  mutable std::mutex session_mu_;
  std::unique_ptr<ClientSession> session_;
  bool reconnected_ = false;
  std::uint64_t rejected_before_ = 0;

  mutable std::mutex state_mu_;
  CameraState camera_ = CameraState::Sleep;
  std::mt19937_64 rng_;
  std::uint64_t last_timestamp_ms_ = 0;
  std::uint32_t vital_counter_ = 0;

  std::mutex run_mu_;
  std::condition_variable run_cv_;
  bool running_ = false;
  std::atomic<bool> lost_{false};
  std::thread periodic_;
};

}  // namespace rpm::nodes
