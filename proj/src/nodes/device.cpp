#include "rpm/nodes/device.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "rpm/domain/segment.hpp"

namespace rpm::nodes {

void DeviceConfig::validate() const {
  if (!patient.valid()) throw ConfigError("device patient id must be nonzero");
  if (period_ms < 0) throw ConfigError("period_ms must be nonnegative");
  if (chunk_size < 1 || chunk_size > kMaxPayload) throw ConfigError("chunk_size must be in [1, 65536]");
  if (connect_attempts < 1) throw ConfigError("connect_attempts must be at least 1");
  if (link.delay_ms < 0 || link.rate_bytes_per_s < 0) throw ConfigError("link delay and rate must be nonnegative");
  if (heartbeat_period_ms <= 0) throw ConfigError("heartbeat_period_ms must be positive");
}

DeviceNode::DeviceNode(DeviceConfig config) : config_(std::move(config)), rng_(config_.seed) { config_.validate(); }

DeviceNode::~DeviceNode() {
  try {
    stop(std::chrono::milliseconds(200));
  } catch (const Error&) {
  }
}

void DeviceNode::open_session() {
  double backoff = config_.retry_backoff_ms;
  for (int attempt = 1;; ++attempt) {
    try {
      session_ = std::make_unique<ClientSession>(config_.upstream, NodeRole::Device, config_.patient, config_.link,
                                                 metrics_);
      return;
    } catch (const TopologyError&) {
      throw;
    } catch (const NetError& e) {
      if (attempt >= config_.connect_attempts) {
        throw NetError(fmt::format("device {}: giving up after {} attempts: {}", config_.patient.value, attempt,
                                   e.what()));
      }
    }
    sleep_ms(backoff);
    backoff *= 2;
  }
}

void DeviceNode::connect() {
  std::lock_guard lock(session_mu_);
  if (!session_) open_session();
}

void DeviceNode::transmit(const Frame& frame) {
  std::unique_lock lock(session_mu_);
  if (!session_) throw NetError("device is not connected");
  if (config_.max_in_flight > 0) {
    while (!session_->wait_outstanding_below(config_.max_in_flight, std::chrono::milliseconds(100))) {
      if (!session_->alive()) break;
    }
  }
  try {
    session_->send(frame);
  } catch (const NetError&) {
    // Mid-stream disconnect: one reconnect, then give up.
    if (reconnected_) throw;
    reconnected_ = true;
    ++metrics_.reconnects;
    rejected_before_ += session_->rejected_acks();
    session_.reset();
    open_session();
    session_->send(frame);
  }
}

VitalSample DeviceNode::send_vital() {
  VitalSample v;
  {
    std::lock_guard lock(state_mu_);
    v.patient = config_.patient;
    const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
    last_timestamp_ms_ = std::max(last_timestamp_ms_, static_cast<std::uint64_t>(wall));
    v.timestamp_ms = last_timestamp_ms_;
    switch (vital_counter_++ % 3) {
      case 0:
        v.kind = VitalKind::HeartRate;
        v.value = std::uniform_real_distribution<double>(60.0, 100.0)(rng_);
        break;
      case 1:
        v.kind = VitalKind::SpO2;
        v.value = std::uniform_real_distribution<double>(94.0, 100.0)(rng_);
        break;
      default:
        v.kind = VitalKind::Temperature;
        v.value = std::uniform_real_distribution<double>(36.0, 37.5)(rng_);
        break;
    }
  }
  Frame f;
  f.category = DataCategory::Vitals;
  f.patient = config_.patient;
  f.payload = encode_vital(v);
  transmit(f);
  return v;
}

void DeviceNode::send_frame(Frame frame) {
  frame.patient = config_.patient;
  transmit(frame);
}

void DeviceNode::send_audio(const AudioClip& clip) {
  if (camera_state() == CameraState::Sleep) throw StateError("audio is not recorded in sleep mode");
  const auto pcm = encode_pcm(clip.samples);
  for (const Frame& f : segment_payload(config_.patient, DataCategory::AudioClip, pcm, config_.chunk_size)) {
    transmit(f);
  }
}

void DeviceNode::send_identity(const IdentityRecord& record) {
  if (camera_state() == CameraState::Sleep) throw StateError("identity is not sent in sleep mode");
  Frame f;
  f.category = DataCategory::Identity;
  f.patient = config_.patient;
  f.payload = encode_identity(record);
  transmit(f);
}

CameraState DeviceNode::camera_command(CameraCommand cmd) {
  CameraState next;
  {
    std::lock_guard lock(state_mu_);
    camera_ = handle_camera_command(camera_, cmd);
    next = camera_;
  }
  ControlMessage m;
  m.op = ControlOp::CameraCommand;
  m.command = cmd;
  transmit(make_control_frame(config_.patient, m));
  run_cv_.notify_all();
  return next;
}

void DeviceNode::request_policy(const filter::FilterPolicy& policy) {
  ControlMessage m;
  m.op = ControlOp::PolicyUpdate;
  m.policy_text = filter::policy_to_text(policy);
  transmit(make_control_frame(config_.patient, m));
}

void DeviceNode::send_heartbeat() {
  ControlMessage m;
  m.op = ControlOp::StreamHeartbeat;
  m.resolution = kDefaultStreamResolution;
  transmit(make_control_frame(config_.patient, m));
}

CameraState DeviceNode::camera_state() const {
  std::lock_guard lock(state_mu_);
  return camera_;
}

void DeviceNode::start() {
  connect();
  std::lock_guard lock(run_mu_);
  if (running_) return;
  running_ = true;
  periodic_ = std::thread([this] { run_periodic(); });
}

void DeviceNode::run_periodic() {
  using namespace std::chrono;
  const auto to_duration = [](double ms) { return duration_cast<Clock::duration>(duration<double, std::milli>(ms)); };
  const auto start = Clock::now();
  std::uint64_t vitals = 0;
  auto next_heartbeat = start + to_duration(config_.heartbeat_period_ms);
  std::unique_lock lock(run_mu_);
  while (running_) {
    // Absolute schedule so the period does not drift with send time.
    const auto next_vital = config_.period_ms > 0 ? start + to_duration(config_.period_ms * static_cast<double>(vitals))
                                                  : Clock::time_point::max();
    const auto wake = std::min({next_vital, next_heartbeat, Clock::now() + milliseconds(50)});
    run_cv_.wait_until(lock, wake, [&] { return !running_; });
    if (!running_) break;
    const auto now = Clock::now();
    lock.unlock();
    try {
      if (now >= next_vital) {
        send_vital();
        ++vitals;
      }
      if (camera_state() != CameraState::Streaming) {
        next_heartbeat = now + to_duration(config_.heartbeat_period_ms);
      } else if (now >= next_heartbeat) {
        send_heartbeat();
        next_heartbeat += to_duration(config_.heartbeat_period_ms);
      }
    } catch (const NetError&) {
      lost_ = true;
      lock.lock();
      running_ = false;
      break;
    }
    lock.lock();
  }
}

bool DeviceNode::wait_for_acks(Clock::duration timeout) {
  std::lock_guard lock(session_mu_);
  if (!session_) return true;
  return session_->wait_outstanding_below(1, timeout);
}

std::uint64_t DeviceNode::rejected_acks() const {
  std::lock_guard lock(session_mu_);
  return rejected_before_ + (session_ ? session_->rejected_acks() : 0);
}

void DeviceNode::stop(Clock::duration drain) {
  {
    std::lock_guard lock(run_mu_);
    running_ = false;
  }
  run_cv_.notify_all();
  if (periodic_.joinable()) periodic_.join();
  std::lock_guard lock(session_mu_);
  if (!session_) return;
  session_->wait_outstanding_below(1, drain);
  session_->close();
  rejected_before_ += session_->rejected_acks();
  session_.reset();
}

}  // namespace rpm::nodes
