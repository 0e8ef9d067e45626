#include "rpm/nodes/servers.hpp"

#include "rpm/domain/topology.hpp"

namespace rpm::nodes {

filter::PolicyFile default_policy_file() {
  filter::PolicyFile file;
  file.default_policy = filter::policy_from_consent(
      PatientId{0}, {DataCategory::Vitals, DataCategory::KeywordEvent, DataCategory::CameraControl}, true);
  return file;
}

void FogConfig::validate() const {
  if (service_time_ms < 0 || processing_bytes_per_s < 0) throw ConfigError("fog service costs must be nonnegative");
  if (link.delay_ms < 0 || link.rate_bytes_per_s < 0) throw ConfigError("link delay and rate must be nonnegative");
  if (upstream_buffer < 1) throw ConfigError("upstream_buffer must be at least 1");
  if (upstream.port == 0) throw ConfigError("fog needs an upstream cloud endpoint");
}

FogNode::FogNode(FogConfig config, std::shared_ptr<const kws::KeywordClassifier> classifier,
                 const filter::PolicyFile& policies)
    : config_((config.validate(), std::move(config))),
      processor_(engine_, classifier ? std::move(classifier) : throw ConfigError("fog node requires a trained model")),
      server_(
          config_.listen, config_.link, metrics_, [](NodeRole role) { return role == NodeRole::Device; },
          [this](Connection& conn, const Frame& frame) { handle(conn, frame); }) {
  filter::install(engine_, policies);
}

FogNode::~FogNode() { stop(std::chrono::milliseconds(200)); }

void FogNode::start() {
  {
    std::lock_guard lock(up_mu_);
    if (up_running_) return;
    up_running_ = true;
  }
  up_thread_ = std::thread([this] { run_upstream(); });
  server_.start();
}

void FogNode::handle(Connection& conn, const Frame& frame) {
  ProcessResult result;
  {
    std::lock_guard lock(service_mu_);
    sleep_ms(service_cost_ms(config_.service_time_ms, config_.processing_bytes_per_s, frame.payload.size()));
    result = processor_.process(frame);
  }
  conn.reply(make_ack(frame, result.status));
  for (auto& f : result.outbound) enqueue_upstream(std::move(f));
}

void FogNode::enqueue_upstream(Frame frame) {
  std::lock_guard lock(up_mu_);
  if (up_queue_.size() >= config_.upstream_buffer) {
    up_queue_.pop_front();
    ++metrics_.upstream_dropped;
  }
  up_queue_.push_back(std::move(frame));
  up_cv_.notify_all();
}

void FogNode::run_upstream() {
  std::unique_lock lock(up_mu_);
  while (up_running_) {
    if (!upstream_ || !upstream_->alive()) {
      auto old = std::move(upstream_);
      lock.unlock();
      old.reset();
      std::unique_ptr<ClientSession> fresh;
      try {
        fresh = std::make_unique<ClientSession>(config_.upstream, NodeRole::Fog, PatientId{0}, config_.link,
                                                metrics_);
      } catch (const NetError&) {
        lock.lock();
        up_cv_.wait_for(lock, std::chrono::duration<double, std::milli>(config_.reconnect_interval_ms),
                        [&] { return !up_running_; });
        continue;
      }
      lock.lock();
      upstream_ = std::move(fresh);
      up_cv_.notify_all();
      continue;
    }
    up_cv_.wait_for(lock, std::chrono::duration<double, std::milli>(config_.reconnect_interval_ms),
                    [&] { return !up_running_ || !up_queue_.empty() || !upstream_->alive(); });
    if (!up_running_ || up_queue_.empty()) continue;
    Frame f = std::move(up_queue_.front());
    up_queue_.pop_front();
    ++up_sending_;
    ClientSession* session = upstream_.get();
    lock.unlock();
    bool sent = true;
    try {
      session->send(f);
    } catch (const NetError&) {
      sent = false;
    }
    lock.lock();
    --up_sending_;
    if (!sent) {
      ++metrics_.reconnects;
      if (up_queue_.size() >= config_.upstream_buffer) {
        ++metrics_.upstream_dropped;
      } else {
        up_queue_.push_front(std::move(f));
      }
    }
    up_cv_.notify_all();
  }
}

bool FogNode::upstream_connected() const {
  std::lock_guard lock(up_mu_);
  return upstream_ && upstream_->alive();
}

std::size_t FogNode::upstream_queue_size() const {
  std::lock_guard lock(up_mu_);
  return up_queue_.size();
}

void FogNode::stop(Clock::duration drain) {
  server_.stop();
  std::unique_ptr<ClientSession> session;
  {
    std::unique_lock lock(up_mu_);
    if (!up_running_) return;
    up_cv_.wait_for(lock, drain, [&] { return up_queue_.empty() && up_sending_ == 0; });
    up_running_ = false;
    up_cv_.notify_all();
  }
  if (up_thread_.joinable()) up_thread_.join();
  {
    std::lock_guard lock(up_mu_);
    session = std::move(upstream_);
  }
  if (session) {
    session->wait_outstanding_below(1, drain);
    session->close();
  }
}

void CloudConfig::validate() const {
  if (service_time_ms < 0 || processing_bytes_per_s < 0 || store_time_ms < 0) {
    throw ConfigError("cloud service costs must be nonnegative");
  }
  if (link.delay_ms < 0 || link.rate_bytes_per_s < 0) throw ConfigError("link delay and rate must be nonnegative");
}

namespace {

std::shared_ptr<const kws::KeywordClassifier> require_model(TopologyMode mode,
                                                           std::shared_ptr<const kws::KeywordClassifier> c) {
  if (mode == TopologyMode::Cloud && !c) throw ConfigError("cloud node in Cloud mode requires a trained model");
  return c;
}

}  // namespace

CloudNode::CloudNode(CloudConfig config, std::shared_ptr<const kws::KeywordClassifier> classifier,
                     const filter::PolicyFile& policies)
    : config_((config.validate(), std::move(config))),
      processor_(engine_, require_model(config_.mode, std::move(classifier))),
      store_(config_.retain_payloads),
      server_(
          config_.listen, config_.link, metrics_,
          [mode = config_.mode](NodeRole role) {
            return role == (mode == TopologyMode::Fog ? NodeRole::Fog : NodeRole::Device);
          },
          [this](Connection& conn, const Frame& frame) { handle(conn, frame); }) {
  filter::install(engine_, policies);
}

CloudNode::~CloudNode() { stop(); }

void CloudNode::start() { server_.start(); }

void CloudNode::stop() { server_.stop(); }

void CloudNode::handle(Connection& conn, const Frame& frame) {
  AckStatus status = AckStatus::Ok;
  {
    std::lock_guard lock(service_mu_);
    if (config_.mode == TopologyMode::Cloud) {
      sleep_ms(service_cost_ms(config_.service_time_ms, config_.processing_bytes_per_s, frame.payload.size()));
      auto result = processor_.process(frame);
      const auto now = Clock::now();
      for (const auto& f : result.outbound) store_.append(f, conn.role(), now);
      status = result.status;
    } else {
      sleep_ms(config_.store_time_ms);
      store_.append(frame, conn.role());
    }
  }
  conn.reply(make_ack(frame, status));
}

}  // namespace rpm::nodes
