#include "rpm/nodes/session.hpp"

#include <fmt/format.h>

namespace rpm::nodes {

namespace {

constexpr double kHandshakeTimeoutMs = 5000.0;
constexpr auto kCloseGrace = std::chrono::seconds(2);

Frame hello_frame(NodeRole role, PatientId patient) {
  ControlMessage hello;
  hello.op = ControlOp::Hello;
  hello.role = role;
  return make_control_frame(patient, hello);
}

bool is_hello(const Frame& f) {
  return f.category == DataCategory::CameraControl && !f.payload.empty() &&
         f.payload[0] == static_cast<std::uint8_t>(ControlOp::Hello);
}

}  // namespace

ClientSession::ClientSession(const Endpoint& peer, NodeRole role, PatientId patient, LinkProfile link,
                             NodeMetrics& metrics)
    : metrics_(metrics), sock_(connect_to(peer)) {
  reader_ = std::make_unique<FrameReader>(sock_);
  link_ = std::make_unique<DelayedLink>(sock_, link.delay_ms, link.rate_bytes_per_s);

  const Frame hello = hello_frame(role, patient);
  link_->send(hello);
  sock_.set_recv_timeout(kHandshakeTimeoutMs);
  const auto answer = reader_->next();
  sock_.set_recv_timeout(0);
  if (!answer || answer->category != DataCategory::Ack) {
    throw NetError(fmt::format("no handshake answer from {}", peer.to_string()));
  }
  if (decode_ack(answer->payload).status != AckStatus::Ok) {
    throw TopologyError(fmt::format("{} refused a {} connection", peer.to_string(), to_string(role)));
  }
  ack_thread_ = std::thread([this] { read_acks(); });
}

ClientSession::~ClientSession() {
  close();
}

void ClientSession::send(const Frame& frame) {
  std::lock_guard send_lock(send_mu_);
  if (ended_.load()) throw NetError("connection closed by peer");
  {
    std::lock_guard lock(mu_);
    pending_.push_back({frame.seq, Clock::now()});
  }
  try {
    link_->send(frame);
  } catch (const NetError&) {
    std::lock_guard lock(mu_);
    pending_.pop_back();
    throw;
  }
  metrics_.count_sent(frame);
}

void ClientSession::read_acks() {
  while (auto frame = reader_->next()) {
    const auto now = Clock::now();
    metrics_.count_received(*frame);
    if (frame->category != DataCategory::Ack) continue;
    std::lock_guard lock(mu_);
    if (pending_.empty()) {
      ++metrics_.ack_mismatches;
      continue;
    }
    const Sent sent = pending_.front();
    pending_.pop_front();
    if (sent.seq != frame->seq) ++metrics_.ack_mismatches;
    try {
      if (decode_ack(frame->payload).status != AckStatus::Ok) ++rejected_;
    } catch (const PayloadError&) {
      ++metrics_.protocol_errors;
    }
    metrics_.record_rtt(elapsed_ms(sent.at, now));
    cv_.notify_all();
  }
  metrics_.absorb({}, reader_->stats());
  ended_ = true;
  std::lock_guard lock(mu_);
  cv_.notify_all();
}

std::size_t ClientSession::outstanding() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

bool ClientSession::wait_outstanding_below(std::size_t limit, Clock::duration timeout) {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return pending_.size() < limit || ended_.load(); }) &&
         pending_.size() < limit;
}

void ClientSession::close() {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    closed_ = true;
  }
  std::lock_guard send_lock(send_mu_);
  link_->flush();
  sock_.shutdown_write();
  {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, kCloseGrace, [&] { return ended_.load(); });
  }
  sock_.shutdown();
  if (ack_thread_.joinable()) ack_thread_.join();
  link_->close();
  sock_.close();
}

bool Connection::reply(const Frame& frame) {
  try {
    link_.send(frame);
    return true;
  } catch (const NetError&) {
    return false;
  }
}

FrameServer::FrameServer(const Endpoint& listen, LinkProfile reply_link, NodeMetrics& metrics, Admit admit,
                         Handler handler)
    : listener_(listen), link_(reply_link), metrics_(metrics), admit_(std::move(admit)), handler_(std::move(handler)) {}

FrameServer::~FrameServer() { stop(); }

void FrameServer::start() {
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void FrameServer::accept_loop() {
  while (auto sock = listener_.accept()) {
    reap_finished();
    std::lock_guard lock(mu_);
    if (stopping_) break;
    auto& slot = slots_.emplace_back();
    slot.conn = std::make_unique<Connection>(std::move(*sock), link_);
    Connection* conn = slot.conn.get();
    slot.thread = std::thread([this, conn] { serve(*conn); });
  }
}

void FrameServer::serve(Connection& conn) {
  FrameReader reader(conn.sock_);
  ReaderStats seen;
  const auto absorb = [&] {
    metrics_.absorb(seen, reader.stats());
    seen = reader.stats();
  };

  auto first = reader.next();
  absorb();
  bool admitted = false;
  if (first) {
    metrics_.count_received(*first);
    if (is_hello(*first)) {
      try {
        conn.role_ = decode_control(first->payload).role;
        conn.hello_patient_ = first->patient;
        admitted = admit_(conn.role_);
      } catch (const PayloadError&) {
        ++metrics_.protocol_errors;
      }
    } else {
      ++metrics_.protocol_errors;
    }
    if (!admitted) ++metrics_.topology_rejections;
    conn.reply(make_ack(*first, admitted ? AckStatus::Ok : AckStatus::Rejected));
  }

  if (admitted) {
    while (auto frame = reader.next()) {
      absorb();
      metrics_.count_received(*frame);
      if (frame->category == DataCategory::Ack) continue;
      handler_(conn, *frame);
    }
    absorb();
  }
  conn.link_.flush();
  conn.sock_.shutdown();
  conn.done_ = true;
}

void FrameServer::reap_finished() {
  std::list<Slot> finished;
  {
    std::lock_guard lock(mu_);
    for (auto it = slots_.begin(); it != slots_.end();) {
      if (it->conn->done_.load()) {
        auto next = std::next(it);
        finished.splice(finished.end(), slots_, it);
        it = next;
      } else {
        ++it;
      }
    }
  }
  for (auto& slot : finished) slot.thread.join();
}

std::size_t FrameServer::active_connections() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& slot : slots_) n += !slot.conn->done_.load();
  return n;
}

void FrameServer::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    stopping_ = true;
  }
  listener_.close();
  if (accept_thread_.joinable()) accept_thread_.join();
  std::list<Slot> all;
  {
    std::lock_guard lock(mu_);
    all.swap(slots_);
  }
  for (auto& slot : all) slot.conn->sock_.shutdown();
  for (auto& slot : all) {
    if (slot.thread.joinable()) slot.thread.join();
  }
}

}  // namespace rpm::nodes
