#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <thread>

#include "rpm/domain/payloads.hpp"
#include "rpm/nodes/metrics.hpp"

namespace rpm::nodes {

/// The peer refused the connection's declared role.
class TopologyError : public NetError {
 public:
  using NetError::NetError;
};

/// Emulated network characteristics of one hop.
struct LinkProfile {
  double delay_ms = 0.0;
  double rate_bytes_per_s = 0.0;  // 0 = unlimited
};

/// Client end of a node-to-node connection. The constructor connects, sends
/// Hello with the caller's role and waits for the peer to accept it. Acks are
/// matched to sent frames in order and their round-trip times recorded.
class ClientSession {
 public:
  /// Throws NetError when the peer is unreachable and TopologyError when it
  /// rejects the role.
  ClientSession(const Endpoint& peer, NodeRole role, PatientId patient, LinkProfile link, NodeMetrics& metrics);
  ~ClientSession();
  ClientSession(const ClientSession&) = delete;
  ClientSession& operator=(const ClientSession&) = delete;

  /// Throws NetError when the connection has failed.
  void send(const Frame& frame);

  std::size_t outstanding() const;

  /// Blocks until fewer than `limit` frames await an ack, the connection ends,
  /// or the timeout passes. Returns whether the condition was reached.
  bool wait_outstanding_below(std::size_t limit, Clock::duration timeout);

  /// True while the peer has not closed the connection.
  bool alive() const { return !ended_.load(); }

  std::uint64_t rejected_acks() const { return rejected_.load(); }

  /// Flushes queued frames, half-closes so the peer sees a clean end of
  /// stream, and waits briefly for the peer to close its side.
  void close();

 private:
  struct Sent {
    std::uint32_t seq;
    Clock::time_point at;
  };

  void read_acks();

  NodeMetrics& metrics_;
  Socket sock_;
  std::unique_ptr<FrameReader> reader_;
  std::unique_ptr<DelayedLink> link_;
  std::mutex send_mu_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Sent> pending_;
  std::atomic<bool> ended_{false};
  std::atomic<std::uint64_t> rejected_{0};
  bool closed_ = false;
  std::thread ack_thread_;
};

/// Server end of a node connection.
class Connection {
 public:
  Connection(Socket sock, LinkProfile link) : sock_(std::move(sock)), link_(sock_, link.delay_ms, link.rate_bytes_per_s) {}

  NodeRole role() const { return role_; }
  PatientId hello_patient() const { return hello_patient_; }

  /// Sends on the return path; false once the peer is gone.
  bool reply(const Frame& frame);

 private:
  friend class FrameServer;
  Socket sock_;
  DelayedLink link_;
  NodeRole role_ = NodeRole::Device;
  PatientId hello_patient_;
  std::atomic<bool> done_{false};
};

/// Accepts node connections and runs one reader thread per connection. The
/// first frame on a connection must be Hello; roles the admit predicate
/// refuses are answered with a Rejected ack and disconnected.
class FrameServer {
 public:
  using Handler = std::function<void(Connection&, const Frame&)>;
  using Admit = std::function<bool(NodeRole)>;

  FrameServer(const Endpoint& listen, LinkProfile reply_link, NodeMetrics& metrics, Admit admit, Handler handler);
  ~FrameServer();
  FrameServer(const FrameServer&) = delete;
  FrameServer& operator=(const FrameServer&) = delete;

  void start();
  void stop();

  Endpoint endpoint() const { return listener_.endpoint(); }
  std::size_t active_connections() const;

 private:
  struct Slot {
    std::unique_ptr<Connection> conn;
    std::thread thread;
  };

  void accept_loop();
  void serve(Connection& conn);
  void reap_finished();

  Listener listener_;
  LinkProfile link_;
  NodeMetrics& metrics_;
  Admit admit_;
  Handler handler_;
  mutable std::mutex mu_;
  std::list<Slot> slots_;
  bool stopping_ = false;
  std::thread accept_thread_;
};

}  // namespace rpm::nodes
