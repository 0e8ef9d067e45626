#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "rpm/domain/codec.hpp"
#include "rpm/domain/topology.hpp"

namespace rpm::nodes {

class NetError : public Error {
 public:
  using Error::Error;
};

using Clock = std::chrono::steady_clock;

/// Owning TCP socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.fd_.exchange(-1)) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  bool valid() const { return fd_.load() >= 0; }
  int fd() const { return fd_.load(); }

  /// Writes every byte; throws NetError when the peer is gone.
  void send_all(std::span<const std::uint8_t> bytes);

  /// Blocks for at least one byte. Returns 0 at end of stream; throws NetError
  /// on a socket error.
  std::size_t recv_some(std::span<std::uint8_t> buf);

  /// Wakes any thread blocked in recv or send on this socket.
  void shutdown();
  /// Sends end of stream after any queued bytes; reads keep working.
  void shutdown_write();
  /// recv_some throws NetError after this long without data; 0 disables.
  void set_recv_timeout(double ms);
  void close();

 private:
  std::atomic<int> fd_{-1};
};

/// Connects with TCP_NODELAY set. Throws NetError.
Socket connect_to(const Endpoint& endpoint);

class Listener {
 public:
  /// Port 0 picks an ephemeral port.
  explicit Listener(const Endpoint& endpoint);

  std::uint16_t port() const { return port_; }
  Endpoint endpoint() const { return {host_, port_}; }

  /// Next connection, or nullopt once close() has been called.
  std::optional<Socket> accept();
  void close();

 private:
  Socket sock_;
  std::string host_;
  std::uint16_t port_ = 0;
  std::atomic<bool> closed_{false};
};

/// Receive-side counters of a FrameReader.
struct ReaderStats {
  std::uint64_t frames = 0;
  std::uint64_t crc_failures = 0;
  std::uint64_t protocol_errors = 0;
  std::uint64_t truncated_frames = 0;  // partial frame left when the stream ended
  std::uint64_t bytes = 0;
};

/// Pulls frames off a stream socket. Corrupt or malformed input is counted,
/// skipped and the reader resynchronizes on the next magic. A run of bytes
/// skipped while hunting for the magic counts as one protocol error.
class FrameReader {
 public:
  explicit FrameReader(Socket& sock) : sock_(sock) {}

  /// Next valid frame, or nullopt at end of stream.
  std::optional<Frame> next();

  const ReaderStats& stats() const { return stats_; }

 private:
  Socket& sock_;
  std::vector<std::uint8_t> buf_;
  std::size_t start_ = 0;
  bool resyncing_ = false;
  ReaderStats stats_;
};

/// Emulated network hop in front of a socket's write side. Every frame is
/// delivered delay_ms after it is handed over, in order, and when a rate is
/// set the hop also serializes frames at rate bytes per second. With no delay
/// and no rate, writes happen synchronously in the caller.
class DelayedLink {
 public:
  DelayedLink(Socket& sock, double delay_ms, double rate_bytes_per_s = 0.0, std::size_t max_queue = 4096);
  ~DelayedLink();
  DelayedLink(const DelayedLink&) = delete;
  DelayedLink& operator=(const DelayedLink&) = delete;

  /// Queues the frame, blocking while the hop is full. Throws NetError when a
  /// previous write failed or the link is closed.
  void send(const Frame& frame);
  void send_bytes(std::vector<std::uint8_t> bytes);

  /// Blocks until every queued frame has been written (or the link failed).
  void flush();

  /// Drops pending frames and stops the writer.
  void close();

  bool failed() const { return failed_.load(); }
  std::uint64_t bytes_written() const { return bytes_written_.load(); }
  std::uint64_t frames_written() const { return frames_written_.load(); }

 private:
  struct Pending {
    Clock::time_point due;
    std::vector<std::uint8_t> bytes;
  };

  void run();
  Clock::time_point schedule(std::size_t bytes);

  Socket& sock_;
  const Clock::duration delay_;
  const double rate_;
  const std::size_t max_queue_;
  Clock::time_point link_free_{};

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Pending> queue_;
  bool closing_ = false;
  std::atomic<bool> failed_{false};
  std::atomic<std::uint64_t> bytes_written_{0};
  std::atomic<std::uint64_t> frames_written_{0};
  std::size_t in_flight_ = 0;
  std::thread writer_;
};

/// Sleeps for a fractional number of milliseconds; 0 or less returns at once.
void sleep_ms(double ms);

double elapsed_ms(Clock::time_point since, Clock::time_point until = Clock::now());

}  // namespace rpm::nodes
