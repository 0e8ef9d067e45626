#include "rpm/nodes/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <fmt/format.h>

namespace rpm::nodes {

namespace {

std::string sys_error(const char* what) { return fmt::format("{}: {}", what, std::strerror(errno)); }

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (ep.host.empty() || ep.host == "0.0.0.0") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    return addr;
  }
  if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    throw NetError(fmt::format("cannot resolve host '{}'", ep.host));
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

}  // namespace

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_.exchange(-1);
  }
  return *this;
}

void Socket::send_all(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const int fd = fd_.load();
    if (fd < 0) throw NetError("send on closed socket");
    const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NetError(sys_error("send"));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::size_t Socket::recv_some(std::span<std::uint8_t> buf) {
  for (;;) {
    const int fd = fd_.load();
    if (fd < 0) return 0;
    const ssize_t n = ::recv(fd, buf.data(), buf.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == ECONNRESET || errno == EBADF || errno == ENOTCONN) return 0;
    throw NetError(sys_error("recv"));
  }
}

void Socket::shutdown() {
  const int fd = fd_.load();
  if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
}

void Socket::shutdown_write() {
  const int fd = fd_.load();
  if (fd >= 0) ::shutdown(fd, SHUT_WR);
}

void Socket::set_recv_timeout(double ms) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(ms / 1000.0);
  tv.tv_usec = static_cast<suseconds_t>((ms - 1000.0 * static_cast<double>(tv.tv_sec)) * 1000.0);
  ::setsockopt(fd_.load(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

void Socket::close() {
  const int fd = fd_.exchange(-1);
  if (fd >= 0) ::close(fd);
}

Socket connect_to(const Endpoint& endpoint) {
  const sockaddr_in addr = resolve(endpoint);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw NetError(sys_error("socket"));
  if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    throw NetError(fmt::format("connect to {}: {}", endpoint.to_string(), std::strerror(errno)));
  }
  const int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return s;
}

Listener::Listener(const Endpoint& endpoint) : host_(endpoint.host) {
  const sockaddr_in addr = resolve(endpoint);
  sock_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock_.valid()) throw NetError(sys_error("socket"));
  const int one = 1;
  ::setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(sock_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    throw NetError(fmt::format("bind {}: {}", endpoint.to_string(), std::strerror(errno)));
  }
  if (::listen(sock_.fd(), 64) != 0) throw NetError(sys_error("listen"));
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  if (host_.empty()) host_ = "127.0.0.1";
}

std::optional<Socket> Listener::accept() {
  for (;;) {
    if (closed_.load()) return std::nullopt;
    const int fd = ::accept4(sock_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) {
      if (closed_.load()) {
        ::close(fd);
        return std::nullopt;
      }
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return Socket(fd);
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    if (closed_.load()) return std::nullopt;
    throw NetError(sys_error("accept"));
  }
}

void Listener::close() {
  closed_ = true;
  sock_.shutdown();
}

std::optional<Frame> FrameReader::next() {
  for (;;) {
    const std::span<const std::uint8_t> pending(buf_.data() + start_, buf_.size() - start_);
    if (!pending.empty()) {
      try {
        if (auto decoded = decode_frame(pending)) {
          start_ += decoded->consumed;
          ++stats_.frames;
          resyncing_ = false;
          return std::move(decoded->frame);
        }
      } catch (const CorruptionError& e) {
        ++stats_.crc_failures;
        start_ += e.resync_skip();
        resyncing_ = false;
        continue;
      } catch (const ProtocolError& e) {
        // A run of garbage bytes counts once, not once per skipped byte.
        if (!resyncing_ || e.resync_skip() > 1) ++stats_.protocol_errors;
        resyncing_ = e.resync_skip() == 1;
        start_ += e.resync_skip();
        continue;
      }
    }
    // Compact before reading more.
    if (start_ > 0) {
      buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(start_));
      start_ = 0;
    }
    constexpr std::size_t kChunk = 64 * 1024;
    const std::size_t old = buf_.size();
    buf_.resize(old + kChunk);
    std::size_t n = 0;
    try {
      n = sock_.recv_some(std::span(buf_.data() + old, kChunk));
    } catch (const NetError&) {
      n = 0;
    }
    buf_.resize(old + n);
    stats_.bytes += n;
    if (n == 0) {
      if (!buf_.empty()) ++stats_.truncated_frames;
      buf_.clear();
      return std::nullopt;
    }
  }
}

DelayedLink::DelayedLink(Socket& sock, double delay_ms, double rate_bytes_per_s, std::size_t max_queue)
    : sock_(sock),
      delay_(std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double, std::milli>(delay_ms))),
      rate_(rate_bytes_per_s),
      max_queue_(max_queue == 0 ? 1 : max_queue) {
  if (delay_ms < 0 || rate_bytes_per_s < 0) throw ConfigError("link delay and rate must be nonnegative");
  if (delay_ms > 0 || rate_ > 0) writer_ = std::thread([this] { run(); });
}

DelayedLink::~DelayedLink() { close(); }

Clock::time_point DelayedLink::schedule(std::size_t bytes) {
  // Transmission occupies the hop for bytes / rate, then propagation adds the delay.
  Clock::time_point now = Clock::now();
  Clock::time_point start = std::max(now, link_free_);
  if (rate_ > 0) {
    start += std::chrono::duration_cast<Clock::duration>(
        std::chrono::duration<double>(static_cast<double>(bytes) / rate_));
  }
  link_free_ = start;
  return start + delay_;
}

void DelayedLink::send(const Frame& frame) { send_bytes(encode_frame(frame)); }

void DelayedLink::send_bytes(std::vector<std::uint8_t> bytes) {
  if (!writer_.joinable()) {
    std::lock_guard lock(mu_);
    if (closing_) throw NetError("link closed");
    try {
      sock_.send_all(bytes);
    } catch (const NetError&) {
      failed_ = true;
      throw;
    }
    bytes_written_ += bytes.size();
    ++frames_written_;
    return;
  }
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return closing_ || failed_ || queue_.size() < max_queue_; });
  if (failed_) throw NetError("link write failed");
  if (closing_) throw NetError("link closed");
  const auto due = schedule(bytes.size());
  queue_.push_back({due, std::move(bytes)});
  cv_.notify_all();
}

void DelayedLink::run() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [&] { return closing_ || !queue_.empty(); });
    if (closing_) return;
    const auto due = queue_.front().due;
    if (cv_.wait_until(lock, due, [&] { return closing_; })) return;
    Pending p = std::move(queue_.front());
    queue_.pop_front();
    ++in_flight_;
    cv_.notify_all();
    lock.unlock();
    bool ok = true;
    try {
      sock_.send_all(p.bytes);
    } catch (const NetError&) {
      ok = false;
    }
    lock.lock();
    --in_flight_;
    if (!ok) {
      failed_ = true;
      queue_.clear();
      cv_.notify_all();
      return;
    }
    bytes_written_ += p.bytes.size();
    ++frames_written_;
    cv_.notify_all();
  }
}

void DelayedLink::flush() {
  if (!writer_.joinable()) return;
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return closing_ || failed_ || (queue_.empty() && in_flight_ == 0); });
}

void DelayedLink::close() {
  {
    std::lock_guard lock(mu_);
    closing_ = true;
    queue_.clear();
  }
  cv_.notify_all();
  if (writer_.joinable() && writer_.get_id() != std::this_thread::get_id()) writer_.join();
}

void sleep_ms(double ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

double elapsed_ms(Clock::time_point since, Clock::time_point until) {
  return std::chrono::duration<double, std::milli>(until - since).count();
}

}  // namespace rpm::nodes
