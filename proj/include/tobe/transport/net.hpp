#pragma once

#include <arpa/inet.h>
#include <cerrno>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fcntl.h>
#include <functional>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <stdexcept>
#include <string>
#include <sys/eventfd.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>
#include <utility>

#include "tobe/core.hpp"

namespace tobe::transport {

/// Transport failure that is neither a user configuration problem nor a
/// caller bug: peers vanishing, sockets refusing.
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace net {

inline std::string errno_text(int err = errno) { return std::strerror(err); }

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }

  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK); }

inline void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

/// eventfd used to wake a worker blocked in poll().
class Waker {
 public:
  Waker() : fd_(::eventfd(0, EFD_NONBLOCK | EFD_CLOEXEC)) {
    if (!fd_) throw TransportError("eventfd: " + errno_text());
  }
  int fd() const { return fd_.get(); }
  void wake() const {
    const std::uint64_t one = 1;
    [[maybe_unused]] auto n = ::write(fd_.get(), &one, sizeof one);
  }
  void drain() const {
    std::uint64_t v;
    [[maybe_unused]] auto n = ::read(fd_.get(), &v, sizeof v);
  }

 private:
  Fd fd_;
};

inline sockaddr_in ipv4(const std::string& host, std::uint16_t port) {
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(port);
  if (host.empty() || host == "0.0.0.0") {
    a.sin_addr.s_addr = htonl(INADDR_ANY);
  } else if (::inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) {
    addrinfo hints{}, *res = nullptr;
    hints.ai_family = AF_INET;
    if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res)
      throw TransportError("cannot resolve host '" + host + "'");
    a.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
  }
  return a;
}

inline std::string to_string(const in_addr& a) {
  char buf[INET_ADDRSTRLEN];
  return ::inet_ntop(AF_INET, &a, buf, sizeof buf) ? buf : "";
}

/// TCP listener on `port` (0 = ephemeral). Bind failures are configuration errors.
inline Fd tcp_listen(std::uint16_t port, std::uint16_t& bound_port) {
  Fd s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s) throw TransportError("socket: " + errno_text());
  int one = 1;
  ::setsockopt(s.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const auto addr = ipv4("", port);
  if (::bind(s.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
    throw ConfigError("cannot listen on TCP port " + std::to_string(port) + ": " + errno_text());
  if (::listen(s.get(), 16) != 0) throw ConfigError("listen: " + errno_text());
  sockaddr_in got{};
  socklen_t len = sizeof got;
  ::getsockname(s.get(), reinterpret_cast<sockaddr*>(&got), &len);
  bound_port = ntohs(got.sin_port);
  set_nonblocking(s.get());
  return s;
}

/// Blocking connect with a timeout; the returned socket is non-blocking.
inline Fd tcp_connect(const std::string& host, std::uint16_t port, double timeout_s) {
  const auto addr = ipv4(host.empty() ? "127.0.0.1" : host, port);
  Fd s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s) throw TransportError("socket: " + errno_text());
  set_nonblocking(s.get());
  if (::connect(s.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    if (errno != EINPROGRESS)
      throw TransportError("connect to " + host + ":" + std::to_string(port) + ": " + errno_text());
    pollfd p{s.get(), POLLOUT, 0};
    const int r = ::poll(&p, 1, static_cast<int>(timeout_s * 1000.0));
    if (r <= 0) throw TransportError("connect to " + host + ":" + std::to_string(port) + " timed out");
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(s.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) throw TransportError("connect to " + host + ":" + std::to_string(port) + ": " + errno_text(err));
  }
  set_nodelay(s.get());
  return s;
}

/// Writes all of `len` bytes to a non-blocking socket, waiting up to
/// `timeout_s` for room. Returns false if the peer is gone or time ran out.
inline bool send_all(int fd, const void* data, std::size_t len, double timeout_s) {
  const auto* p = static_cast<const char*>(data);
  const double deadline = local_clock() + timeout_s;
  while (len > 0) {
    const auto n = ::send(fd, p, len, MSG_NOSIGNAL);
    if (n > 0) {
      p += n;
      len -= static_cast<std::size_t>(n);
      continue;
    }
    if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) return false;
    const double left = deadline - local_clock();
    if (left <= 0) return false;
    pollfd pf{fd, POLLOUT, 0};
    ::poll(&pf, 1, static_cast<int>(left * 1000.0) + 1);
  }
  return true;
}

/// Host-wide claim on a name, held by an abstract-namespace Unix socket.
/// The kernel releases it when the socket closes or the process dies.
inline Fd claim_name(const std::string& name) {
  Fd s(::socket(AF_UNIX, SOCK_DGRAM | SOCK_CLOEXEC, 0));
  if (!s) throw TransportError("socket: " + errno_text());
  sockaddr_un a{};
  a.sun_family = AF_UNIX;
  std::string key = "tobe-stream/" + name;
  if (key.size() > sizeof(a.sun_path) - 2) key = "tobe-stream/#" + std::to_string(std::hash<std::string>{}(name));
  std::memcpy(a.sun_path + 1, key.data(), key.size());
  const auto len = static_cast<socklen_t>(offsetof(sockaddr_un, sun_path) + 1 + key.size());
  if (::bind(s.get(), reinterpret_cast<const sockaddr*>(&a), len) != 0) return Fd{};
  return s;
}

}  // namespace net
}  // namespace tobe::transport
