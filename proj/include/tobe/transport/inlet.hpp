#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <thread>

#include "tobe/transport/codec.hpp"
#include "tobe/transport/discovery.hpp"
#include "tobe/transport/net.hpp"

namespace tobe::transport {

/// The outlet went away (or sent garbage). Distinct from "no data yet",
/// which pull_chunk reports as an empty optional.
struct ConnectionLost : TransportError {
  using TransportError::TransportError;
};

struct ClockMeasurementFailed : TransportError {
  using TransportError::TransportError;
};

struct InletOptions {
  std::size_t queue_capacity = 1024;  // beyond this the inlet stops reading and TCP pushes back
  double connect_timeout_s = 2.0;
  double resolve_timeout_s = 3.0;
  std::uint16_t discovery_port = kDiscoveryPort;
};

/// Receives one stream. Chunks arrive in push order; after a disconnect,
/// reconnect() resumes with whatever the outlet pushes from then on.
class Inlet {
 public:
  Inlet(StreamInfo info, InletOptions opts = {}) : info_(std::move(info)), opts_(opts) {
    info_.meta.validate();
    connect();
  }

  /// Opens a stream known only by its metadata, locating it through discovery.
  explicit Inlet(const StreamMeta& meta, InletOptions opts = {}) : opts_(opts) {
    auto ep = find_endpoint(meta, opts_.resolve_timeout_s, opts_.discovery_port);
    if (ep) {
      info_ = *ep;
      try {
        connect();
        return;
      } catch (const TransportError&) {
        forget_endpoint(meta.source_id);
      }
      StreamFilter f;
      f.source_id = meta.source_id;
      auto fresh = resolve_stream_infos(f, opts_.resolve_timeout_s, opts_.discovery_port, true);
      ep = fresh.empty() ? std::nullopt : std::optional(fresh.front());
    }
    if (!ep) throw ConnectionLost("stream '" + meta.name + "' (" + meta.source_id + ") is not advertised");
    info_ = *ep;
    connect();
  }

  Inlet(const Inlet&) = delete;
  Inlet& operator=(const Inlet&) = delete;
  ~Inlet() { disconnect(); }

  const StreamMeta& meta() const { return info_.meta; }
  const StreamInfo& info() const { return info_; }

  bool connected() const {
    std::lock_guard lk(mu_);
    return !lost_;
  }

  /// Next chunk, waiting up to `max_wait_s`. Empty when nothing arrived in
  /// time; throws ConnectionLost once the connection is gone and every
  /// chunk received before that has been pulled.
  std::optional<SampleChunk> pull_chunk(double max_wait_s) {
    std::unique_lock lk(mu_);
    cv_.wait_for(lk, std::chrono::duration<double>(std::max(0.0, max_wait_s)),
                 [&] { return !queue_.empty() || lost_; });
    if (!queue_.empty()) {
      SampleChunk c = std::move(queue_.front());
      queue_.pop_front();
      if (queue_.size() + 1 == opts_.queue_capacity) waker_->wake();
      return c;
    }
    if (lost_) throw ConnectionLost("connection to stream '" + info_.meta.name + "' lost: " + lost_reason_);
    return std::nullopt;
  }

  /// Drops the current connection (if any) and connects again. Chunks pushed
  /// in between are not replayed.
  void reconnect() {
    disconnect();
    connect();
  }

  /// Ping/pong estimate of receiver_clock - sender_clock. On failure the
  /// previous estimate stays available through last_offset().
  ClockOffset measure_clock_offset(double timeout_s = 1.0) {
    std::unique_lock lk(mu_);
    if (lost_) throw ClockMeasurementFailed("no connection to '" + info_.meta.name + "'");
    const std::uint64_t nonce = ++nonce_;
    pong_.reset();
    const auto ping = encode_ping(nonce);
    const double t0 = local_clock();
    if (!net::send_all(fd_.get(), ping.data(), ping.size(), timeout_s))
      throw ClockMeasurementFailed("could not send ping to '" + info_.meta.name + "'");
    const bool ok = cv_.wait_for(lk, std::chrono::duration<double>(timeout_s),
                                 [&] { return (pong_ && pong_->first.nonce == nonce) || lost_; });
    if (!ok || !pong_ || pong_->first.nonce != nonce)
      throw ClockMeasurementFailed("no pong from '" + info_.meta.name + "'");
    const double t1 = pong_->second;
    ClockOffset off{0.5 * (t0 + t1) - pong_->first.sender_clock, t1 - t0};
    last_offset_ = off;
    return off;
  }

  std::optional<ClockOffset> last_offset() const {
    std::lock_guard lk(mu_);
    return last_offset_;
  }

 private:
  void connect() {
    auto fd = net::tcp_connect(info_.host, info_.port, opts_.connect_timeout_s);
    std::lock_guard lk(mu_);
    fd_ = std::move(fd);
    lost_ = false;
    lost_reason_.clear();
    waker_ = std::make_unique<net::Waker>();
    stop_ = false;
    worker_ = std::thread([this] { run(); });
  }

  void disconnect() {
    if (worker_.joinable()) {
      stop_ = true;
      waker_->wake();
      worker_.join();
    }
    std::lock_guard lk(mu_);
    fd_.reset();
    if (!lost_) {
      lost_ = true;
      lost_reason_ = "closed locally";
    }
  }

  void fail(const std::string& why) {
    std::lock_guard lk(mu_);
    lost_ = true;
    lost_reason_ = why;
    cv_.notify_all();
  }

  void run() {
    FrameDecoder decoder;
    std::uint8_t buf[65536];
    while (!stop_) {
      bool full;
      {
        std::lock_guard lk(mu_);
        full = queue_.size() >= opts_.queue_capacity;
      }
      pollfd fds[2] = {{waker_->fd(), POLLIN, 0}, {fd_.get(), static_cast<short>(full ? 0 : POLLIN), 0}};
      if (::poll(fds, 2, 200) < 0 && errno != EINTR) return fail(net::errno_text());
      if (fds[0].revents) waker_->drain();
      if (fds[1].revents & (POLLERR | POLLNVAL)) return fail("socket error");
      if (!(fds[1].revents & (POLLIN | POLLHUP))) continue;
      const auto n = ::recv(fd_.get(), buf, sizeof buf, 0);
      if (n == 0) return fail("outlet closed the connection");
      if (n < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
        return fail(net::errno_text());
      }
      const double t_recv = local_clock();
      decoder.feed({buf, static_cast<std::size_t>(n)});
      try {
        while (auto f = decoder.next()) {
          std::lock_guard lk(mu_);
          if (auto* c = std::get_if<SampleChunk>(&*f)) {
            if (c->n_channels != info_.meta.n_channels()) {
              lost_ = true;
              lost_reason_ = "chunk channel count does not match the stream";
              cv_.notify_all();
              return;
            }
            queue_.push_back(std::move(*c));
          } else if (auto* p = std::get_if<PongFrame>(&*f)) {
            pong_ = std::pair{*p, t_recv};
          }
          cv_.notify_all();
        }
      } catch (const FramingError& e) {
        return fail(std::string("framing error: ") + e.what());
      }
    }
  }

  StreamInfo info_;
  InletOptions opts_;
  net::Fd fd_;
  std::unique_ptr<net::Waker> waker_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<SampleChunk> queue_;
  bool lost_ = true;
  std::string lost_reason_;
  std::uint64_t nonce_ = 0;
  std::optional<std::pair<PongFrame, double>> pong_;
  std::optional<ClockOffset> last_offset_;

  std::atomic<bool> stop_{false};
  std::thread worker_;
};

inline std::optional<SampleChunk> pull_chunk(Inlet& inlet, double max_wait_s) { return inlet.pull_chunk(max_wait_s); }
inline ClockOffset measure_clock_offset(Inlet& inlet, double timeout_s = 1.0) {
  return inlet.measure_clock_offset(timeout_s);
}

}  // namespace tobe::transport
