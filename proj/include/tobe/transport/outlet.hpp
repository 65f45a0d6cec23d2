#pragma once

#include <atomic>
#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <variant>
#include <vector>

#include "tobe/transport/codec.hpp"
#include "tobe/transport/net.hpp"

namespace tobe::transport {

struct OutletOptions {
  std::optional<std::uint16_t> port;   // TCP port; ephemeral when unset
  std::size_t queue_capacity = 1024;   // chunks held per inlet (and while nobody listens)
  double beacon_interval_s = 1.0;
  std::uint16_t discovery_port = kDiscoveryPort;
  std::string advertise_host;          // empty: receivers use the beacon's source address
  std::function<double()> clock = local_clock;  // stamped into pongs
};

struct OutletStats {
  std::uint64_t pushed = 0;
  std::uint64_t dropped = 0;      // chunks discarded by drop-oldest, summed over queues
  std::uint64_t sent = 0;         // chunk frames fully written, summed over inlets
  std::size_t connections = 0;
  std::size_t queued = 0;         // chunks waiting in the fullest queue
};

/// Publishes one stream: advertises it by UDP beacon and serves chunks to
/// every connected inlet over TCP. A chunk pushed while nobody is connected
/// is kept (up to capacity) for the first inlet that connects.
class Outlet {
 public:
  explicit Outlet(StreamMeta meta, OutletOptions opts = {}) : meta_(std::move(meta)), opts_(std::move(opts)) {
    meta_.validate();
    require_config(opts_.queue_capacity > 0, "outlet queue capacity must be positive");
    require_config(opts_.beacon_interval_s > 0.0, "beacon interval must be positive");
    claim_ = net::claim_name(meta_.source_id);
    if (!claim_) throw ConfigError("stream source_id '" + meta_.source_id + "' is already advertised on this host");
    listen_ = net::tcp_listen(opts_.port.value_or(0), port_);
    udp_ = net::Fd(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
    if (!udp_) throw TransportError("socket: " + net::errno_text());
    int one = 1;
    ::setsockopt(udp_.get(), SOL_SOCKET, SO_BROADCAST, &one, sizeof one);
    beacon_ = encode_beacon(info());
    worker_ = std::thread([this] { run(); });
  }

  Outlet(const Outlet&) = delete;
  Outlet& operator=(const Outlet&) = delete;

  ~Outlet() {
    stop_ = true;
    waker_.wake();
    if (worker_.joinable()) worker_.join();
  }

  const StreamMeta& meta() const { return meta_; }
  std::uint16_t port() const { return port_; }
  StreamInfo info() const { return {meta_, opts_.advertise_host, port_}; }

  void push_chunk(const SampleChunk& chunk) {
    require(chunk.n_channels == meta_.n_channels(),
            "chunk has " + std::to_string(chunk.n_channels) + " channels, stream '" + meta_.name + "' has " +
                std::to_string(meta_.n_channels()));
    if (chunk.empty()) return;
    auto frame = std::make_shared<const std::vector<std::uint8_t>>(encode_chunk(chunk));
    {
      std::lock_guard lk(mu_);
      ++stats_.pushed;
      if (clients_.empty()) {
        enqueue(backlog_, frame);
      } else {
        for (auto& c : clients_) enqueue(c->queue, frame);
      }
    }
    waker_.wake();
  }

  OutletStats stats() const {
    std::lock_guard lk(mu_);
    OutletStats s = stats_;
    s.connections = clients_.size();
    s.queued = backlog_.size();
    for (const auto& c : clients_) s.queued = std::max(s.queued, c->queue.size());
    return s;
  }

  /// Waits until at least `n` inlets are connected.
  bool wait_for_consumers(std::size_t n, double timeout_s) const {
    const double deadline = local_clock() + timeout_s;
    while (stats().connections < n) {
      if (local_clock() > deadline) return false;
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    return true;
  }

  /// Waits until every queued chunk has been written to its socket.
  bool flush(double timeout_s) const {
    const double deadline = local_clock() + timeout_s;
    for (;;) {
      {
        std::lock_guard lk(mu_);
        bool idle = true;
        for (const auto& c : clients_) idle = idle && c->queue.empty() && !c->current;
        if (idle) return true;
      }
      if (local_clock() > deadline) return false;
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  }

 private:
  using FramePtr = std::shared_ptr<const std::vector<std::uint8_t>>;

  struct Client {
    net::Fd fd;
    std::deque<FramePtr> queue;   // chunk frames, bounded
    std::deque<FramePtr> urgent;  // pongs, sent between chunk frames
    FramePtr current;
    bool current_is_chunk = false;
    std::size_t offset = 0;
    FrameDecoder decoder;
    bool dead = false;
  };

  void enqueue(std::deque<FramePtr>& q, const FramePtr& f) {
    q.push_back(f);
    while (q.size() > opts_.queue_capacity) {
      q.pop_front();
      ++stats_.dropped;
    }
  }

  void send_beacon() {
    for (const char* dst : {"255.255.255.255", "127.255.255.255"}) {
      const auto a = net::ipv4(dst, opts_.discovery_port);
      ::sendto(udp_.get(), beacon_.data(), beacon_.size(), 0, reinterpret_cast<const sockaddr*>(&a), sizeof a);
    }
  }

  void accept_all() {
    for (;;) {
      const int fd = ::accept4(listen_.get(), nullptr, nullptr, SOCK_NONBLOCK | SOCK_CLOEXEC);
      if (fd < 0) return;
      net::set_nodelay(fd);
      auto c = std::make_unique<Client>();
      c->fd = net::Fd(fd);
      std::lock_guard lk(mu_);
      if (clients_.empty()) c->queue.swap(backlog_);
      clients_.push_back(std::move(c));
    }
  }

  void read_from(Client& c) {
    std::uint8_t buf[4096];
    for (;;) {
      const auto n = ::recv(c.fd.get(), buf, sizeof buf, 0);
      if (n == 0 || (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR)) {
        c.dead = true;
        return;
      }
      if (n < 0) break;
      c.decoder.feed({buf, static_cast<std::size_t>(n)});
    }
    try {
      while (auto f = c.decoder.next()) {
        if (const auto* ping = std::get_if<PingFrame>(&*f)) {
          std::lock_guard lk(mu_);
          c.urgent.push_back(std::make_shared<const std::vector<std::uint8_t>>(encode_pong(ping->nonce, opts_.clock())));
        } else {
          c.dead = true;  // inlets only send pings
        }
      }
    } catch (const FramingError&) {
      c.dead = true;
    }
  }

  // Called with mu_ held.
  void write_to(Client& c) {
    while (!c.dead) {
      if (!c.current) {
        if (!c.urgent.empty()) {
          c.current = std::move(c.urgent.front());
          c.urgent.pop_front();
          c.current_is_chunk = false;
        } else if (!c.queue.empty()) {
          c.current = std::move(c.queue.front());
          c.queue.pop_front();
          c.current_is_chunk = true;
        } else {
          return;
        }
        c.offset = 0;
      }
      const auto& bytes = *c.current;
      const auto n = ::send(c.fd.get(), bytes.data() + c.offset, bytes.size() - c.offset, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) c.dead = true;
        return;
      }
      c.offset += static_cast<std::size_t>(n);
      if (c.offset == bytes.size()) {
        if (c.current_is_chunk) ++stats_.sent;
        c.current.reset();
      }
    }
  }

  void run() {
    double next_beacon = local_clock();
    std::vector<pollfd> fds;
    while (!stop_) {
      const double now = local_clock();
      if (now >= next_beacon) {
        send_beacon();
        next_beacon = now + opts_.beacon_interval_s;
      }
      fds.clear();
      fds.push_back({waker_.fd(), POLLIN, 0});
      fds.push_back({listen_.get(), POLLIN, 0});
      std::vector<Client*> polled;
      {
        std::lock_guard lk(mu_);
        for (auto& c : clients_) {
          const bool pending = c->current || !c->queue.empty() || !c->urgent.empty();
          fds.push_back({c->fd.get(), static_cast<short>(POLLIN | (pending ? POLLOUT : 0)), 0});
          polled.push_back(c.get());
        }
      }
      const int wait_ms = std::max(0, static_cast<int>(std::ceil((next_beacon - local_clock()) * 1000.0)));
      if (::poll(fds.data(), fds.size(), wait_ms) < 0 && errno != EINTR) break;
      if (fds[0].revents) waker_.drain();
      if (fds[1].revents & POLLIN) accept_all();
      for (std::size_t i = 0; i < polled.size(); ++i) {
        if (fds[i + 2].revents & (POLLIN | POLLHUP | POLLERR)) read_from(*polled[i]);
      }
      std::lock_guard lk(mu_);
      for (auto& c : clients_) write_to(*c);
      std::erase_if(clients_, [](const auto& c) { return c->dead; });
    }
    std::lock_guard lk(mu_);
    clients_.clear();
  }

  StreamMeta meta_;
  OutletOptions opts_;
  net::Fd claim_;
  net::Fd listen_;
  net::Fd udp_;
  std::uint16_t port_ = 0;
  std::vector<std::uint8_t> beacon_;
  net::Waker waker_;

  mutable std::mutex mu_;
  std::vector<std::unique_ptr<Client>> clients_;
  std::deque<FramePtr> backlog_;
  OutletStats stats_;

  std::atomic<bool> stop_{false};
  std::thread worker_;
};

}  // namespace tobe::transport
