#pragma once

#include <atomic>
#include <deque>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "tobe/bridge/messages.hpp"

namespace tobe::bridge {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

/// Receives parsed dashboard commands; must eventually call the reply.
using ControlHandler = std::function<void(session::Command, session::Reply)>;

/// WebSocket endpoint at /ws. publish() hands a message to every connected
/// dashboard without waiting: each client has its own queue, and a client
/// whose queue overflows is dropped. All socket work happens on one I/O
/// thread owned by the server.
class BridgeServer {
 public:
  static constexpr std::size_t kClientQueue = 256;
  static constexpr const char* kPath = "/ws";

  BridgeServer(std::uint16_t port, ControlHandler handler, const std::string& address = "0.0.0.0")
      : handler_(std::move(handler)), acceptor_(ioc_) {
    beast::error_code ec;
    const tcp::endpoint ep(asio::ip::make_address(address, ec), port);
    require_config(!ec, "bridge: bad listen address '" + address + "'");
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (!ec) acceptor_.listen(asio::socket_base::max_listen_connections, ec);
    require_config(!ec, "bridge: cannot listen on port " + std::to_string(port) + ": " + ec.message());
    port_ = acceptor_.local_endpoint().port();
    accept();
    io_ = std::thread([this] { ioc_.run(); });
  }

  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;
  ~BridgeServer() { stop(); }

  std::uint16_t port() const { return port_; }
  std::size_t clients() const { return n_clients_; }
  std::uint64_t dropped_clients() const { return dropped_; }

  void stop() {
    if (!io_.joinable()) return;
    asio::post(ioc_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
      for (const auto& c : clients_) c->close();
      clients_.clear();
      n_clients_ = 0;
      ioc_.stop();
    });
    io_.join();
  }

  /// Forwards a session event, if it maps to a dashboard message.
  void publish(const session::SessionEvent& e) {
    if (auto m = to_message(e)) {
      raise_t(e.t);
      publish_text(m->dump());
    }
  }

  void publish_text(std::string text) {
    auto msg = std::make_shared<const std::string>(std::move(text));
    asio::post(ioc_, [this, msg] {
      for (auto it = clients_.begin(); it != clients_.end();) {
        auto c = *it++;
        c->deliver(msg);
      }
    });
  }

 private:
  class Client : public std::enable_shared_from_this<Client> {
   public:
    Client(tcp::socket s, BridgeServer& server) : ws_(std::move(s)), server_(server) {}

    void start() {
      auto self = shared_from_this();
      http::async_read(ws_.next_layer(), buf_, req_, [self](beast::error_code ec, std::size_t) {
        if (ec) return;
        self->on_request();
      });
    }

    void deliver(const std::shared_ptr<const std::string>& msg) {
      if (closed_) return;
      if (queue_.size() >= kClientQueue) {
        ++server_.dropped_;
        server_.remove(shared_from_this());
        close();
        return;
      }
      queue_.push_back(msg);
      if (!writing_) write();
    }

    void close() {
      if (closed_) return;
      closed_ = true;
      beast::error_code ec;
      ws_.next_layer().shutdown(tcp::socket::shutdown_both, ec);
      ws_.next_layer().close(ec);
    }

   private:
    void on_request() {
      if (!websocket::is_upgrade(req_) || req_.target() != kPath) {
        auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found, req_.version());
        res->set(http::field::content_type, "text/plain");
        res->body() = "the dashboard endpoint is " + std::string(kPath) + "\n";
        res->prepare_payload();
        auto self = shared_from_this();
        http::async_write(ws_.next_layer(), *res, [self, res](beast::error_code, std::size_t) { self->close(); });
        return;
      }
      ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      auto self = shared_from_this();
      ws_.async_accept(req_, [self](beast::error_code ec) {
        if (ec) return;
        self->server_.add(self);
        self->read();
      });
    }

    void write() {
      writing_ = true;
      ws_.text(true);
      auto self = shared_from_this();
      ws_.async_write(asio::buffer(*queue_.front()), [self](beast::error_code ec, std::size_t) {
        self->writing_ = false;
        if (ec || self->closed_) {
          self->server_.remove(self);
          self->close();
          return;
        }
        self->queue_.pop_front();
        if (!self->queue_.empty()) self->write();
      });
    }

    void read() {
      auto self = shared_from_this();
      ws_.async_read(in_, [self](beast::error_code ec, std::size_t) {
        if (ec) {
          self->server_.remove(self);
          self->close();
          return;
        }
        std::string text = beast::buffers_to_string(self->in_.data());
        self->in_.consume(self->in_.size());
        self->server_.control(self, text);
        self->read();
      });
    }

    websocket::stream<tcp::socket> ws_;
    BridgeServer& server_;
    beast::flat_buffer buf_;
    beast::flat_buffer in_;
    http::request<http::string_body> req_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    bool writing_ = false;
    bool closed_ = false;
  };

  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket s) {
      if (ec) return;
      beast::error_code ignore;
      s.set_option(tcp::no_delay(true), ignore);
      std::make_shared<Client>(std::move(s), *this)->start();
      accept();
    });
  }

  void add(const std::shared_ptr<Client>& c) {
    clients_.insert(c);
    n_clients_ = clients_.size();
  }

  void remove(const std::shared_ptr<Client>& c) {
    clients_.erase(c);
    n_clients_ = clients_.size();
  }

  void raise_t(double t) {
    double cur = last_t_.load();
    while (t > cur && !last_t_.compare_exchange_weak(cur, t)) {
    }
  }

  // Parses on the I/O thread, answers from wherever the handler replies.
  void control(const std::shared_ptr<Client>& c, const std::string& text) {
    std::weak_ptr<Client> weak = c;
    auto send = [this, weak](const json& correlation_id, const session::CommandResult& r) {
      auto msg = std::make_shared<const std::string>(ack(last_t_.load(), correlation_id, r).dump());
      asio::post(ioc_, [weak, msg] {
        if (auto c = weak.lock()) c->deliver(msg);
      });
    };
    json id = nullptr;
    try {
      auto ctl = parse_control(text, id);
      if (!handler_) throw ConfigError("this bridge accepts no commands");
      handler_(std::move(ctl.command), [send, id = ctl.correlation_id](session::CommandResult r) { send(id, r); });
    } catch (const std::exception& e) {
      send(id, {false, e.what(), {}});
    }
  }

  ControlHandler handler_;
  asio::io_context ioc_;
  tcp::acceptor acceptor_;
  std::thread io_;
  std::uint16_t port_ = 0;
  std::set<std::shared_ptr<Client>> clients_;
  std::atomic<std::size_t> n_clients_{0};
  std::atomic<std::uint64_t> dropped_{0};
  std::atomic<double> last_t_{0.0};
};

}  // namespace tobe::bridge
