#include <catch_amalgamated.hpp>

#include <chrono>
#include <future>
#include <mutex>
#include <thread>

#include "tobe/bridge/server.hpp"

using namespace tobe;
using namespace tobe::bridge;
using session::SessionEvent;
using Catch::Matchers::ContainsSubstring;
using steady = std::chrono::steady_clock;

namespace {

const std::filesystem::path kConfigs = TOBE_CONFIG_DIR;

struct Received {
  json msg;
  steady::time_point at;
};

/// Minimal dashboard: connects to the bridge and collects every text frame
/// on its own thread.
class TestClient {
 public:
  explicit TestClient(std::uint16_t port, bool reading = true, int rcvbuf = 0) {
    auto& s = ws_.next_layer();
    s.open(tcp::v4());
    if (rcvbuf > 0) s.set_option(asio::socket_base::receive_buffer_size(rcvbuf));
    s.connect({asio::ip::make_address("127.0.0.1"), port});
    ws_.handshake("127.0.0.1", "/ws");
    if (reading) {
      read();
      io_ = std::thread([this] { ioc_.run(); });
    }
  }

  ~TestClient() { close(); }

  void send(const json& m) {
    auto text = std::make_shared<std::string>(m.dump());
    std::promise<void> done;
    asio::post(ioc_, [&, text] {
      beast::error_code ec;
      ws_.text(true);
      ws_.write(asio::buffer(*text), ec);
      done.set_value();
    });
    done.get_future().wait();
  }

  void close() {
    if (io_.joinable()) {
      asio::post(ioc_, [this] {
        beast::error_code ec;
        ws_.next_layer().close(ec);
      });
      io_.join();
    } else {
      beast::error_code ec;
      ws_.next_layer().close(ec);
    }
  }

  /// Waits until `pred` holds for the received messages or `timeout` passes.
  bool wait_for(const std::function<bool(const std::vector<Received>&)>& pred,
                std::chrono::milliseconds timeout = std::chrono::milliseconds(2000)) {
    std::unique_lock lk(mu_);
    return cv_.wait_for(lk, timeout, [&] { return pred(got_); });
  }

  std::vector<Received> received() {
    std::lock_guard lk(mu_);
    return got_;
  }

  bool disconnected() {
    std::lock_guard lk(mu_);
    return eof_;
  }

 private:
  void read() {
    ws_.async_read(buf_, [this](beast::error_code ec, std::size_t) {
      const auto now = steady::now();
      std::lock_guard lk(mu_);
      if (ec) {
        eof_ = true;
        cv_.notify_all();
        return;
      }
      got_.push_back({json::parse(beast::buffers_to_string(buf_.data())), now});
      buf_.consume(buf_.size());
      cv_.notify_all();
      read();
    });
  }

  asio::io_context ioc_;
  websocket::stream<tcp::socket> ws_{ioc_};
  beast::flat_buffer buf_;
  std::thread io_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Received> got_;
  bool eof_ = false;
};

bool has_type(const std::vector<Received>& v, const std::string& type) {
  for (const auto& r : v)
    if (r.msg["type"] == type) return true;
  return false;
}

const Received* find_ack(const std::vector<Received>& v, const json& id) {
  for (const auto& r : v)
    if (r.msg["type"] == "ack" && r.msg["correlation_id"] == id) return &r;
  return nullptr;
}

void wait_clients(const BridgeServer& s, std::size_t n) {
  const auto until = steady::now() + std::chrono::seconds(2);
  while (s.clients() != n && steady::now() < until) std::this_thread::sleep_for(std::chrono::milliseconds(5));
}

}  // namespace

TEST_CASE("session events map to dashboard messages", "[bridge][messages]") {
  const auto metric = to_message({12.5, "metric", "alice", session::metric_payload({MetricId::HEART_RATE, 12.5, 72.0, 0.4})});
  REQUIRE(metric);
  CHECK(metric->dump() ==
        R"({"type":"metric","t":12.5,"user_id":"alice","metric_id":"HEART_RATE","raw":72.0,"normalized":0.4})");

  const auto gauge = to_message({3.0, "gauge", "", {{"level", 0.6}, {"direction", "RISING"}}});
  REQUIRE(gauge);
  CHECK(gauge->dump() == R"({"type":"gauge","t":3.0,"level":0.6,"direction":"RISING"})");

  const auto phase = to_message({300.0, "protocol", "", {{"phase_id", "SOLO"}}});
  REQUIRE(phase);
  CHECK((*phase)["phase_id"] == "SOLO");

  const auto deg = to_message({100.0, "degraded", "bob", {{"source", "stream ecg"}, {"reason", "cable pulled"}}});
  REQUIRE(deg);
  CHECK(deg->dump() ==
        R"({"type":"status","t":100.0,"user_id":"bob","state":"degraded","source":"stream ecg","reason":"cable pulled"})");

  const auto done = to_message({900.0, "session", "", {{"state", "completed"}}});
  REQUIRE(done);
  CHECK((*done)["type"] == "status");
  CHECK((*done)["state"] == "completed");
  CHECK_FALSE(done->contains("user_id"));

  CHECK_FALSE(to_message({1.0, "something_else", "", json::object()}));

  const auto a = ack(4.2, "c-7", {false, "unknown anchor 'elbow'", {}});
  CHECK(a.dump() == R"({"type":"ack","t":4.2,"correlation_id":"c-7","ok":false,"error":"unknown anchor 'elbow'"})");
}

TEST_CASE("control messages parse into session commands", "[bridge][messages]") {
  json id;
  auto c = parse_control(
      R"({"type":"bind_request","correlation_id":"b1","user_id":"alice","metric_id":"HEART_RATE","anchor_id":"heart","timeline_id":"ripple","mode":"PERIODIC","duration_s":0.5})",
      id);
  CHECK(id == "b1");
  CHECK(c.correlation_id == "b1");
  const auto& b = std::get<session::BindRequest>(c.command);
  CHECK(b.user_id == "alice");
  CHECK(b.anchor == "heart");
  CHECK(b.mode == feedback::BindingMode::PERIODIC);
  REQUIRE(b.duration_s);
  CHECK(*b.duration_s == 0.5);

  c = parse_control(
      R"({"type":"timeline_upload","correlation_id":2,"user_id":"bob","timeline_id":"pinch","sprite":"leaf.png","samples":[{"t":0,"sx":1,"sy":1,"rot":0,"tx":0,"ty":0},{"t":1,"sx":2,"sy":2,"rot":0.5,"tx":1,"ty":-1}]})",
      id);
  const auto& u = std::get<session::TimelineUpload>(c.command);
  REQUIRE(u.samples.size() == 2);
  CHECK(u.samples[1].t == 1.0);
  CHECK(c.correlation_id == 2);

  c = parse_control(
      R"({"type":"calibration_command","correlation_id":"k","user_id":"alice","metric_id":"HEART_RATE","normalizer":{"kind":"fixed","min":40,"max":120}})",
      id);
  CHECK(std::get<session::CalibrationCommand>(c.command).normalizer.has_value());
  c = parse_control(
      R"({"type":"calibration_command","correlation_id":"k","user_id":"alice","metric_id":"RESPIRATION","belt":[0.1,0.9]})",
      id);
  CHECK(std::get<session::CalibrationCommand>(c.command).belt->second == 0.9);

  c = parse_control(R"({"type":"session_command","correlation_id":"s","action":"pause"})", id);
  CHECK(std::get<session::SessionCommand>(c.command).action == session::SessionCommand::Action::PAUSE);

  const std::vector<std::pair<std::string, std::string>> bad{
      {"not json", "not valid JSON"},
      {"[1,2]", "JSON object"},
      {R"({"correlation_id":"x"})", "type"},
      {R"({"type":"bind_request","user_id":"a"})", "correlation_id"},
      {R"({"type":"dance","correlation_id":"x"})", "dance"},
      {R"({"type":"session_command","correlation_id":"x","action":"rewind"})", "action"},
      {R"({"type":"session_command","correlation_id":"x","action":"stop","force":true})", "force"},
      {R"({"type":"bind_request","correlation_id":"x","user_id":"a","metric_id":"HEART_RATE","anchor_id":"h","timeline_id":"r","mode":"SOMETIMES"})",
       "mode"},
      {R"({"type":"calibration_command","correlation_id":"x","user_id":"a","metric_id":"HAPPINESS"})", "HAPPINESS"},
      {R"({"type":"calibration_command","correlation_id":"x","user_id":"a","metric_id":"HEART_RATE","normalizer":{"kind":"fixed","min":5,"max":1}})",
       "min"},
      {R"({"type":"timeline_upload","correlation_id":"x","user_id":"a","timeline_id":"p","sprite":"s","samples":[{"t":0}]})",
       "sx"},
  };
  for (const auto& [text, needle] : bad) {
    INFO(text);
    CHECK_THROWS_AS(parse_control(text, id), ConfigError);
    try {
      parse_control(text, id);
    } catch (const ConfigError& e) {
      CHECK_THAT(e.what(), ContainsSubstring(needle));
    }
  }
}

TEST_CASE("dashboards connect on /ws and receive published events", "[bridge][server]") {
  BridgeServer server(0, nullptr, "127.0.0.1");
  REQUIRE(server.port() != 0);
  TestClient a(server.port());
  TestClient b(server.port());
  wait_clients(server, 2);
  REQUIRE(server.clients() == 2);

  const auto sent = steady::now();
  server.publish({1.0, "metric", "alice", session::metric_payload({MetricId::HEART_RATE, 1.0, 60.0, 0.25})});
  server.publish({1.0, "internal_only", "", json::object()});
  for (auto* c : {&a, &b}) {
    REQUIRE(c->wait_for([](const auto& v) { return !v.empty(); }));
    const auto got = c->received();
    CHECK(got.size() == 1);
    CHECK(got[0].msg["metric_id"] == "HEART_RATE");
    CHECK(got[0].at - sent < std::chrono::milliseconds(200));
  }

  a.close();
  wait_clients(server, 1);
  CHECK(server.clients() == 1);
}

TEST_CASE("paths other than /ws are refused", "[bridge][server]") {
  BridgeServer server(0, nullptr, "127.0.0.1");
  asio::io_context ioc;
  {
    websocket::stream<tcp::socket> ws(ioc);
    ws.next_layer().connect({asio::ip::make_address("127.0.0.1"), server.port()});
    beast::error_code ec;
    ws.handshake("127.0.0.1", "/socket", ec);
    CHECK(ec == websocket::error::upgrade_declined);
  }
  // a plain HTTP request gets a 404 naming the right path
  tcp::socket s(ioc);
  s.connect({asio::ip::make_address("127.0.0.1"), server.port()});
  http::request<http::empty_body> req(http::verb::get, "/ws", 11);
  req.set(http::field::host, "127.0.0.1");
  http::write(s, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(s, buf, res);
  CHECK(res.result() == http::status::not_found);
  CHECK_THAT(res.body(), ContainsSubstring("/ws"));
  CHECK(server.clients() == 0);
}

TEST_CASE("a port already in use is reported", "[bridge][server]") {
  BridgeServer first(0, nullptr, "127.0.0.1");
  CHECK_THROWS_WITH(BridgeServer(first.port(), nullptr, "127.0.0.1"), ContainsSubstring("cannot listen"));
}

TEST_CASE("control messages are answered with their correlation id", "[bridge][server]") {
  std::vector<session::Command> seen;
  std::mutex mu;
  BridgeServer server(0, [&](session::Command c, session::Reply reply) {
    {
      std::lock_guard lk(mu);
      seen.push_back(c);
    }
    // answer from another thread, as the session does
    std::thread([reply] { reply({true, "", {{"applied", true}}}); }).detach();
  }, "127.0.0.1");
  TestClient c(server.port());
  wait_clients(server, 1);
  server.publish({7.5, "gauge", "", {{"level", 0.5}, {"direction", "RISING"}}});

  c.send({{"type", "session_command"}, {"correlation_id", "go"}, {"action", "start"}});
  c.send({{"type", "session_command"}, {"correlation_id", "bad"}, {"action", "rewind"}});
  c.send({{"type", "bind_request"}, {"user_id", "x"}});
  REQUIRE(c.wait_for([](const auto& v) { return find_ack(v, "go") && find_ack(v, "bad") && find_ack(v, nullptr); }));

  const auto got = c.received();
  const auto* ok = find_ack(got, "go");
  CHECK(ok->msg["ok"] == true);
  CHECK(ok->msg["data"]["applied"] == true);
  CHECK(ok->msg["t"] == 7.5);
  const auto* bad = find_ack(got, "bad");
  CHECK(bad->msg["ok"] == false);
  CHECK_THAT(bad->msg["error"].get<std::string>(), ContainsSubstring("action"));
  CHECK(find_ack(got, nullptr)->msg["ok"] == false);

  std::lock_guard lk(mu);
  REQUIRE(seen.size() == 1);
  CHECK(std::holds_alternative<session::SessionCommand>(seen[0]));
}

TEST_CASE("a dashboard that stops reading is dropped without stalling the others", "[bridge][server]") {
  BridgeServer server(0, nullptr, "127.0.0.1");
  TestClient fast(server.port());
  TestClient slow(server.port(), false, 4096);
  wait_clients(server, 2);
  REQUIRE(server.clients() == 2);

  const std::string pad(16 * 1024, 'x');
  const int n = 3000;
  const auto t0 = steady::now();
  for (int i = 0; i < n; ++i) {
    server.publish_text(json{{"type", "metric"}, {"seq", i}, {"pad", pad}}.dump());
    if (i % 50 == 49) {
      // keep pace with the fast reader so only the stalled one overflows
      fast.wait_for([&](const auto& v) { return static_cast<int>(v.size()) > i - 100; });
    }
  }
  const auto publish_time = steady::now() - t0;
  REQUIRE(fast.wait_for([&](const auto& v) { return static_cast<int>(v.size()) == n; }, std::chrono::seconds(10)));
  CHECK(server.dropped_clients() == 1);
  CHECK(server.clients() == 1);
  CHECK(publish_time < std::chrono::seconds(10));

  const auto got = fast.received();
  for (int i = 0; i < n; ++i) REQUIRE(got[i].msg["seq"] == i);
}

TEST_CASE("a live session streams to the dashboard and takes commands from it", "[bridge][session]") {
  const auto cfg = session::parse_session(
      "protocol:\n  gauge: {half_cycle_s: 1}\n  phases:\n    - {phase_id: GUIDED, duration_s: 1.5}\n"
      "    - {phase_id: SOLO, duration_s: 1}\n    - {phase_id: SYNC, duration_s: 1}\n"
      "users:\n  - user_id: alice\n    sources:\n      - generator: ecg_rsa.yml\n      - generator: breathing.yml\n"
      "    metrics: [HEART_RATE, RESPIRATION, CARDIAC_COHERENCE]\n    avatar: avatar_relax.json\n",
      kConfigs);
  session::SessionOptions opts;
  opts.start_paused = true;
  session::Session s(cfg, std::make_unique<session::WallClock>(), session::make_source, opts);

  BridgeServer server(0, [&](session::Command c, session::Reply r) { s.post(std::move(c), std::move(r)); },
                      "127.0.0.1");
  std::mutex mu;
  std::vector<steady::time_point> published;
  s.add_listener([&](const SessionEvent& e) {
    if (!to_message(e)) return;
    {
      std::lock_guard lk(mu);
      published.push_back(steady::now());
    }
    server.publish(e);
  });

  TestClient dash(server.port());
  wait_clients(server, 1);
  std::thread runner([&] { s.run(); });

  // nothing moves until the dashboard says start
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  const auto started = steady::now();
  dash.send({{"type", "session_command"}, {"correlation_id", 1}, {"action", "start"}});
  REQUIRE(dash.wait_for([](const auto& v) { return find_ack(v, 1) != nullptr; }));
  dash.send({{"type", "bind_request"},
             {"correlation_id", 2},
             {"user_id", "alice"},
             {"metric_id", "HEART_RATE"},
             {"anchor_id", "elbow"},
             {"timeline_id", "ripple"}});
  REQUIRE(dash.wait_for([](const auto& v) { return find_ack(v, 2) != nullptr; }));
  runner.join();
  REQUIRE(dash.wait_for([](const auto& v) {
    for (const auto& r : v)
      if (r.msg["type"] == "status" && r.msg["state"] == "completed") return true;
    return false;
  }));

  const auto got = dash.received();
  CHECK(find_ack(got, 1)->msg["ok"] == true);
  CHECK(find_ack(got, 2)->msg["ok"] == false);
  CHECK_THAT(find_ack(got, 2)->msg["error"].get<std::string>(), ContainsSubstring("elbow"));
  for (const char* type : {"metric", "render", "protocol", "gauge", "beat", "status"}) {
    INFO(type);
    CHECK(has_type(got, type));
  }

  // every published event reached the dashboard in order and quickly
  std::vector<Received> events;
  for (const auto& r : got)
    if (r.msg["type"] != "ack") events.push_back(r);
  std::lock_guard lk(mu);
  REQUIRE(events.size() == published.size());
  double worst_ms = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i)
    worst_ms = std::max(worst_ms, std::chrono::duration<double, std::milli>(events[i].at - published[i]).count());
  CHECK(worst_ms < 200.0);

  // step-aligned messages arrive within 200 ms of their session time
  double worst_lag_ms = 0.0;
  for (const auto& r : events) {
    if (r.msg["type"] != "gauge" && r.msg["type"] != "render") continue;
    const auto due = started + std::chrono::duration_cast<steady::duration>(
                                   std::chrono::duration<double>(r.msg["t"].get<double>()));
    worst_lag_ms = std::max(worst_lag_ms, std::chrono::duration<double, std::milli>(r.at - due).count());
  }
  CHECK(worst_lag_ms < 200.0);

  // per-stream times never go backwards
  std::map<std::string, double> last;
  for (const auto& r : events) {
    std::string key = r.msg["type"].get<std::string>() + "/" + r.msg.value("user_id", "") + "/" +
                      r.msg.value("metric_id", "");
    const double t = r.msg["t"];
    if (last.count(key)) CHECK(t >= last[key]);
    last[key] = t;
  }
}
