#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "tobe/feedback/mapper.hpp"
#include "tobe/metrics/types.hpp"

namespace tobe::session {

/// One record of the session's output. Kinds: session, protocol, gauge,
/// metric, beat, blink, render, degraded, recovered.
struct SessionEvent {
  double t = 0.0;
  std::string kind;
  std::string user_id;  // empty for session-wide events
  nlohmann::ordered_json payload = nlohmann::ordered_json::object();

  /// {t, kind, user_id?, payload} as one line of JSON.
  std::string to_json_line() const {
    nlohmann::ordered_json j;
    j["t"] = t;
    j["kind"] = kind;
    if (!user_id.empty()) j["user_id"] = user_id;
    j["payload"] = payload;
    return j.dump();
  }
};

inline nlohmann::ordered_json metric_payload(const metrics::MetricValue& v) {
  return {{"metric_id", std::string(to_string(v.metric))}, {"raw", v.raw}, {"normalized", v.normalized}};
}

inline nlohmann::ordered_json transform_json(const feedback::Transform& x) {
  return {{"sx", x.sx}, {"sy", x.sy}, {"rot", x.rot}, {"tx", x.tx}, {"ty", x.ty}};
}

inline nlohmann::ordered_json frame_json(const feedback::RenderFrame& f) {
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  for (const auto& it : f.items)
    items.push_back({{"anchor", it.anchor},
                     {"sprite", it.sprite},
                     {"transform", transform_json(it.transform)},
                     {"phase", it.phase},
                     {"stale", it.stale}});
  return {{"config_version", f.config_version}, {"items", items}};
}

/// Writes events as NDJSON ordered by session time, user id breaking ties.
/// Events are held until the session clock is `horizon_s` past them, since
/// some metrics are stamped in the past (window centres, beat times).
class EventLogWriter {
 public:
  explicit EventLogWriter(std::ostream& out, double horizon_s = 5.0) : out_(out), horizon_(horizon_s) {}

  void push(const SessionEvent& e) { pending_.push_back({e, seq_++}); }

  /// Writes everything stamped at or before now - horizon.
  void advance(double now) { write_until(now - horizon_, false); }

  void finish() { write_until(0.0, true); }

  std::uint64_t written() const { return written_; }

 private:
  struct Item {
    SessionEvent e;
    std::uint64_t seq;
  };

  void write_until(double t, bool all) {
    auto key = [](const Item& i) { return std::tie(i.e.t, i.e.user_id, i.seq); };
    std::sort(pending_.begin(), pending_.end(), [&](const Item& a, const Item& b) { return key(a) < key(b); });
    std::size_t n = 0;
    while (n < pending_.size() && (all || pending_[n].e.t <= t)) {
      out_ << pending_[n].e.to_json_line() << '\n';
      ++n;
    }
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(n));
    written_ += n;
    if (n) out_.flush();
  }

  std::ostream& out_;
  double horizon_;
  std::vector<Item> pending_;
  std::uint64_t seq_ = 0;
  std::uint64_t written_ = 0;
};

}  // namespace tobe::session
