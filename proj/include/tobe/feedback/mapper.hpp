#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tobe/feedback/avatar.hpp"
#include "tobe/metrics/types.hpp"

namespace tobe::feedback {

/// Something that starts a PERIODIC playback: a heartbeat, a blink...
struct TriggerEvent {
  std::string source;  // metric name or BLINK
  double t = 0.0;
};

inline TriggerEvent trigger(const metrics::BeatEvent& b) { return {std::string(to_string(MetricId::HEART_RATE)), b.t}; }
inline TriggerEvent trigger(const metrics::BlinkEvent& b) { return {std::string(kBlinkSource), b.t}; }

struct RenderItem {
  std::string anchor;
  std::string sprite;
  Transform transform;
  double phase = 0.0;
  bool stale = false;
  friend bool operator==(const RenderItem&, const RenderItem&) = default;
};

struct RenderFrame {
  double t = 0.0;
  std::uint64_t config_version = 0;
  std::vector<RenderItem> items;
  friend bool operator==(const RenderFrame&, const RenderFrame&) = default;
};

struct MapperConfig {
  double smoothing_s = 0.2;   // EMA time constant for CONTINUOUS bindings
  double stale_after_s = 5.0;
  double ease_s = 1.0;        // stale anchors return to phase 0 over this long
};

/// Owns an avatar config and the per-anchor animation state, and turns
/// metric values and trigger events into render frames. Not thread-safe:
/// tick and bind belong to one driving thread; other threads read
/// immutable snapshots.
class FeedbackMapper {
 public:
  explicit FeedbackMapper(AvatarConfig config, MapperConfig cfg = {}) : cfg_(cfg) {
    require_config(cfg.smoothing_s > 0.0 && cfg.stale_after_s > 0.0 && cfg.ease_s > 0.0,
                   "mapper time constants must be positive");
    config.validate();
    config_ = std::make_shared<const AvatarConfig>(std::move(config));
  }

  std::shared_ptr<const AvatarConfig> snapshot() const { return config_; }

  std::uint64_t bind(const std::string& metric, const std::string& anchor, const std::string& timeline,
                     BindingMode mode, std::optional<double> duration_s = std::nullopt) {
    config_ = std::make_shared<const AvatarConfig>(feedback::bind(*config_, metric, anchor, timeline, mode, duration_s));
    state_.erase(anchor);
    return config_->version;
  }

  void replace_config(AvatarConfig config) {
    config.validate();
    config.version = config_->version + 1;
    config_ = std::make_shared<const AvatarConfig>(std::move(config));
    state_.clear();
  }

  /// Advances to `now`. `values` may hold any number of new metric readings
  /// (the newest per metric is kept across ticks); `events` may hold triggers
  /// stamped up to and beyond `now` (future ones wait for their time).
  RenderFrame tick(double now, std::span<const metrics::MetricValue> values = {},
                   std::span<const TriggerEvent> events = {}) {
    require(std::isfinite(now), "tick time must be finite");
    require(!last_tick_ || now >= *last_tick_, "tick time went backwards");
    for (const auto& v : values) {
      auto& slot = latest_[std::string(to_string(v.metric))];
      if (!slot || v.t >= slot->t) slot = v;
    }
    for (const auto& e : events) pending_.insert({e.t, e.source});

    RenderFrame frame{now, config_->version, {}};
    for (const auto& b : config_->bindings) {
      const Timeline& tl = *config_->find_timeline(b.timeline);
      auto& st = state_[b.anchor];
      const bool stale = b.mode == BindingMode::CONTINUOUS ? continuous(b, st, now) : periodic(b, st, now);
      frame.items.push_back({b.anchor, tl.sprite, evaluate_timeline(tl, st.phase), st.phase, stale});
    }
    std::erase_if(pending_, [&](const auto& e) { return e.first <= now; });
    last_tick_ = now;
    return frame;
  }

 private:
  struct AnchorState {
    bool started = false;
    double phase = 0.0;
    double last = 0.0;
    std::optional<double> stale_since;
    double phase_at_stale = 0.0;
    std::optional<double> playback_start;
    std::optional<double> last_event;
  };

  void ease(AnchorState& st, double now) {
    if (!st.stale_since) {
      st.stale_since = now;
      st.phase_at_stale = st.phase;
    }
    st.phase = st.phase_at_stale * std::max(0.0, 1.0 - (now - *st.stale_since) / cfg_.ease_s);
    st.last = now;
  }

  bool continuous(const Binding& b, AnchorState& st, double now) {
    const auto it = latest_.find(b.metric);
    const bool fresh = it != latest_.end() && now - it->second->t <= cfg_.stale_after_s;
    if (!fresh) {
      ease(st, now);
      return true;
    }
    const double target = it->second->normalized;
    if (!st.started) {
      st.started = true;
      st.phase = target;
    } else {
      const double alpha = 1.0 - std::exp(-(now - st.last) / cfg_.smoothing_s);
      st.phase += alpha * (target - st.phase);
    }
    st.phase = std::clamp(st.phase, 0.0, 1.0);
    st.stale_since.reset();
    st.last = now;
    return false;
  }

  bool periodic(const Binding& b, AnchorState& st, double now) {
    for (const auto& [t, source] : pending_) {
      if (t > now) break;
      if (source == b.metric && (!st.playback_start || t >= *st.playback_start)) {
        st.playback_start = t;
        st.last_event = t;
      }
    }
    std::optional<double> last_seen = st.last_event;
    if (const auto it = latest_.find(b.metric); it != latest_.end())
      last_seen = last_seen ? std::max(*last_seen, it->second->t) : it->second->t;
    const bool stale = !last_seen || now - *last_seen > cfg_.stale_after_s;

    const double d = *b.duration_s;
    if (st.playback_start && now - *st.playback_start <= d) {
      st.phase = (now - *st.playback_start) / d;
      st.stale_since.reset();
    } else if (stale) {
      ease(st, now);
    } else {
      st.phase = 0.0;
    }
    st.last = now;
    return stale;
  }

  MapperConfig cfg_;
  std::shared_ptr<const AvatarConfig> config_;
  std::map<std::string, AnchorState> state_;
  std::map<std::string, std::optional<metrics::MetricValue>> latest_;
  std::multiset<std::pair<double, std::string>> pending_;
  std::optional<double> last_tick_;
};

}  // namespace tobe::feedback
