#pragma once

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "tobe/session/aggregate.hpp"
#include "tobe/session/clock.hpp"
#include "tobe/session/config.hpp"
#include "tobe/session/events.hpp"
#include "tobe/session/pipeline.hpp"
#include "tobe/session/protocol.hpp"
#include "tobe/session/source.hpp"

namespace tobe::session {

// ---- control commands -------------------------------------------------------

struct BindRequest {
  std::string user_id;
  std::string metric;
  std::string anchor;
  std::string timeline;
  feedback::BindingMode mode = feedback::BindingMode::CONTINUOUS;
  std::optional<double> duration_s;
};

struct TimelineUpload {
  std::string user_id;
  std::string timeline_id;
  std::string sprite;
  std::vector<feedback::GestureSample> samples;
};

/// Either a new normalizer for a metric, or a new belt calibration
/// (exhale, inhale) for RESPIRATION.
struct CalibrationCommand {
  std::string user_id;
  MetricId metric = MetricId::HEART_RATE;
  std::optional<signal::Normalizer> normalizer;
  std::optional<std::pair<double, double>> belt;
};

struct SessionCommand {
  enum class Action { START, PAUSE, STOP };
  Action action = Action::START;
};

using Command = std::variant<BindRequest, TimelineUpload, CalibrationCommand, SessionCommand>;

struct CommandResult {
  bool ok = true;
  std::string error;
  nlohmann::ordered_json data = nlohmann::ordered_json::object();
};

using Reply = std::function<void(CommandResult)>;

// ---- session ----------------------------------------------------------------

struct SessionOptions {
  bool start_paused = false;       // wait for a start command
  double log_horizon_s = 5.0;
  std::uint16_t discovery_port = transport::kDiscoveryPort;
};

struct SessionSummary {
  bool completed = false;  // reached the configured end
  double end_t = 0.0;
  std::uint64_t events = 0;
};

/// The shared anchor between two users, blooming with their synchrony.
inline feedback::AvatarConfig shared_avatar() {
  feedback::AvatarConfig c;
  c.avatar_id = std::string(kSharedUser);
  c.anchors = {{std::string(kSharedUser), 0.5, 0.5, 0.3}};
  feedback::Transform closed{0.05, 0.05, 0.0, 0.0, 0.0}, open{1.0, 1.0, 0.0, 0.0, 0.0};
  c.timelines = {{"bloom", "flower", {{0.0, closed}, {1.0, open}}}};
  c.bindings = {{std::string(to_string(MetricId::PAIR_SYNCHRONY)), std::string(kSharedUser), "bloom",
                 feedback::BindingMode::CONTINUOUS, std::nullopt}};
  return c;
}

/// Runs every user's pipeline against one clock, drives the relaxation
/// protocol and merges everything into one event stream. Users are stepped
/// concurrently; their outputs are merged in user order, so a simulated run
/// is reproducible event for event.
class Session {
 public:
  using Listener = std::function<void(const SessionEvent&)>;

  Session(SessionConfig cfg, std::unique_ptr<Clock> clock, SourceFactory factory = make_source,
          SessionOptions opts = {})
      : cfg_(std::move(cfg)), clock_(std::move(clock)), factory_(std::move(factory)), opts_(opts) {
    cfg_.validate();
    require(clock_ != nullptr, "session needs a clock");
    paused_ = opts_.start_paused;
    const SourceContext ctx{cfg_.end_time(), opts_.discovery_port};
    for (const auto& u : cfg_.users) {
      std::vector<std::unique_ptr<Source>> sources;
      for (const auto& s : u.sources) {
        auto src = factory_(u, s, ctx);
        require_config(src != nullptr, "no source for " + s.describe());
        require_config(!(src->live() && clock_->simulated()),
                       "user '" + u.user_id + "': " + s.describe() + " is live and needs the wall clock");
        sources.push_back(std::move(src));
      }
      users_.push_back(std::make_unique<UserPipeline>(u, std::move(sources), cfg_.end_time()));
    }
    const auto sync = cfg_.synchrony_users();
    if (sync.size() == 2) {
      sync_pair_ = {index_of(sync[0]->user_id), index_of(sync[1]->user_id)};
      synchrony_.emplace(MetricId::PAIR_SYNCHRONY);
      shared_mapper_.emplace(shared_avatar());
    }
    render_every_ = std::max<std::int64_t>(1, std::llround(1.0 / (cfg_.render_hz * cfg_.step_s)));
  }

  const SessionConfig& config() const { return cfg_; }

  /// Receives every event as soon as it is produced, on the session thread.
  void add_listener(Listener l) { listeners_.push_back(std::move(l)); }

  /// Ordered NDJSON log. The stream must outlive run().
  void set_log(std::ostream& out) { log_.emplace(out, opts_.log_horizon_s); }

  /// Queues a command for the session thread; `reply` runs once it has been
  /// applied (or rejected). Safe from any thread.
  void post(Command cmd, Reply reply) {
    {
      std::lock_guard lk(mu_);
      if (!finished_) {
        commands_.push_back({std::move(cmd), std::move(reply)});
        cv_.notify_all();
        return;
      }
    }
    reply({false, "session is not running", {}});
  }

  /// Asks the loop to stop after the current step. Safe from any thread.
  void stop() {
    stop_ = true;
    clock_->interrupt();
    cv_.notify_all();
  }

  bool finished() const {
    std::lock_guard lk(mu_);
    return finished_;
  }

  SessionSummary run() {
    require(!ran_, "a session runs only once");
    ran_ = true;
    clock_->begin();
    const double local_t0 = local_clock();
    start_users(local_t0);

    emit({0.0, "session", "", {{"state", "started"}}});
    if (cfg_.protocol) emit_phase(0.0, 0);
    emit_gauge(0.0);

    std::int64_t k = 0;
    double prev = 0.0;
    bool completed = false;
    const auto end = cfg_.end_time();
    if (paused_) clock_->pause();
    while (!stop_) {
      apply_commands(prev);
      if (paused_) {
        std::unique_lock lk(mu_);
        cv_.wait_for(lk, std::chrono::milliseconds(100), [&] { return stop_ || !commands_.empty(); });
        continue;
      }
      ++k;
      // rounded so step times print as 1.9 rather than 1.9000000000000001
      double t = std::round(static_cast<double>(k) * cfg_.step_s * 1e9) / 1e9;
      if (end && t >= *end - 1e-9) t = *end;
      if (!clock_->wait_until(t)) break;
      step(prev, t, k % render_every_ == 0);
      prev = t;
      if (end && t >= *end) {
        completed = true;
        break;
      }
    }

    if (completed && cfg_.protocol && cfg_.protocol->total_s() <= prev + 1e-9)
      emit({cfg_.protocol->total_s(), "protocol", "", {{"phase_id", "END"}}});
    emit({prev, "session", "", {{"state", completed ? "completed" : "stopped"}}});
    if (log_) log_->finish();

    std::deque<std::pair<Command, Reply>> left;
    {
      std::lock_guard lk(mu_);
      finished_ = true;
      left.swap(commands_);
    }
    for (auto& [cmd, reply] : left) reply({false, "session is not running", {}});
    return {completed, prev, emitted_};
  }

 private:
  std::size_t index_of(const std::string& user) const {
    for (std::size_t i = 0; i < users_.size(); ++i)
      if (users_[i]->user_id() == user) return i;
    throw ConfigError("unknown user '" + user + "'");
  }

  void start_users(double local_t0) {
    std::vector<std::future<void>> jobs;
    for (auto& u : users_) jobs.push_back(std::async(std::launch::async, [&u, local_t0] { u->start(local_t0); }));
    for (auto& j : jobs) j.get();
  }

  void emit(SessionEvent e) {
    ++emitted_;
    for (const auto& l : listeners_) l(e);
    if (log_) log_->push(e);
  }

  void emit_phase(double t, std::size_t i) {
    emit({t, "protocol", "", {{"phase_id", std::string(to_string(cfg_.protocol->phases[i].id))}}});
  }

  void emit_gauge(double t) {
    if (!cfg_.protocol) return;
    if (const auto g = gauge_level(*cfg_.protocol, t))
      emit({t, "gauge", "", {{"level", g->level}, {"direction", std::string(to_string(g->direction))}}});
  }

  // Protocol task: phase starts and gauge samples in (prev, t].
  void protocol_events(double prev, double t) {
    if (!cfg_.protocol) return;
    const auto& p = *cfg_.protocol;
    std::vector<std::pair<double, int>> due;  // gauge samples (-1) and phase starts
    for (std::size_t i = 1; i < p.phases.size(); ++i) {
      const double b = p.start_of(i);
      if (b > prev && b <= t) due.push_back({b, static_cast<int>(i)});
    }
    const auto j0 = static_cast<std::int64_t>(std::floor(prev * cfg_.gauge_hz)) + 1;
    for (auto j = j0; static_cast<double>(j) / cfg_.gauge_hz <= t + 1e-12; ++j) {
      const double tg = static_cast<double>(j) / cfg_.gauge_hz;
      if (tg > prev) due.push_back({tg, -1});
    }
    std::sort(due.begin(), due.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : a.second > b.second;
    });
    for (const auto& [tt, what] : due) {
      if (what >= 0) emit_phase(tt, static_cast<std::size_t>(what));
      else emit_gauge(tt);
    }
  }

  void step(double prev, double t, bool render) {
    protocol_events(prev, t);

    std::vector<UserStep> steps(users_.size());
    if (users_.size() == 1) {
      steps[0] = users_[0]->step(t, render);
    } else {
      std::vector<std::future<UserStep>> jobs;
      for (auto& u : users_) jobs.push_back(std::async(std::launch::async, [&u, t, render] { return u->step(t, render); }));
      for (std::size_t i = 0; i < jobs.size(); ++i) steps[i] = jobs[i].get();
    }

    for (std::size_t i = 0; i < users_.size(); ++i) {
      for (auto& e : steps[i].events) emit(std::move(e));
      for (const auto& v : steps[i].values) latest_[v.metric][users_[i]->user_id()] = v;
    }

    if (synchrony_) {
      std::vector<MetricValue> values;
      for (const auto& v : synchrony_->push_a(steps[sync_pair_.first].hr_grid)) values.push_back(v);
      for (const auto& v : synchrony_->push_b(steps[sync_pair_.second].hr_grid)) values.push_back(v);
      for (const auto& v : values) emit({v.t, "metric", std::string(kSharedUser), metric_payload(v)});
      pending_sync_.insert(pending_sync_.end(), values.begin(), values.end());
      if (render) {
        const auto frame = shared_mapper_->tick(t, pending_sync_);
        emit({t, "render", std::string(kSharedUser), frame_json(frame)});
        pending_sync_.clear();
      }
    }

    if (!cfg_.group_metrics.empty() && std::floor(t) > std::floor(prev)) {
      for (auto m : cfg_.group_metrics)
        if (auto v = group_aggregate(latest_[m], m, t)) emit({t, "metric", std::string(kGroupUser), metric_payload(*v)});
    }

    if (log_) log_->advance(t);
  }

  // ---- commands ------------------------------------------------------------

  void apply_commands(double now) {
    std::deque<std::pair<Command, Reply>> batch;
    {
      std::lock_guard lk(mu_);
      batch.swap(commands_);
    }
    for (auto& [cmd, reply] : batch) {
      CommandResult r;
      try {
        r.data = std::visit([&](auto& c) { return apply(c, now); }, cmd);
      } catch (const std::exception& e) {
        r = {false, e.what(), {}};
      }
      if (reply) reply(std::move(r));
    }
  }

  UserPipeline& user(const std::string& id) {
    for (auto& u : users_)
      if (u->user_id() == id) return *u;
    throw ConfigError("unknown user '" + id + "'");
  }

  nlohmann::ordered_json apply(const BindRequest& b, double) {
    auto& u = user(b.user_id);
    const auto version = u.bind(b.metric, b.anchor, b.timeline, b.mode, b.duration_s);
    return {{"config_version", version}, {"avatar", feedback::to_json(*u.avatar())}};
  }

  nlohmann::ordered_json apply(const TimelineUpload& up, double) {
    auto& u = user(up.user_id);
    const auto tl = u.upload_timeline(up.samples, up.timeline_id, up.sprite);
    nlohmann::ordered_json keys = nlohmann::ordered_json::array();
    for (const auto& k : tl.keys) {
      auto x = transform_json(k.transform);
      nlohmann::ordered_json key{{"phase", k.phase}};
      key.update(x);
      keys.push_back(key);
    }
    return {{"config_version", u.avatar()->version},
            {"timeline", {{"id", tl.id}, {"sprite", tl.sprite}, {"keys", keys}}}};
  }

  nlohmann::ordered_json apply(const CalibrationCommand& c, double) {
    auto& u = user(c.user_id);
    require_config(c.normalizer.has_value() != c.belt.has_value(),
                   "calibration needs exactly one of normalizer or belt");
    if (c.belt) {
      require_config(c.metric == MetricId::RESPIRATION, "belt calibration applies to RESPIRATION only");
      u.set_respiration_calibration(c.belt->first, c.belt->second);
    } else {
      u.set_normalizer(c.metric, *c.normalizer);
    }
    return nlohmann::ordered_json::object();
  }

  nlohmann::ordered_json apply(const SessionCommand& c, double now) {
    switch (c.action) {
      case SessionCommand::Action::START:
        if (paused_) {
          paused_ = false;
          clock_->resume();
          emit({now, "session", "", {{"state", "running"}}});
        }
        break;
      case SessionCommand::Action::PAUSE:
        if (!paused_) {
          paused_ = true;
          clock_->pause();
          emit({now, "session", "", {{"state", "paused"}}});
        }
        break;
      case SessionCommand::Action::STOP:
        stop_ = true;
        break;
    }
    return {{"state", stop_ ? "stopping" : paused_ ? "paused" : "running"}};
  }

  SessionConfig cfg_;
  std::unique_ptr<Clock> clock_;
  SourceFactory factory_;
  SessionOptions opts_;
  std::vector<std::unique_ptr<UserPipeline>> users_;
  std::vector<Listener> listeners_;
  std::optional<EventLogWriter> log_;

  std::pair<std::size_t, std::size_t> sync_pair_{0, 0};
  std::optional<metrics::CoherenceTracker> synchrony_;
  std::optional<feedback::FeedbackMapper> shared_mapper_;
  std::vector<MetricValue> pending_sync_;
  std::map<MetricId, std::map<std::string, MetricValue>> latest_;
  std::int64_t render_every_ = 1;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::pair<Command, Reply>> commands_;
  std::atomic<bool> stop_{false};
  bool paused_ = false;
  bool finished_ = false;
  bool ran_ = false;
  std::uint64_t emitted_ = 0;
};

}  // namespace tobe::session
