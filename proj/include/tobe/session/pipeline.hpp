#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tobe/feedback/mapper.hpp"
#include "tobe/metrics/arousal.hpp"
#include "tobe/metrics/blink.hpp"
#include "tobe/metrics/coherence.hpp"
#include "tobe/metrics/eeg.hpp"
#include "tobe/metrics/heart_rate.hpp"
#include "tobe/metrics/respiration.hpp"
#include "tobe/metrics/rpeak.hpp"
#include "tobe/session/config.hpp"
#include "tobe/session/events.hpp"
#include "tobe/session/source.hpp"

namespace tobe::session {

using metrics::MetricValue;

struct UserStep {
  std::vector<SessionEvent> events;
  std::vector<MetricValue> values;            // every metric value emitted this step
  std::vector<metrics::GridSample> hr_grid;   // heart rate on the 4 Hz grid, for pair synchrony
};

/// One user's sources, metric extractors and avatar mapper. Everything a
/// failing source does stays inside this object: its errors become
/// "degraded" events and the other sources keep running.
class UserPipeline {
 public:
  static constexpr double kRetryInterval_s = 2.0;

  UserPipeline(UserConfig cfg, std::vector<std::unique_ptr<Source>> sources, std::optional<double> session_end)
      : cfg_(std::move(cfg)), end_(session_end) {
    require(sources.size() == cfg_.sources.size(), "one source per configured input expected");
    for (std::size_t i = 0; i < sources.size(); ++i)
      feeds_.push_back(Feed{std::move(sources[i]), cfg_.sources[i].describe(), cfg_.sources[i].modality});
    if (cfg_.wants(MetricId::CARDIAC_COHERENCE)) coherence_.emplace(MetricId::CARDIAC_COHERENCE);
    if (cfg_.avatar) mapper_.emplace(*cfg_.avatar);
  }

  const std::string& user_id() const { return cfg_.user_id; }
  const UserConfig& config() const { return cfg_; }

  bool degraded() const {
    for (const auto& f : feeds_)
      if (f.down) return true;
    return false;
  }

  /// Connects the sources. Failures are reported by the first step().
  void start(double local_t0) {
    for (auto& f : feeds_) {
      try {
        f.src->start(local_t0);
      } catch (const std::exception& e) {
        fail(f, 0.0, e.what());
      }
    }
  }

  /// Processes everything the sources hold up to `until` and, if asked,
  /// renders the avatar at `until`.
  UserStep step(double until, bool render) {
    UserStep out;
    std::vector<feedback::TriggerEvent> triggers;
    out.events.swap(backlog_);
    for (auto& f : feeds_) {
      if (f.down) {
        if (f.src->live() && until >= f.next_retry) {
          f.next_retry = until + kRetryInterval_s;
          if (f.src->reconnect()) {
            f.down = false;
            f.chain.reset();
            out.events.push_back(event(until, "recovered", {{"source", f.label}}));
          }
        }
        if (f.down) continue;
      }
      try {
        for (const auto& c : f.src->poll(until)) process(f, c, out, triggers);
      } catch (const std::exception& e) {
        fail(f, until, e.what());
        out.events.insert(out.events.end(), backlog_.begin(), backlog_.end());
        backlog_.clear();
        continue;
      }
      if (f.src->exhausted() && !f.ended && (!end_ || until < *end_)) {
        f.ended = true;
        out.events.push_back(event(until, "degraded", {{"source", f.label}, {"reason", "source ended"}}));
      }
    }
    if (render && mapper_) {
      const auto frame = mapper_->tick(until, out.values, triggers);
      out.events.push_back(event(until, "render", frame_json(frame)));
    }
    return out;
  }

  // ---- commands (session thread only) ------------------------------------

  std::uint64_t bind(const std::string& metric, const std::string& anchor, const std::string& timeline,
                     feedback::BindingMode mode, std::optional<double> duration_s) {
    require_config(mapper_.has_value(), "user '" + cfg_.user_id + "' has no avatar");
    const bool enabled = metric == feedback::kBlinkSource ? cfg_.blinks
                                                          : parse_metric(metric) && cfg_.wants(*parse_metric(metric));
    require_config(enabled, "metric " + metric + " is not enabled for user '" + cfg_.user_id + "'");
    return mapper_->bind(metric, anchor, timeline, mode, duration_s);
  }

  /// Adds (or replaces) a timeline recorded from a gesture.
  feedback::Timeline upload_timeline(std::span<const feedback::GestureSample> gesture, const std::string& id,
                                     const std::string& sprite) {
    require_config(mapper_.has_value(), "user '" + cfg_.user_id + "' has no avatar");
    auto tl = feedback::record_timeline(gesture, id, sprite);
    auto next = *mapper_->snapshot();
    std::erase_if(next.timelines, [&](const feedback::Timeline& t) { return t.id == id; });
    next.timelines.push_back(tl);
    mapper_->replace_config(std::move(next));
    return tl;
  }

  std::shared_ptr<const feedback::AvatarConfig> avatar() const {
    return mapper_ ? mapper_->snapshot() : nullptr;
  }

  void set_normalizer(MetricId m, const signal::Normalizer& n) {
    require_config(m != MetricId::CARDIAC_COHERENCE && m != MetricId::PAIR_SYNCHRONY && m != MetricId::RESPIRATION,
                   std::string(to_string(m)) + " is not normalized by a configurable normalizer");
    require_config(cfg_.wants(m), std::string(to_string(m)) + " is not enabled for user '" + cfg_.user_id + "'");
    cfg_.normalizers.insert_or_assign(m, n);
    for (auto& f : feeds_) {
      if (!f.chain) continue;
      auto& c = *f.chain;
      if (m == MetricId::HEART_RATE && c.hr) c.hr->set_normalizer(n);
      if (m == MetricId::AROUSAL && c.arousal) c.arousal->set_normalizer(n);
      if (c.eeg && required_modalities(m).front() == Modality::EEG) c.eeg->set_normalizer(m, n);
    }
  }

  void set_respiration_calibration(double exhale, double inhale) {
    require_config(cfg_.wants(MetricId::RESPIRATION) || cfg_.wants(MetricId::CARDIAC_COHERENCE),
                   "user '" + cfg_.user_id + "' has no respiration metric");
    require_config(exhale < inhale, "respiration calibration needs exhale < inhale");
    cfg_.respiration_calibration = std::pair{exhale, inhale};
    for (auto& f : feeds_)
      if (f.chain && f.chain->resp) f.chain->resp->set_calibration(exhale, inhale);
  }

 private:
  struct Chain {
    double fs = 0.0;
    std::size_t n_channels = 0;
    std::optional<metrics::RPeakDetector> rpeak;
    std::optional<metrics::HeartRateEstimator> hr;
    std::optional<metrics::HeartRateGrid> hr_grid;
    std::optional<metrics::RespirationExtractor> resp;
    std::optional<metrics::GridResampler> belt_grid;
    std::optional<metrics::ArousalExtractor> arousal;
    std::optional<metrics::EegMetricExtractor> eeg;
    std::optional<metrics::BlinkDetector> blink;
    std::size_t blink_channel = 0;
  };

  struct Feed {
    std::unique_ptr<Source> src;
    std::string label;
    Modality modality;
    bool down = false;
    bool ended = false;
    double next_retry = 0.0;
    std::optional<Chain> chain;
  };

  signal::Normalizer normalizer(MetricId m) const {
    const auto it = cfg_.normalizers.find(m);
    return it != cfg_.normalizers.end() ? it->second : signal::Normalizer::rolling();
  }

  bool ecg_needed() const {
    return cfg_.wants(MetricId::HEART_RATE) || cfg_.wants(MetricId::CARDIAC_COHERENCE) ||
           cfg_.wants(MetricId::PAIR_SYNCHRONY);
  }

  Chain build(const StreamMeta& meta) {
    require_config(meta.nominal_rate > 0.0, "stream '" + meta.name + "' has no regular sampling rate");
    Chain c;
    c.fs = meta.nominal_rate;
    c.n_channels = meta.n_channels();
    switch (meta.modality) {
      case Modality::ECG:
        if (ecg_needed()) {
          c.rpeak.emplace(c.fs);
          c.hr.emplace(normalizer(MetricId::HEART_RATE));
          c.hr_grid.emplace();
        }
        break;
      case Modality::RESP:
        if (cfg_.wants(MetricId::RESPIRATION) || coherence_) {
          metrics::RespirationConfig rc;
          rc.calibration = cfg_.respiration_calibration;
          c.resp.emplace(c.fs, rc);
          c.belt_grid.emplace();
        }
        break;
      case Modality::EDA:
        if (cfg_.wants(MetricId::AROUSAL)) c.arousal.emplace(c.fs, normalizer(MetricId::AROUSAL));
        break;
      case Modality::EEG: {
        std::map<MetricId, signal::Normalizer> norms;
        bool any = false;
        for (auto m : {MetricId::VIGILANCE, MetricId::WORKLOAD, MetricId::MEDITATION, MetricId::VALENCE}) {
          norms.insert_or_assign(m, normalizer(m));
          any = any || cfg_.wants(m);
        }
        if (any) c.eeg.emplace(c.fs, meta.channel_labels, metrics::EegMetricsConfig{}, norms);
        if (cfg_.blinks && !cfg_.has_modality(Modality::EOG)) {
          const auto& l = meta.channel_labels;
          const auto it = std::find(l.begin(), l.end(), "FP1");
          require_config(it != l.end(), "EEG stream '" + meta.name + "' has no FP1 channel for blink detection");
          c.blink_channel = static_cast<std::size_t>(it - l.begin());
          c.blink.emplace(c.fs);
        }
        break;
      }
      case Modality::EOG:
        if (cfg_.blinks) c.blink.emplace(c.fs);
        break;
      case Modality::METRIC:
        break;
    }
    return c;
  }

  void process(Feed& f, const SampleChunk& chunk, UserStep& out, std::vector<feedback::TriggerEvent>& triggers) {
    if (!f.chain) f.chain = build(f.src->meta());
    auto& c = *f.chain;
    require_config(chunk.n_channels == c.n_channels, "source " + f.label + " changed its channel count");
    const std::size_t n = chunk.n_samples();
    std::vector<double> frame(c.n_channels);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = chunk.timestamps[i];
      for (std::size_t ch = 0; ch < c.n_channels; ++ch) frame[ch] = chunk.samples[i * c.n_channels + ch];
      if (c.rpeak) {
        for (const auto& b : c.rpeak->push(t, frame[0])) {
          if (cfg_.wants(MetricId::HEART_RATE)) {
            out.events.push_back(event(b.t, "beat", nlohmann::ordered_json::object()));
            triggers.push_back(feedback::trigger(b));
            if (auto v = c.hr->push(b)) emit(*v, out);
          }
          const auto grid = c.hr_grid->push(b);
          if (coherence_)
            for (const auto& v : coherence_->push_a(grid)) emit(v, out);
          if (cfg_.wants(MetricId::PAIR_SYNCHRONY)) out.hr_grid.insert(out.hr_grid.end(), grid.begin(), grid.end());
        }
      }
      if (c.resp) {
        if (auto r = c.resp->push(t, frame[0]); r && cfg_.wants(MetricId::RESPIRATION)) emit(r->value, out);
        if (coherence_)
          for (const auto& v : coherence_->push_b(c.belt_grid->push(t, frame[0]))) emit(v, out);
      }
      if (c.arousal)
        if (auto v = c.arousal->push(t, frame[0])) emit(*v, out);
      if (c.eeg)
        for (const auto& v : c.eeg->push(t, frame))
          if (cfg_.wants(v.metric)) emit(v, out);
      if (c.blink)
        if (auto b = c.blink->push(t, frame[c.blink_channel])) {
          out.events.push_back(event(b->t, "blink", {{"peak_amplitude", b->peak_amplitude}}));
          triggers.push_back(feedback::trigger(*b));
        }
    }
  }

  void emit(const MetricValue& v, UserStep& out) {
    out.values.push_back(v);
    out.events.push_back(event(v.t, "metric", metric_payload(v)));
  }

  void fail(Feed& f, double t, const std::string& why) {
    f.down = true;
    f.chain.reset();
    f.next_retry = t + kRetryInterval_s;
    backlog_.push_back(event(t, "degraded", {{"source", f.label}, {"reason", why}}));
  }

  SessionEvent event(double t, std::string kind, nlohmann::ordered_json payload) const {
    return SessionEvent{t, std::move(kind), cfg_.user_id, std::move(payload)};
  }

  UserConfig cfg_;
  std::optional<double> end_;
  std::vector<Feed> feeds_;
  std::optional<metrics::CoherenceTracker> coherence_;
  std::optional<feedback::FeedbackMapper> mapper_;
  std::vector<SessionEvent> backlog_;
};

}  // namespace tobe::session
