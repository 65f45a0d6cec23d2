#pragma once

#include <deque>
#include <optional>

#include "tobe/metrics/types.hpp"
#include "tobe/signal/normalizer.hpp"

namespace tobe::metrics {

/// AROUSAL: skin conductance level under a 2 s moving average, emitted at 4 Hz
/// once a full averaging window is available. Each value is stamped at the
/// centre of its averaging window.
class ArousalExtractor {
 public:
  explicit ArousalExtractor(double fs, signal::Normalizer normalizer = signal::Normalizer::rolling(),
                            double window_s = 2.0, double rate_hz = 4.0)
      : fs_(fs), window_s_(window_s), period_(1.0 / rate_hz), norm_(std::move(normalizer)) {
    require_config(fs >= 10.0, "arousal needs an EDA rate >= 10 Hz");
    require_config(window_s > 0.0 && rate_hz > 0.0, "arousal window and rate must be positive");
  }

  std::optional<MetricValue> push(double t, double x) {
    if (!first_) first_ = t;
    buf_.push_back({t, x});
    sum_ += x;
    while (buf_.front().first <= t - window_s_) {
      sum_ -= buf_.front().second;
      buf_.pop_front();
    }
    // full window: the span covered by the samples reaches window_s
    if (t - *first_ + 1.0 / fs_ < window_s_ - 1e-9) return std::nullopt;
    if (next_emit_ && t < *next_emit_ - 1e-9) return std::nullopt;
    next_emit_ = next_emit_ ? *next_emit_ + period_ : t + period_;
    if (*next_emit_ <= t) next_emit_ = t + period_;
    if (++since_resum_ >= 1024) {
      since_resum_ = 0;
      sum_ = 0.0;
      for (const auto& [bt, v] : buf_) sum_ += v;
    }
    const double raw = sum_ / static_cast<double>(buf_.size());
    const double tc = 0.5 * (buf_.front().first + t);
    return make_metric(MetricId::AROUSAL, tc, raw, norm_(raw, tc));
  }

  void set_normalizer(signal::Normalizer n) { norm_ = std::move(n); }

 private:
  double fs_;
  double window_s_;
  double period_;
  signal::Normalizer norm_;
  std::deque<std::pair<double, double>> buf_;
  double sum_ = 0.0;
  std::optional<double> first_;
  std::optional<double> next_emit_;
  std::size_t since_resum_ = 0;
};

}  // namespace tobe::metrics
