#pragma once

#include <algorithm>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "tobe/metrics/types.hpp"
#include "tobe/signal/normalizer.hpp"

namespace tobe::metrics {

/// HEART_RATE per beat: 60 / median of the last four inter-beat intervals.
class HeartRateEstimator {
 public:
  explicit HeartRateEstimator(signal::Normalizer normalizer = signal::Normalizer::rolling())
      : norm_(std::move(normalizer)) {}

  std::optional<MetricValue> push(const BeatEvent& beat) {
    std::optional<MetricValue> out;
    if (last_) {
      require(beat.t > *last_, "beat times must be increasing");
      ibi_.push_back(beat.t - *last_);
      if (ibi_.size() > 4) ibi_.pop_front();
      std::vector<double> s(ibi_.begin(), ibi_.end());
      std::sort(s.begin(), s.end());
      const std::size_t n = s.size();
      const double med = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
      bpm_ = 60.0 / med;
      out = make_metric(MetricId::HEART_RATE, beat.t, *bpm_, norm_(*bpm_, beat.t));
    }
    last_ = beat.t;
    return out;
  }

  std::optional<double> current_bpm() const { return bpm_; }

  void set_normalizer(signal::Normalizer n) { norm_ = std::move(n); }

 private:
  signal::Normalizer norm_;
  std::optional<double> last_;
  std::deque<double> ibi_;
  std::optional<double> bpm_;
};

inline std::vector<MetricValue> heart_rate(std::span<const BeatEvent> beats,
                                           signal::Normalizer normalizer = signal::Normalizer::rolling()) {
  HeartRateEstimator hr(std::move(normalizer));
  std::vector<MetricValue> out;
  for (const auto& b : beats)
    if (auto v = hr.push(b)) out.push_back(*v);
  return out;
}

}  // namespace tobe::metrics
