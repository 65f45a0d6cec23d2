#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "tobe/metrics/types.hpp"
#include "tobe/signal/iir.hpp"

namespace tobe::metrics {

struct BlinkConfig {
  double threshold_sd = 4.0;      // multiples of the baseline standard deviation
  double baseline_s = 5.0;
  double refractory_s = 0.3;
  double min_duration_s = 0.02;   // a single noisy sample is not a blink
  double dc_cutoff_hz = 0.1;
};

/// Eye-blink detector on a frontal channel: DC removal, then an excursion
/// beyond threshold_sd x the rolling standard deviation of the last
/// baseline_s of sub-threshold samples. Events are released when the
/// excursion ends, stamped at its onset.
class BlinkDetector {
 public:
  explicit BlinkDetector(double fs, BlinkConfig cfg = {})
      : fs_(fs), cfg_(cfg), hp_(signal::design_highpass(fs, cfg.dc_cutoff_hz), 1),
        min_n_(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.min_duration_s * fs)))) {
    require_config(cfg.threshold_sd > 0.0 && cfg.baseline_s > 0.0 && cfg.refractory_s >= 0.0,
                   "blink detector needs positive threshold and baseline");
  }

  /// Current threshold in signal units; infinite until the baseline is filled.
  double threshold() const {
    if (!first_t_ || last_t_ - *first_t_ < cfg_.baseline_s || base_.size() < 2)
      return std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(base_.size());
    const double mean = sum_ / n;
    const double var = std::max(0.0, sumsq_ / n - mean * mean);
    return cfg_.threshold_sd * std::sqrt(var);
  }

  std::optional<BlinkEvent> push(double t, double x) {
    if (!first_t_) first_t_ = t;
    last_t_ = t;
    const double y = hp_.process_sample(x);
    const double thr = threshold();
    const bool above = std::abs(y) > thr;
    std::optional<BlinkEvent> out;

    if (in_episode_) {
      if (above) {
        ++duration_;
        if (std::abs(y) > std::abs(peak_)) peak_ = y;
      } else {
        in_episode_ = false;
        out = finish();
      }
    } else if (above) {
      in_episode_ = true;
      onset_ = t;
      peak_ = y;
      duration_ = 1;
    }

    if (!above) add_baseline(t, y);
    return out;
  }

  std::vector<BlinkEvent> push(std::span<const double> ts, std::span<const double> xs) {
    require(ts.size() == xs.size(), "timestamp and sample counts differ");
    std::vector<BlinkEvent> out;
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (auto e = push(ts[i], xs[i])) out.push_back(*e);
    return out;
  }

 private:
  std::optional<BlinkEvent> finish() {
    if (duration_ < min_n_) return std::nullopt;
    if (last_event_ && onset_ - *last_event_ < cfg_.refractory_s) return std::nullopt;
    last_event_ = onset_;
    return BlinkEvent{onset_, peak_};
  }

  void add_baseline(double t, double y) {
    base_.push_back({t, y});
    sum_ += y;
    sumsq_ += y * y;
    while (!base_.empty() && base_.front().first <= t - cfg_.baseline_s) {
      sum_ -= base_.front().second;
      sumsq_ -= base_.front().second * base_.front().second;
      base_.pop_front();
      if (++pops_ % 4096 == 0) {
        // re-accumulate to shed rounding drift
        sum_ = sumsq_ = 0.0;
        for (const auto& [bt, v] : base_) {
          sum_ += v;
          sumsq_ += v * v;
        }
      }
    }
  }

  double fs_;
  BlinkConfig cfg_;
  signal::SosFilter hp_;
  std::size_t min_n_;
  std::optional<double> first_t_;
  double last_t_ = 0.0;
  std::deque<std::pair<double, double>> base_;
  double sum_ = 0.0;
  double sumsq_ = 0.0;
  std::size_t pops_ = 0;
  bool in_episode_ = false;
  double onset_ = 0.0;
  double peak_ = 0.0;
  std::size_t duration_ = 0;
  std::optional<double> last_event_;
};

inline std::vector<BlinkEvent> detect_blinks(std::span<const double> ts, std::span<const double> x, double fs,
                                             BlinkConfig cfg = {}) {
  BlinkDetector d(fs, cfg);
  return d.push(ts, x);
}

}  // namespace tobe::metrics
