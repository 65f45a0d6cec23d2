#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "tobe/metrics/types.hpp"
#include "tobe/signal/spectral.hpp"

namespace tobe::metrics {

/// One sample on an absolute time grid: t = k / rate.
struct GridSample {
  std::int64_t k = 0;
  double value = 0.0;
};

/// Resamples an irregular series onto a fixed-rate grid by linear
/// interpolation between consecutive points.
class GridResampler {
 public:
  explicit GridResampler(double rate_hz = 4.0) : rate_(rate_hz) {
    require_config(rate_hz > 0.0, "grid rate must be positive");
  }

  double rate() const { return rate_; }

  std::vector<GridSample> push(double t, double v) {
    std::vector<GridSample> out;
    if (prev_) {
      require(t > prev_->first, "grid input times must be increasing");
      const auto [t0, v0] = *prev_;
      for (auto k = static_cast<std::int64_t>(std::floor(t0 * rate_)) + 1;
           static_cast<double>(k) / rate_ <= t; ++k) {
        const double tk = static_cast<double>(k) / rate_;
        if (tk <= t0) continue;
        out.push_back({k, v0 + (v - v0) * (tk - t0) / (t - t0)});
      }
    } else if (std::abs(t * rate_ - std::round(t * rate_)) < 1e-9) {
      out.push_back({static_cast<std::int64_t>(std::llround(t * rate_)), v});
    }
    prev_ = std::pair{t, v};
    return out;
  }

 private:
  double rate_;
  std::optional<std::pair<double, double>> prev_;
};

/// Heart rate on the grid: each beat after the first contributes the point
/// (midpoint of the IBI, 60 / IBI), joined linearly. The rate is the mean over
/// the interval, so stamping it at the closing beat would add a delay that
/// varies with the rate itself and distorts the modulation.
class HeartRateGrid {
 public:
  explicit HeartRateGrid(double rate_hz = 4.0) : grid_(rate_hz) {}

  std::vector<GridSample> push(const BeatEvent& b) {
    std::vector<GridSample> out;
    if (last_) {
      require(b.t > *last_, "beat times must be increasing");
      const double ibi = b.t - *last_;
      out = grid_.push(b.t - ibi / 2.0, 60.0 / ibi);
    }
    last_ = b.t;
    return out;
  }

 private:
  GridResampler grid_;
  std::optional<double> last_;
};

struct CoherenceTrackerConfig {
  double rate_hz = 4.0;
  double window_s = 10.0;
  double hop_s = 1.0;
  signal::BandSpec band = signal::bands::kCardiacCoherence;
  signal::CoherenceConfig msc{};
};

/// Magnitude-squared coherence between two grid series over a trailing
/// window, emitted as soon as the window is full and every hop after that. Used for
/// CARDIAC_COHERENCE (HR vs breathing) and PAIR_SYNCHRONY (HR vs HR).
class CoherenceTracker {
 public:
  explicit CoherenceTracker(MetricId id, CoherenceTrackerConfig cfg = {})
      : id_(id), cfg_(cfg),
        n_(static_cast<std::size_t>(std::llround(cfg.window_s * cfg.rate_hz))),
        hop_k_(std::max<std::int64_t>(1, std::llround(cfg.hop_s * cfg.rate_hz))) {
    require_config(cfg.rate_hz > 0.0 && cfg.window_s > 0.0 && cfg.hop_s > 0.0,
                   "coherence tracker needs positive rate, window and hop");
    require_config(cfg.band.high_hz <= cfg.rate_hz / 2.0, "coherence band above the grid Nyquist");
  }

  MetricId metric() const { return id_; }

  std::vector<MetricValue> push_a(const std::vector<GridSample>& s) { return push(s, a_, b_, true); }
  std::vector<MetricValue> push_b(const std::vector<GridSample>& s) { return push(s, b_, a_, false); }

 private:
  std::vector<MetricValue> push(const std::vector<GridSample>& samples, std::map<std::int64_t, double>& mine,
                                std::map<std::int64_t, double>& other, bool is_a) {
    std::vector<MetricValue> out;
    for (const auto& s : samples) {
      if (!pairs_.empty() && s.k <= pairs_.back().k) continue;
      const auto it = other.find(s.k);
      if (it == other.end()) {
        mine[s.k] = s.value;
        continue;
      }
      pairs_.push_back(is_a ? Pair{s.k, s.value, it->second} : Pair{s.k, it->second, s.value});
      other.erase(other.begin(), std::next(it));
      mine.erase(mine.begin(), mine.upper_bound(s.k));
      while (pairs_.size() > n_) pairs_.pop_front();
      if (auto v = evaluate()) {
        last_emit_ = pairs_.back().k;
        out.push_back(*v);
      }
    }
    return out;
  }

  std::optional<MetricValue> evaluate() const {
    const auto& last = pairs_.back();
    if (pairs_.size() < n_ || (last_emit_ && last.k - *last_emit_ < hop_k_)) return std::nullopt;
    if (last.k - pairs_.front().k != static_cast<std::int64_t>(n_) - 1) return std::nullopt;  // gap in the window
    std::vector<double> x(n_), y(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      x[i] = pairs_[i].a;
      y[i] = pairs_[i].b;
    }
    const double raw = signal::msc(x, y, cfg_.rate_hz, cfg_.band, cfg_.msc);
    return make_metric(id_, static_cast<double>(last.k) / cfg_.rate_hz, raw, raw);
  }

  struct Pair {
    std::int64_t k;
    double a;
    double b;
  };

  MetricId id_;
  CoherenceTrackerConfig cfg_;
  std::size_t n_;
  std::int64_t hop_k_;
  std::map<std::int64_t, double> a_;
  std::map<std::int64_t, double> b_;
  std::deque<Pair> pairs_;
  std::optional<std::int64_t> last_emit_;
};

}  // namespace tobe::metrics
