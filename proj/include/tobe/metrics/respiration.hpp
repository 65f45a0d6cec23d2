#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>

#include "tobe/metrics/types.hpp"
#include "tobe/signal/iir.hpp"
#include "tobe/signal/normalizer.hpp"

namespace tobe::metrics {

struct RespirationConfig {
  enum class Calibration { Fixed, Rolling };
  Calibration mode = Calibration::Fixed;
  // Belt value at full exhale / full inhale. Without one, Fixed mode captures
  // it from the first onboarding_s of data.
  std::optional<std::pair<double, double>> calibration;
  double onboarding_s = 30.0;
  double rolling_window_s = 60.0;
  double smoothing_hz = 1.0;
  double rate_hz = 10.0;
  double min_half_cycle_s = 0.75;
};

struct RespirationSample {
  BreathPhase phase;
  MetricValue value;  // RESPIRATION, raw = normalized = inflation
};

/// Chest-belt tracker: inflation from the calibrated belt value, breathing
/// phase from the turning points of the smoothed belt signal (minimum =
/// inhale onset, phase 0; maximum = exhale onset, phase 0.5), interpolated
/// between turning points with the last observed half-cycle durations.
class RespirationExtractor {
 public:
  explicit RespirationExtractor(double fs, RespirationConfig cfg = {})
      : fs_(fs), cfg_(cfg), lp_(signal::design_lowpass(fs, cfg.smoothing_hz), 1),
        rolling_(signal::Normalizer::rolling(cfg.rolling_window_s)),
        // low-frequency group delay of a 2nd-order Butterworth low-pass
        delay_s_(std::numbers::sqrt2 / (2.0 * std::numbers::pi * cfg.smoothing_hz)) {
    require_config(fs >= 10.0, "respiration needs a belt rate >= 10 Hz");
    require_config(cfg.rate_hz > 0.0 && cfg.onboarding_s > 0.0, "respiration rate and onboarding must be positive");
    if (cfg.calibration)
      require_config(cfg.calibration->first < cfg.calibration->second, "respiration calibration needs min < max");
  }

  /// Frozen calibration (Fixed mode), once known.
  std::optional<std::pair<double, double>> calibration() const { return frozen_; }

  /// Replaces the belt calibration (exhale, inhale) and switches to Fixed mode.
  void set_calibration(double exhale, double inhale) {
    require_config(exhale < inhale, "respiration calibration needs min < max");
    cfg_.mode = RespirationConfig::Calibration::Fixed;
    cfg_.calibration = std::pair{exhale, inhale};
    frozen_ = cfg_.calibration;
  }

  std::optional<RespirationSample> push(double t, double x) {
    if (!first_t_) {
      first_t_ = t;
      if (cfg_.calibration) frozen_ = cfg_.calibration;
    }
    const double inflation = inflate(t, x);
    if (!x0_) x0_ = x;
    track_phase(t, lp_.process_sample(x - *x0_) + *x0_);

    if (next_emit_ && t < *next_emit_ - 1e-9) return std::nullopt;
    const double period = 1.0 / cfg_.rate_hz;
    next_emit_ = next_emit_ ? *next_emit_ + period : t + period;
    if (*next_emit_ <= t) next_emit_ = t + period;

    BreathPhase bp{t, phase_at(t), inflation, stale_at(t)};
    if (bp.stale) bp.phase = held_phase_;
    held_phase_ = bp.phase;
    return RespirationSample{bp, make_metric(MetricId::RESPIRATION, t, inflation, inflation)};
  }

 private:
  double inflate(double t, double x) {
    lo_ = std::min(lo_, x);
    hi_ = std::max(hi_, x);
    if (cfg_.mode == RespirationConfig::Calibration::Rolling) return rolling_(x, t);
    if (frozen_) {
      const auto [lo, hi] = *frozen_;
      return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
    }
    if (t - *first_t_ >= cfg_.onboarding_s && hi_ > lo_) frozen_ = std::pair{lo_, hi_};
    if (!(hi_ > lo_)) return 0.5;
    return std::clamp((x - lo_) / (hi_ - lo_), 0.0, 1.0);
  }

  // Turning points with hysteresis: an extremum of the smoothed belt is
  // confirmed once the signal has moved back by 10% of the belt's range.
  void track_phase(double t, double s) {
    const double spread = frozen_ ? frozen_->second - frozen_->first : hi_ - lo_;
    if (!(spread > 0.0)) return;
    const double h = 0.1 * spread;
    if (!ext_) {
      ext_ = Extremum{t, s, t, s};
      return;
    }
    auto& e = *ext_;
    if (s > e.max_s) e = {e.min_t, e.min_s, t, s};
    if (s < e.min_s) e = {t, s, e.max_t, e.max_s};
    if (looking_for_max_ && s < e.max_s - h) {
      turning_point(e.max_t - delay_s_, true);
      e = {t, s, t, s};
      looking_for_max_ = false;
    } else if (!looking_for_max_ && s > e.min_s + h) {
      turning_point(e.min_t - delay_s_, false);
      e = {t, s, t, s};
      looking_for_max_ = true;
    }
  }

  // is_max: the smoothed belt peaked (exhale onset).
  void turning_point(double tc, bool is_max) {
    if (last_tp_ && tc - *last_tp_ < cfg_.min_half_cycle_s) return;
    if (last_tp_ && last_is_max_ != is_max) (is_max ? inhale_s_ : exhale_s_) = tc - *last_tp_;
    last_tp_ = tc;
    last_is_max_ = is_max;
  }

  // Extrapolates from the last turning point through the expected half
  // cycles, stopping one full cycle later.
  double phase_at(double t) const {
    if (!last_tp_) return 0.0;
    const double dt = std::max(0.0, t - *last_tp_);
    const double first = last_is_max_ ? exhale_s_ : inhale_s_;
    const double second = last_is_max_ ? inhale_s_ : exhale_s_;
    double half;  // half cycles elapsed since the turning point, in [0, 2)
    if (dt < first) half = dt / first;
    else half = std::min(1.0 + (dt - first) / second, 2.0 - 1e-9);
    const double p = 0.5 * half + (last_is_max_ ? 0.5 : 0.0);
    return p >= 1.0 ? p - 1.0 : p;
  }

  bool stale_at(double t) const {
    return !last_tp_ || t - *last_tp_ > 2.0 * (inhale_s_ + exhale_s_);
  }

  double fs_;
  RespirationConfig cfg_;
  signal::SosFilter lp_;
  signal::Normalizer rolling_;
  double delay_s_;
  std::optional<double> first_t_;
  std::optional<std::pair<double, double>> frozen_;
  double lo_ = std::numeric_limits<double>::infinity();
  double hi_ = -std::numeric_limits<double>::infinity();

  struct Extremum {
    double min_t, min_s, max_t, max_s;
  };
  std::optional<double> x0_;
  std::optional<Extremum> ext_;
  bool looking_for_max_ = true;
  std::optional<double> last_tp_;
  bool last_is_max_ = false;
  double inhale_s_ = 5.0;
  double exhale_s_ = 5.0;
  double held_phase_ = 0.0;
  std::optional<double> next_emit_;
};

}  // namespace tobe::metrics
