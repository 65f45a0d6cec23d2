#pragma once

#include <algorithm>
#include <cmath>

#include "tobe/core.hpp"

namespace tobe::metrics {

struct MetricValue {
  MetricId metric = MetricId::HEART_RATE;
  double t = 0.0;
  double raw = 0.0;
  double normalized = 0.0;  // [0, 1]
  int visibility_level = 2;

  friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

inline MetricValue make_metric(MetricId id, double t, double raw, double normalized) {
  require(std::isfinite(raw), std::string("non-finite raw value for ") + std::string(to_string(id)));
  return MetricValue{id, t, raw, std::clamp(normalized, 0.0, 1.0), visibility_level(id)};
}

struct BeatEvent {
  double t = 0.0;
  friend bool operator==(const BeatEvent&, const BeatEvent&) = default;
};

struct BlinkEvent {
  double t = 0.0;  // onset
  double peak_amplitude = 0.0;
  friend bool operator==(const BlinkEvent&, const BlinkEvent&) = default;
};

struct BreathPhase {
  double t = 0.0;
  double phase = 0.0;      // [0, 1), 0 = inhale onset
  double inflation = 0.5;  // [0, 1]
  bool stale = false;      // no recent breathing cycle; phase is held
  friend bool operator==(const BreathPhase&, const BreathPhase&) = default;
};

}  // namespace tobe::metrics
