#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tobe/synth/common.hpp"

namespace tobe::synth {

/// Skin conductance response: amplitude * normalized (exp(-t/tau_d) - exp(-t/tau_r)).
/// `rise_s` is the time from onset to peak; `decay_s` the decay time constant.
struct ScrEvent {
  double t = 0.0;
  double amplitude = 1.0;  // uS at the peak
  double rise_s = 1.0;
  double decay_s = 4.0;
};

namespace detail {

inline double biexp_peak_time(double tau_r, double tau_d) {
  return tau_r * tau_d * std::log(tau_d / tau_r) / (tau_d - tau_r);
}

// Rise time constant whose bi-exponential peaks `rise_s` after onset.
// Peak time grows monotonically from 0 to tau_d as tau_r goes 0 -> tau_d.
inline double rise_constant_for(double rise_s, double tau_d) {
  double lo = 1e-9 * tau_d, hi = tau_d * (1.0 - 1e-12);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (biexp_peak_time(mid, tau_d) < rise_s ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Response of one event at absolute time t.
inline double scr_response(const ScrEvent& e, double t) {
  require_config(e.rise_s > 0.0 && e.decay_s > e.rise_s, "eda: need 0 < rise_s < decay_s");
  const double tau = t - e.t;
  if (tau <= 0.0) return 0.0;
  const double tau_r = detail::rise_constant_for(e.rise_s, e.decay_s);
  const double peak = std::exp(-e.rise_s / e.decay_s) - std::exp(-e.rise_s / tau_r);
  return e.amplitude * (std::exp(-tau / e.decay_s) - std::exp(-tau / tau_r)) / peak;
}

struct EdaSpec {
  double tonic_uS = 5.0;
  std::vector<ScrEvent> events;
  double fs = 32.0;
  std::string name = "eda";

  void validate() const {
    require_config(tonic_uS >= 0.0, "eda: tonic level must be >= 0");
    require_config(fs > 0.0, "eda: fs must be positive");
    for (const auto& e : events)
      require_config(e.rise_s > 0.0 && e.decay_s > e.rise_s, "eda: need 0 < rise_s < decay_s");
  }
};

/// Tonic level plus superposed SCRs, in double precision.
inline std::vector<double> eda_trace(const EdaSpec& spec, double duration_s) {
  spec.validate();
  const std::size_t n = sample_count(duration_s, spec.fs);
  std::vector<double> x(n, spec.tonic_uS);
  for (const auto& e : spec.events) {
    const double tau_r = detail::rise_constant_for(e.rise_s, e.decay_s);
    const double peak = std::exp(-e.rise_s / e.decay_s) - std::exp(-e.rise_s / tau_r);
    for (std::size_t i = 0; i < n; ++i) {
      const double tau = static_cast<double>(i) / spec.fs - e.t;
      if (tau > 0.0) x[i] += e.amplitude * (std::exp(-tau / e.decay_s) - std::exp(-tau / tau_r)) / peak;
    }
  }
  return x;
}

inline Recording gen_eda(const EdaSpec& spec, double duration_s, double t0 = 0.0) {
  Recording r;
  r.meta = StreamMeta{spec.name, Modality::EDA, {"EDA"}, spec.fs, "uS", spec.name};
  r.chunks = to_chunks({eda_trace(spec, duration_s)}, spec.fs, t0, default_chunk(spec.fs));
  return r;
}

}  // namespace tobe::synth
