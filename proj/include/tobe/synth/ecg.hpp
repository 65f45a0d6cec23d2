#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tobe/synth/common.hpp"

namespace tobe::synth {

struct BpmPoint {
  double t = 0.0;
  double bpm = 60.0;
};

struct EcgSpec {
  double fs = 250.0;
  std::vector<BpmPoint> bpm_profile{{0.0, 60.0}};  // piecewise linear, held flat past the ends
  double rsa_depth = 0.0;                          // BPM, peak modulation by breathing
  double rsa_period_s = 10.0;
  double noise_uV = 0.0;
  double r_amplitude_uV = 1000.0;
  std::uint64_t seed = 1;
  std::string name = "ecg";

  static constexpr double kMinBpm = 30.0;
  static constexpr double kMaxBpm = 220.0;

  void validate() const {
    require_config(fs > 0.0, "ecg: fs must be positive");
    require_config(!bpm_profile.empty(), "ecg: bpm profile is empty");
    for (std::size_t i = 0; i < bpm_profile.size(); ++i) {
      const double b = bpm_profile[i].bpm;
      require_config(b - rsa_depth >= kMinBpm && b + rsa_depth <= kMaxBpm,
                     "ecg: bpm " + num_str(b) + (rsa_depth > 0 ? " +/- rsa_depth" : "") +
                         " outside [30, 220]");
      if (i > 0)
        require_config(bpm_profile[i].t > bpm_profile[i - 1].t,
                       "ecg: bpm profile times must be increasing");
    }
    require_config(rsa_depth >= 0.0, "ecg: rsa_depth must be >= 0");
    require_config(rsa_period_s > 0.0, "ecg: rsa_period_s must be positive");
    require_config(noise_uV >= 0.0, "ecg: noise_uV must be >= 0");
  }

  double profile_bpm(double t) const {
    if (t <= bpm_profile.front().t) return bpm_profile.front().bpm;
    for (std::size_t i = 1; i < bpm_profile.size(); ++i) {
      if (t <= bpm_profile[i].t) {
        const auto& a = bpm_profile[i - 1];
        const auto& b = bpm_profile[i];
        return a.bpm + (b.bpm - a.bpm) * (t - a.t) / (b.t - a.t);
      }
    }
    return bpm_profile.back().bpm;
  }

  /// Instantaneous rate. The breathing term peaks with full inflation, so
  /// heart rate rises while inhaling (respiration phase 0 = inhale onset).
  double instantaneous_bpm(double t) const {
    return profile_bpm(t) -
           rsa_depth * std::cos(2.0 * std::numbers::pi * t / rsa_period_s);
  }
};

struct EcgOutput {
  Recording recording;
  std::vector<double> beat_times;  // ground-truth R-peak times
};

namespace detail {

struct Bump {
  double offset_s;
  double amplitude;  // relative to R
  double sigma_s;
};

// Q, R, S
inline constexpr Bump kQrs[] = {{-0.030, -0.12, 0.008}, {0.0, 1.0, 0.010}, {0.030, -0.25, 0.010}};

}  // namespace detail

/// Beat times from integrating the instantaneous rate, starting half a beat in.
inline std::vector<double> ecg_beat_times(const EcgSpec& spec, double duration_s) {
  spec.validate();
  std::vector<double> beats;
  const double dt = 1.0 / spec.fs;
  double phase = 0.5;
  double rate_prev = spec.instantaneous_bpm(0.0) / 60.0;
  for (double t = 0.0; t < duration_s;) {
    const double t_next = t + dt;
    const double rate_next = spec.instantaneous_bpm(t_next) / 60.0;
    const double advance = 0.5 * (rate_prev + rate_next) * dt;
    const double next_phase = phase + advance;
    if (std::floor(next_phase) > std::floor(phase)) {
      const double target = std::floor(next_phase);
      const double tb = t + dt * (target - phase) / advance;
      if (tb < duration_s) beats.push_back(tb);
    }
    phase = next_phase;
    rate_prev = rate_next;
    t = t_next;
  }
  return beats;
}

/// Synthetic single-lead ECG (Gaussian Q/R/S template) with ground truth.
inline EcgOutput gen_ecg(const EcgSpec& spec, double duration_s, double t0 = 0.0) {
  spec.validate();
  const std::size_t n = sample_count(duration_s, spec.fs);
  EcgOutput out;
  out.beat_times = ecg_beat_times(spec, duration_s);

  std::vector<double> x(n, 0.0);
  const double reach = 0.1;
  for (const double tb : out.beat_times) {
    const auto first = static_cast<std::ptrdiff_t>(std::ceil((tb - reach) * spec.fs));
    const auto last = static_cast<std::ptrdiff_t>(std::floor((tb + reach) * spec.fs));
    for (auto i = std::max<std::ptrdiff_t>(first, 0); i <= last && i < static_cast<std::ptrdiff_t>(n); ++i) {
      const double t = static_cast<double>(i) / spec.fs - tb;
      for (const auto& b : detail::kQrs) {
        const double u = (t - b.offset_s) / b.sigma_s;
        x[static_cast<std::size_t>(i)] += spec.r_amplitude_uV * b.amplitude * std::exp(-0.5 * u * u);
      }
    }
  }
  if (spec.noise_uV > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_uV);
    for (auto& v : x) v += noise(rng);
  }
  for (auto& tb : out.beat_times) tb += t0;

  out.recording.meta = StreamMeta{spec.name, Modality::ECG, {"ECG"}, spec.fs, "uV",
                                  spec.name + "-" + std::to_string(spec.seed)};
  out.recording.chunks = to_chunks({x}, spec.fs, t0, default_chunk(spec.fs));
  return out;
}

}  // namespace tobe::synth
