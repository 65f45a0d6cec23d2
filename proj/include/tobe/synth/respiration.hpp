#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tobe/synth/common.hpp"

namespace tobe::synth {

struct RespirationSpec {
  double period_s = 10.0;
  double fs = 50.0;
  double amplitude = 1.0;  // peak-to-trough belt excursion
  double offset = 0.0;     // belt value at full exhale
  double jitter = 0.0;     // relative s.d. of each cycle's period
  std::uint64_t seed = 1;
  std::string name = "resp";

  void validate() const {
    require_config(period_s > 0.0, "respiration: period_s must be positive");
    require_config(fs > 0.0, "respiration: fs must be positive");
    require_config(amplitude >= 0.0, "respiration: amplitude must be >= 0");
    require_config(jitter >= 0.0 && jitter < 0.5, "respiration: jitter must be in [0, 0.5)");
  }
};

struct RespirationOutput {
  Recording recording;
  std::vector<double> phase;  // ground truth per sample, [0,1), 0 = inhale onset
  std::size_t cycles = 0;     // completed breathing cycles
};

/// Belt inflation offset + amplitude * (1 - cos(2 pi phase)) / 2: minimum at
/// inhale onset, maximum at phase 0.5.
inline RespirationOutput gen_respiration(const RespirationSpec& spec, double duration_s,
                                         double t0 = 0.0) {
  spec.validate();
  const std::size_t n = sample_count(duration_s, spec.fs);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> jit(0.0, spec.jitter);
  auto next_period = [&] {
    if (spec.jitter == 0.0) return spec.period_s;
    return spec.period_s * std::clamp(1.0 + jit(rng), 0.5, 1.5);
  };

  RespirationOutput out;
  out.phase.resize(n);
  std::vector<double> x(n);
  double cycle_start = 0.0;
  double period = next_period();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.fs;
    while (t - cycle_start >= period) {
      cycle_start += period;
      period = next_period();
      ++out.cycles;
    }
    const double ph = (t - cycle_start) / period;
    out.phase[i] = ph;
    x[i] = spec.offset + spec.amplitude * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * ph));
  }
  // the cycle ending exactly at the last sample boundary counts as complete
  if (static_cast<double>(n) / spec.fs - cycle_start >= period - 1e-9) ++out.cycles;

  out.recording.meta = StreamMeta{spec.name, Modality::RESP, {"RESP"}, spec.fs, "a.u.",
                                  spec.name + "-" + std::to_string(spec.seed)};
  out.recording.chunks = to_chunks({x}, spec.fs, t0, default_chunk(spec.fs));
  return out;
}

}  // namespace tobe::synth
