#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tobe/metrics/layout.hpp"
#include "tobe/signal/iir.hpp"
#include "tobe/synth/common.hpp"

namespace tobe::synth {

/// One rhythm on a channel. bandwidth 0 gives a pure sinusoid with a random
/// phase; otherwise white noise band-passed to center +/- bandwidth/2.
/// Either way the component's power is amplitude^2 / 2.
struct EegComponent {
  double center_hz = 10.0;
  double bandwidth_hz = 2.0;
  double amplitude_uV = 10.0;
};

/// Channels sharing a common source: each channel gets
/// amplitude * (c * shared + sqrt(1 - c^2) * own), both sources of equal power.
struct EegCoupling {
  std::vector<std::string> channels;
  double coefficient = 0.0;
  signal::BandSpec band{7.0, 28.0};
  double amplitude_uV = 10.0;
};

struct EegSpec {
  double fs = 250.0;
  std::vector<std::string> labels = metrics::ChannelLayout::labels();
  std::map<std::string, std::vector<EegComponent>> components;  // "*" applies to every channel
  std::vector<EegCoupling> coupling;
  double background_uV = 0.0;  // white noise s.d. on every channel
  double blink_rate_per_min = 0.0;
  double blink_amplitude_uV = 80.0;
  double blink_duration_s = 0.2;
  std::vector<std::string> blink_channels{"FP1", "F8"};
  std::uint64_t seed = 1;
  std::string name = "eeg";

  void validate() const {
    require_config(fs > 0.0, "eeg: fs must be positive");
    require_config(!labels.empty(), "eeg: no channels");
    auto known = [&](const std::string& l) {
      return std::find(labels.begin(), labels.end(), l) != labels.end();
    };
    for (const auto& [ch, comps] : components) {
      require_config(ch == "*" || known(ch), "eeg: component on unknown channel " + ch);
      for (const auto& c : comps) {
        require_config(c.amplitude_uV >= 0.0, "eeg: component amplitude must be >= 0");
        require_config(c.bandwidth_hz >= 0.0, "eeg: component bandwidth must be >= 0");
        require_config(c.center_hz - c.bandwidth_hz / 2.0 > 0.0 &&
                           c.center_hz + c.bandwidth_hz / 2.0 < fs / 2.0,
                       "eeg: component band around " + num_str(c.center_hz) +
                           " Hz exceeds Nyquist");
      }
    }
    for (const auto& cp : coupling) {
      require_config(cp.coefficient >= 0.0 && cp.coefficient <= 1.0,
                     "eeg: coupling coefficient must be in [0, 1]");
      require_config(cp.amplitude_uV >= 0.0, "eeg: coupling amplitude must be >= 0");
      cp.band.validate(fs);
      for (const auto& ch : cp.channels) require_config(known(ch), "eeg: coupling on unknown channel " + ch);
    }
    for (const auto& ch : blink_channels)
      require_config(blink_rate_per_min == 0.0 || known(ch), "eeg: blink on unknown channel " + ch);
    require_config(background_uV >= 0.0 && blink_rate_per_min >= 0.0, "eeg: negative noise or blink rate");
  }
};

struct EegOutput {
  Recording recording;
  std::map<std::string, double> component_power;  // per channel, sum of amplitude^2/2
  std::vector<double> blink_times;                // pulse onsets
};

namespace detail {

// Zero-mean noise band-limited to `band` with exact power 0.5 over n samples.
inline std::vector<double> band_noise(std::mt19937_64& rng, double fs, signal::BandSpec band,
                                      std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  auto f = signal::make_bandpass(fs, band);
  const auto preroll = static_cast<std::size_t>(2.0 * fs);
  for (std::size_t i = 0; i < preroll; ++i) f.process_sample(g(rng));
  std::vector<double> x(n);
  double power = 0.0;
  for (auto& v : x) {
    v = f.process_sample(g(rng));
    power += v * v;
  }
  power /= static_cast<double>(n);
  const double scale = power > 0.0 ? std::sqrt(0.5 / power) : 0.0;
  for (auto& v : x) v *= scale;
  return x;
}

}  // namespace detail

inline EegOutput gen_eeg(const EegSpec& spec, double duration_s, double t0 = 0.0) {
  spec.validate();
  const std::size_t n = sample_count(duration_s, spec.fs);
  const std::size_t n_ch = spec.labels.size();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uphase(0.0, 2.0 * std::numbers::pi);
  std::vector<std::vector<double>> cols(n_ch, std::vector<double>(n, 0.0));
  EegOutput out;

  auto add_component = [&](std::size_t ch, const EegComponent& c) {
    if (c.bandwidth_hz == 0.0) {
      const double ph = uphase(rng);
      for (std::size_t i = 0; i < n; ++i)
        cols[ch][i] += c.amplitude_uV *
                       std::sin(2.0 * std::numbers::pi * c.center_hz * static_cast<double>(i) / spec.fs + ph);
    } else {
      const signal::BandSpec band{c.center_hz - c.bandwidth_hz / 2.0, c.center_hz + c.bandwidth_hz / 2.0};
      const auto s = detail::band_noise(rng, spec.fs, band, n);
      for (std::size_t i = 0; i < n; ++i) cols[ch][i] += c.amplitude_uV * s[i];
    }
    out.component_power[spec.labels[ch]] += c.amplitude_uV * c.amplitude_uV / 2.0;
  };

  for (std::size_t ch = 0; ch < n_ch; ++ch) {
    out.component_power[spec.labels[ch]] += 0.0;
    if (auto it = spec.components.find("*"); it != spec.components.end())
      for (const auto& c : it->second) add_component(ch, c);
    if (auto it = spec.components.find(spec.labels[ch]); it != spec.components.end())
      for (const auto& c : it->second) add_component(ch, c);
  }

  auto index = [&](const std::string& label) {
    return static_cast<std::size_t>(std::find(spec.labels.begin(), spec.labels.end(), label) -
                                    spec.labels.begin());
  };

  for (const auto& cp : spec.coupling) {
    const auto shared = detail::band_noise(rng, spec.fs, cp.band, n);
    const double c = cp.coefficient;
    const double r = std::sqrt(std::max(0.0, 1.0 - c * c));
    // band_noise has power 0.5, so amplitude scales it to amplitude^2 / 2
    for (const auto& label : cp.channels) {
      const std::size_t ch = index(label);
      const auto own = detail::band_noise(rng, spec.fs, cp.band, n);
      for (std::size_t i = 0; i < n; ++i) cols[ch][i] += cp.amplitude_uV * (c * shared[i] + r * own[i]);
      out.component_power[label] += cp.amplitude_uV * cp.amplitude_uV / 2.0;
    }
  }

  if (spec.background_uV > 0.0) {
    std::normal_distribution<double> g(0.0, spec.background_uV);
    for (auto& col : cols)
      for (auto& v : col) v += g(rng);
  }

  if (spec.blink_rate_per_min > 0.0) {
    const double spacing = 60.0 / spec.blink_rate_per_min;
    std::uniform_real_distribution<double> jitter(-0.25 * spacing, 0.25 * spacing);
    const auto width = static_cast<std::size_t>(std::llround(spec.blink_duration_s * spec.fs));
    for (double t = spacing; t + spec.blink_duration_s + 0.5 < duration_s; t += spacing) {
      const double onset = std::max(0.5, t + jitter(rng));
      const auto first = static_cast<std::size_t>(std::llround(onset * spec.fs));
      out.blink_times.push_back(t0 + static_cast<double>(first) / spec.fs);
      for (const auto& label : spec.blink_channels) {
        auto& col = cols[index(label)];
        for (std::size_t i = first; i < std::min(n, first + width); ++i) col[i] += spec.blink_amplitude_uV;
      }
    }
  }

  out.recording.meta = StreamMeta{spec.name, Modality::EEG, spec.labels, spec.fs, "uV",
                                  spec.name + "-" + std::to_string(spec.seed)};
  out.recording.chunks = to_chunks(cols, spec.fs, t0, default_chunk(spec.fs));
  return out;
}

}  // namespace tobe::synth
