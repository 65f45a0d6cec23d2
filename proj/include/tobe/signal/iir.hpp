#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tobe/core.hpp"

namespace tobe::signal {

struct BandSpec {
  double low_hz = 0.0;
  double high_hz = 0.0;

  double center_hz() const { return std::sqrt(low_hz * high_hz); }

  void validate(double fs) const {
    require_config(fs > 0.0, "sampling rate must be positive");
    require_config(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0,
                   "band " + num_str(low_hz) + "-" + num_str(high_hz) +
                       " Hz is invalid for fs=" + num_str(fs) +
                       " Hz (need 0 < low < high < fs/2)");
  }

  friend bool operator==(const BandSpec&, const BandSpec&) = default;
};

// Bands used by the metrics.
namespace bands {
inline constexpr BandSpec kBeta{15.0, 20.0};
inline constexpr BandSpec kThetaLowAlpha{4.0, 10.0};
inline constexpr BandSpec kDeltaTheta{1.0, 8.0};
inline constexpr BandSpec kWideAlpha{8.0, 14.0};
inline constexpr BandSpec kAlphaBeta{7.0, 28.0};
inline constexpr BandSpec kAlpha{8.0, 12.0};
inline constexpr BandSpec kCardiacCoherence{0.05, 0.3};
}  // namespace bands

/// One second-order section, a0 normalized to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;

  std::complex<double> response(double f_hz, double fs) const {
    const auto z1 = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs);
    const auto z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  }
};

struct SosCoefficients {
  std::vector<Biquad> sections;

  std::complex<double> response(double f_hz, double fs) const {
    std::complex<double> h{1.0, 0.0};
    for (const auto& s : sections) h *= s.response(f_hz, fs);
    return h;
  }
};

namespace detail {

inline std::complex<double> bilinear(std::complex<double> s, double fs) {
  return (2.0 * fs + s) / (2.0 * fs - s);
}

inline double prewarp(double f_hz, double fs) {
  return 2.0 * fs * std::tan(std::numbers::pi * f_hz / fs);
}

// Butterworth prototype poles in the upper half plane (conjugates implied),
// plus the real pole when the order is odd.
inline std::vector<std::complex<double>> butterworth_upper_poles(int order) {
  std::vector<std::complex<double>> poles;
  for (int k = 0; k < order / 2; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    poles.push_back(std::polar(1.0, theta));
  }
  return poles;
}

inline Biquad pole_pair_section(std::complex<double> zpole, double b0, double b1, double b2) {
  return Biquad{b0, b1, b2, -2.0 * zpole.real(), std::norm(zpole)};
}

inline void normalize_gain(SosCoefficients& sos, double f_hz, double fs) {
  const double g = std::abs(sos.response(f_hz, fs));
  if (g <= 0.0 || sos.sections.empty()) return;
  const double per = std::pow(g, 1.0 / static_cast<double>(sos.sections.size()));
  for (auto& s : sos.sections) {
    s.b0 /= per;
    s.b1 /= per;
    s.b2 /= per;
  }
}

}  // namespace detail

/// Butterworth band-pass by analog low-pass -> band-pass transformation and
/// bilinear transform. `prototype_order` poles per band edge; the resulting
/// filter has 2 * prototype_order poles in prototype_order biquads.
/// Gain is exactly 1 at the (prewarped) geometric band center.
inline SosCoefficients design_bandpass(double fs, BandSpec band, int prototype_order = 4) {
  band.validate(fs);
  require_config(prototype_order >= 2 && prototype_order % 2 == 0,
                 "band-pass prototype order must be even and >= 2");
  const double w1 = detail::prewarp(band.low_hz, fs);
  const double w2 = detail::prewarp(band.high_hz, fs);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;

  SosCoefficients sos;
  for (const auto& p : detail::butterworth_upper_poles(prototype_order)) {
    const std::complex<double> pb = p * bw;
    const std::complex<double> root = std::sqrt(pb * pb - 4.0 * w0sq);
    for (const auto& s : {(pb + root) / 2.0, (pb - root) / 2.0}) {
      // one zero at z = 1 (s = 0) and one at z = -1 (s = inf) per section
      sos.sections.push_back(detail::pole_pair_section(detail::bilinear(s, fs), 1.0, 0.0, -1.0));
    }
  }
  const double center = fs / std::numbers::pi * std::atan(std::sqrt(w0sq) / (2.0 * fs));
  detail::normalize_gain(sos, center, fs);
  return sos;
}

/// Butterworth high-pass, unity gain at Nyquist.
inline SosCoefficients design_highpass(double fs, double cutoff_hz, int order = 2) {
  require_config(fs > 0.0 && cutoff_hz > 0.0 && cutoff_hz < fs / 2.0,
                 "high-pass cutoff " + num_str(cutoff_hz) + " Hz is invalid for fs=" +
                     num_str(fs) + " Hz");
  require_config(order >= 2 && order % 2 == 0, "high-pass order must be even and >= 2");
  const double wc = detail::prewarp(cutoff_hz, fs);
  SosCoefficients sos;
  for (const auto& p : detail::butterworth_upper_poles(order)) {
    const auto s = wc / p;  // low-pass -> high-pass: s -> wc / s
    sos.sections.push_back(detail::pole_pair_section(detail::bilinear(s, fs), 1.0, -2.0, 1.0));
  }
  detail::normalize_gain(sos, fs / 2.0, fs);
  return sos;
}

/// Butterworth low-pass, unity gain at DC.
inline SosCoefficients design_lowpass(double fs, double cutoff_hz, int order = 2) {
  require_config(fs > 0.0 && cutoff_hz > 0.0 && cutoff_hz < fs / 2.0,
                 "low-pass cutoff " + num_str(cutoff_hz) + " Hz is invalid for fs=" +
                     num_str(fs) + " Hz");
  require_config(order >= 2 && order % 2 == 0, "low-pass order must be even and >= 2");
  const double wc = detail::prewarp(cutoff_hz, fs);
  SosCoefficients sos;
  for (const auto& p : detail::butterworth_upper_poles(order)) {
    sos.sections.push_back(detail::pole_pair_section(detail::bilinear(p * wc, fs), 1.0, 2.0, 1.0));
  }
  detail::normalize_gain(sos, 0.0, fs);
  return sos;
}

/// Streaming cascade of biquads (transposed direct form II), one state per
/// channel. Chunking the input never changes the output.
class SosFilter {
 public:
  SosFilter() = default;
  SosFilter(SosCoefficients coeffs, std::size_t n_channels = 1)
      : coeffs_(std::move(coeffs)),
        n_channels_(n_channels),
        state_(coeffs_.sections.size() * n_channels * 2, 0.0) {
    require(n_channels > 0, "filter needs at least one channel");
  }

  std::size_t n_channels() const { return n_channels_; }
  const SosCoefficients& coefficients() const { return coeffs_; }

  double process_sample(double x, std::size_t channel = 0) {
    double* st = &state_[channel * coeffs_.sections.size() * 2];
    for (const auto& s : coeffs_.sections) {
      const double y = s.b0 * x + st[0];
      st[0] = s.b1 * x - s.a1 * y + st[1];
      st[1] = s.b2 * x - s.a2 * y;
      x = y;
      st += 2;
    }
    return x;
  }

  /// Filters one channel's samples in place.
  void process(std::span<double> samples, std::size_t channel = 0) {
    require(channel < n_channels_, "filter channel out of range");
    for (auto& v : samples) v = process_sample(v, channel);
  }

  /// Filters interleaved frames (row-major, n_channels columns) in place.
  void process_interleaved(std::span<double> frames) {
    require(frames.size() % n_channels_ == 0, "interleaved buffer is not a whole number of frames");
    for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = process_sample(frames[i], i % n_channels_);
  }

  void reset() { std::fill(state_.begin(), state_.end(), 0.0); }

 private:
  SosCoefficients coeffs_;
  std::size_t n_channels_ = 1;
  std::vector<double> state_;
};

/// Streaming band-pass; state carried across calls.
inline SosFilter make_bandpass(double fs, BandSpec band, std::size_t n_channels = 1,
                               int prototype_order = 4) {
  return SosFilter(design_bandpass(fs, band, prototype_order), n_channels);
}

/// Streaming DC/drift removal (2nd-order Butterworth high-pass).
inline SosFilter make_dc_remover(double fs, double cutoff_hz, std::size_t n_channels = 1) {
  return SosFilter(design_highpass(fs, cutoff_hz, 2), n_channels);
}

/// One-shot helpers over a whole buffer, starting from rest.
inline std::vector<double> bandpass(std::span<const double> x, double fs, BandSpec band) {
  std::vector<double> out(x.begin(), x.end());
  auto f = make_bandpass(fs, band);
  f.process(out);
  return out;
}

inline std::vector<double> dc_remove(std::span<const double> x, double fs, double cutoff_hz) {
  std::vector<double> out(x.begin(), x.end());
  auto f = make_dc_remover(fs, cutoff_hz);
  f.process(out);
  return out;
}

}  // namespace tobe::signal
