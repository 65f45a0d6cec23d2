#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "tobe/core.hpp"
#include "tobe/signal/fft.hpp"
#include "tobe/signal/iir.hpp"
#include "tobe/signal/window.hpp"

namespace tobe::signal {

/// Periodic Hann window (the Welch convention).
inline std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  return w;
}

struct WelchConfig {
  double segment_s = 2.0;
  double overlap = 0.5;  // fraction of a segment shared with the next one
};

namespace detail {

struct Segmentation {
  std::size_t length = 0;
  std::size_t hop = 0;
  std::size_t count = 0;
};

inline Segmentation segment(std::size_t n, double fs, WelchConfig cfg) {
  Segmentation s;
  s.length = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(cfg.segment_s * fs)));
  s.length = std::max<std::size_t>(s.length, 2);
  s.hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(s.length) * (1.0 - cfg.overlap))));
  s.count = n < s.length ? 0 : (n - s.length) / s.hop + 1;
  return s;
}

// Mean-removed, Hann-tapered spectrum of every segment.
inline std::vector<std::vector<std::complex<double>>> segment_spectra(std::span<const double> x,
                                                                      const Segmentation& seg,
                                                                      const std::vector<double>& w) {
  std::vector<std::vector<std::complex<double>>> out;
  out.reserve(seg.count);
  std::vector<std::complex<double>> buf(seg.length);
  for (std::size_t k = 0; k < seg.count; ++k) {
    const auto part = x.subspan(k * seg.hop, seg.length);
    double mean = 0.0;
    for (double v : part) mean += v;
    mean /= static_cast<double>(seg.length);
    for (std::size_t i = 0; i < seg.length; ++i) buf[i] = (part[i] - mean) * w[i];
    out.push_back(fft(buf));
  }
  return out;
}

}  // namespace detail

/// One-sided power spectral density (units^2/Hz).
struct Psd {
  std::vector<double> freqs_hz;
  std::vector<double> density;
  double df = 0.0;

  /// Integrated power over bins whose center lies inside [low, high].
  double band_power(BandSpec band) const {
    double p = 0.0;
    for (std::size_t i = 0; i < freqs_hz.size(); ++i)
      if (freqs_hz[i] >= band.low_hz && freqs_hz[i] <= band.high_hz) p += density[i] * df;
    return p;
  }
};

/// Welch-averaged PSD with Hann segments and per-segment mean removal.
/// A window shorter than one segment is analysed as a single segment.
inline Psd welch_psd(std::span<const double> x, double fs, WelchConfig cfg = {}) {
  require(x.size() >= 2, "Welch estimate needs at least 2 samples");
  require(fs > 0.0, "sampling rate must be positive");
  const auto seg = detail::segment(x.size(), fs, cfg);
  const auto w = hann(seg.length);
  double wss = 0.0;
  for (double v : w) wss += v * v;
  const auto spectra = detail::segment_spectra(x, seg, w);

  const std::size_t n_bins = seg.length / 2 + 1;
  Psd psd;
  psd.df = fs / static_cast<double>(seg.length);
  psd.freqs_hz.resize(n_bins);
  psd.density.assign(n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b) psd.freqs_hz[b] = static_cast<double>(b) * psd.df;
  for (const auto& X : spectra)
    for (std::size_t b = 0; b < n_bins; ++b) psd.density[b] += std::norm(X[b]);
  const double scale = 1.0 / (fs * wss * static_cast<double>(spectra.size()));
  for (std::size_t b = 0; b < n_bins; ++b) {
    psd.density[b] *= scale;
    const bool unpaired = b == 0 || (seg.length % 2 == 0 && b == n_bins - 1);
    if (!unpaired) psd.density[b] *= 2.0;
  }
  return psd;
}

inline constexpr double kPowerFloor = 1e-12;

/// Natural log of band power per selected channel. Power is floored at 1e-12
/// before the log so silent channels stay finite.
inline std::vector<double> band_log_power(const Window& window, BandSpec band,
                                          std::span<const std::size_t> channels,
                                          WelchConfig cfg = {}) {
  window.validate();
  band.validate(window.fs);
  require(window.duration() + 1e-9 >= 2.0 / band.low_hz,
          "window shorter than two cycles of the band's low edge");
  std::vector<double> out;
  out.reserve(channels.size());
  for (std::size_t ch : channels) {
    const auto x = window.channel(ch);
    const double p = welch_psd(x, window.fs, cfg).band_power(band);
    out.push_back(std::log(std::max(p, kPowerFloor)));
  }
  return out;
}

inline std::vector<double> band_log_power(const Window& window, BandSpec band,
                                          WelchConfig cfg = {}) {
  std::vector<std::size_t> all(window.n_channels);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return band_log_power(window, band, all, cfg);
}

/// Settings for magnitude-squared coherence over short windows.
struct CoherenceConfig {
  double segment_s = 4.0;
  double overlap = 0.75;
};

/// Welch magnitude-squared coherence |Pxy|^2 / (Pxx Pyy), maximised over the
/// bins inside `band`. Bins where either auto-spectrum vanishes contribute 0.
inline double msc(std::span<const double> x, std::span<const double> y, double fs, BandSpec band,
                  CoherenceConfig cfg = {}) {
  require(x.size() == y.size(), "coherence inputs must have equal length");
  require(fs > 0.0, "sampling rate must be positive");
  require(band.low_hz >= 0.0 && band.low_hz < band.high_hz && band.high_hz <= fs / 2.0,
          "coherence band outside [0, fs/2]");
  const auto seg = detail::segment(x.size(), fs, {cfg.segment_s, cfg.overlap});
  require(seg.count >= 2 && seg.length < x.size(),
          "coherence needs at least 2 Welch segments (a single segment is identically 1)");
  const auto w = hann(seg.length);
  const auto sx = detail::segment_spectra(x, seg, w);
  const auto sy = detail::segment_spectra(y, seg, w);
  const double df = fs / static_cast<double>(seg.length);

  // Spectral energy below this fraction of the raw signal energy is rounding
  // residue (e.g. a constant after mean removal) and is treated as absent.
  const auto raw_energy = [&](std::span<const double> v) {
    double e = 0.0;
    for (double s : v) e += s * s;
    return e * static_cast<double>(seg.length * seg.count) / static_cast<double>(v.size());
  };
  const double floor_x = 1e-20 * raw_energy(x);
  const double floor_y = 1e-20 * raw_energy(y);

  double best = 0.0;
  for (std::size_t b = 0; b <= seg.length / 2; ++b) {
    const double f = static_cast<double>(b) * df;
    if (f < band.low_hz || f > band.high_hz) continue;
    std::complex<double> pxy{};
    double pxx = 0.0, pyy = 0.0;
    for (std::size_t k = 0; k < seg.count; ++k) {
      pxy += sx[k][b] * std::conj(sy[k][b]);
      pxx += std::norm(sx[k][b]);
      pyy += std::norm(sy[k][b]);
    }
    if (pxx <= floor_x || pyy <= floor_y || pxx == 0.0 || pyy == 0.0) continue;
    best = std::max(best, std::clamp(std::norm(pxy) / (pxx * pyy), 0.0, 1.0));
  }
  return best;
}

inline double msc(const Window& x, const Window& y, BandSpec band, CoherenceConfig cfg = {}) {
  require(x.n_channels == 1 && y.n_channels == 1, "coherence takes single-channel windows");
  require(x.fs == y.fs, "coherence inputs must share a sampling rate");
  return msc(x.data, y.data, x.fs, band, cfg);
}

}  // namespace tobe::signal
