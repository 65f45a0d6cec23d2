#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "tobe/core.hpp"
#include "tobe/signal/fft.hpp"
#include "tobe/signal/iir.hpp"
#include "tobe/signal/window.hpp"

namespace tobe::signal {

/// Analytic signal of `x` restricted to `band`, computed in one FFT pass:
/// positive-frequency bins inside the band are doubled, everything else
/// (negative frequencies, DC, out-of-band) is zeroed.
inline std::vector<std::complex<double>> band_analytic_signal(std::span<const double> x, double fs,
                                                              BandSpec band) {
  band.validate(fs);
  const std::size_t n = x.size();
  require(n >= 2, "analytic signal needs at least 2 samples");
  auto spec = fft(x);
  const double df = fs / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = static_cast<double>(k) * df;
    const bool positive = k > 0 && 2 * k < n;
    spec[k] *= (positive && f >= band.low_hz && f <= band.high_hz) ? 2.0 : 0.0;
  }
  return ifft(spec);
}

/// Phase locking value |<exp(i(phi_a - phi_b))>| between two single-channel
/// signals in `band`. Samples where either analytic amplitude vanishes are
/// skipped; with no usable sample the result is 0.
inline double plv(std::span<const double> a, std::span<const double> b, double fs, BandSpec band) {
  require(a.size() == b.size(), "phase locking inputs must have equal length");
  const auto za = band_analytic_signal(a, fs, band);
  const auto zb = band_analytic_signal(b, fs, band);
  std::complex<double> acc{};
  std::size_t used = 0;
  for (std::size_t i = 0; i < za.size(); ++i) {
    if (za[i] == 0.0 || zb[i] == 0.0) continue;
    acc += std::polar(1.0, std::arg(za[i]) - std::arg(zb[i]));
    ++used;
  }
  if (used == 0) return 0.0;
  return std::min(1.0, std::abs(acc / static_cast<double>(used)));
}

inline double plv(const Window& a, const Window& b, BandSpec band, std::size_t ch_a = 0,
                  std::size_t ch_b = 0) {
  a.validate();
  b.validate();
  require(a.n_samples == b.n_samples, "phase locking windows must have equal length");
  require(a.fs == b.fs, "phase locking windows must share a sampling rate");
  return plv(a.channel(ch_a), b.channel(ch_b), a.fs, band);
}

}  // namespace tobe::signal
