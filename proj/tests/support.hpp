#pragma once

// Test-only oracles and generators. Nothing here calls into the library's
// spectral code, so the checks stay independent of the implementation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace tobe::testing {

inline constexpr double kPi = std::numbers::pi;

inline std::vector<double> sine(double f_hz, double fs, double duration_s, double amplitude = 1.0,
                                double phase = 0.0, double offset = 0.0) {
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = offset + amplitude * std::sin(2.0 * kPi * f_hz * static_cast<double>(i) / fs + phase);
  return x;
}

inline std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sigma);
  std::vector<double> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

/// Amplitude of the `f_hz` component over x[begin, end) by direct correlation
/// with sine and cosine (naive single-bin DFT). Exact for integer cycles.
inline double tone_amplitude(const std::vector<double>& x, double f_hz, double fs,
                             std::size_t begin, std::size_t end) {
  std::complex<double> acc{};
  for (std::size_t i = begin; i < end; ++i)
    acc += x[i] * std::polar(1.0, -2.0 * kPi * f_hz * static_cast<double>(i) / fs);
  return 2.0 * std::abs(acc) / static_cast<double>(end - begin);
}

inline double rms(const std::vector<double>& x, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(end - begin));
}

/// Brute-force periodogram band power: sum over DFT bins of |X|^2 scaled so a
/// unit-amplitude sine contributes 0.5 (rectangular window, whole record).
inline double dft_band_power(const std::vector<double>& x, double fs, double lo, double hi) {
  const std::size_t n = x.size();
  double p = 0.0;
  for (std::size_t k = 1; 2 * k < n; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    if (f < lo || f > hi) continue;
    std::complex<double> acc{};
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::polar(1.0, -2.0 * kPi * static_cast<double>(k * i) / static_cast<double>(n));
    p += 2.0 * std::norm(acc) / static_cast<double>(n * n);
  }
  return p;
}

/// Spearman rank correlation (no ties expected).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto l, auto r) { return v[l] < v[r]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

/// Rotates every positive-frequency DFT bin by `theta` (and negative bins by
/// -theta): Re(exp(i theta) * analytic(x)) via a naive O(n^2) DFT.
inline std::vector<double> phase_shift(const std::vector<double>& x, double theta) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> X(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      X[k] += x[i] * std::polar(1.0, -2.0 * kPi * static_cast<double>((k * i) % n) / static_cast<double>(n));
  for (std::size_t k = 1; k < n; ++k) {
    if (2 * k < n) X[k] *= std::polar(1.0, theta);
    else if (2 * k > n) X[k] *= std::polar(1.0, -theta);
  }
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::complex<double> acc{};
    for (std::size_t k = 0; k < n; ++k)
      acc += X[k] * std::polar(1.0, 2.0 * kPi * static_cast<double>((k * i) % n) / static_cast<double>(n));
    y[i] = acc.real() / static_cast<double>(n);
  }
  return y;
}

}  // namespace tobe::testing
