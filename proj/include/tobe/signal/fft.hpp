#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace tobe::signal {

namespace detail {

// FFTW's planner is not thread-safe; execution on distinct arrays is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {}
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
};

struct ComplexPlan {
  ComplexPlan(std::size_t n, int sign) : in(n), out(n) {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(n), in.data, out.data, sign, FFTW_ESTIMATE);
  }
  ~ComplexPlan() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  ComplexPlan(const ComplexPlan&) = delete;
  ComplexPlan& operator=(const ComplexPlan&) = delete;

  FftwBuffer in;
  FftwBuffer out;
  fftw_plan plan;
};

inline ComplexPlan& cached_plan(std::size_t n, int sign) {
  thread_local std::map<std::pair<std::size_t, int>, std::unique_ptr<ComplexPlan>> cache;
  auto& slot = cache[{n, sign}];
  if (!slot) slot = std::make_unique<ComplexPlan>(n, sign);
  return *slot;
}

inline std::vector<std::complex<double>> run(std::span<const std::complex<double>> x, int sign) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  auto& p = cached_plan(n, sign);
  static_assert(sizeof(fftw_complex) == sizeof(std::complex<double>));
  std::memcpy(p.in.data, x.data(), n * sizeof(fftw_complex));
  fftw_execute(p.plan);
  std::vector<std::complex<double>> out(n);
  std::memcpy(out.data(), p.out.data, n * sizeof(fftw_complex));
  return out;
}

}  // namespace detail

/// Unnormalized forward DFT: X[k] = sum_n x[n] e^{-2 pi i k n / N}.
inline std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x) {
  return detail::run(x, FFTW_FORWARD);
}

inline std::vector<std::complex<double>> fft(std::span<const double> x) {
  std::vector<std::complex<double>> c(x.begin(), x.end());
  return fft(c);
}

/// Inverse DFT scaled by 1/N, so ifft(fft(x)) == x.
inline std::vector<std::complex<double>> ifft(std::span<const std::complex<double>> x) {
  auto out = detail::run(x, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(x.size());
  for (auto& v : out) v *= scale;
  return out;
}

}  // namespace tobe::signal
