#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "support.hpp"
#include "tobe/signal/iir.hpp"
#include "tobe/signal/normalizer.hpp"
#include "tobe/signal/phase.hpp"
#include "tobe/signal/spectral.hpp"
#include "tobe/signal/window.hpp"

using namespace tobe;
using namespace tobe::signal;
using namespace tobe::testing;
using Catch::Approx;

TEST_CASE("bandpass passes in-band tones and rejects out-of-band ones", "[signal][bandpass]") {
  const double fs = 250.0;
  const BandSpec alpha{8.0, 12.0};

  SECTION("10 Hz through 8-12 Hz keeps >= 0.9 of the amplitude") {
    const auto x = sine(10.0, fs, 10.0);
    const auto y = bandpass(x, fs, alpha);
    // skip the first 2 s of transient, measure over 8 s (80 whole cycles)
    const double ratio = tone_amplitude(y, 10.0, fs, 500, 2500) / tone_amplitude(x, 10.0, fs, 500, 2500);
    CHECK(ratio >= 0.9);
    CHECK(rms(y, 500, 2500) >= 0.9 * rms(x, 500, 2500));
  }

  SECTION("40 Hz through 8-12 Hz is reduced below 0.1") {
    const auto x = sine(40.0, fs, 10.0);
    const auto y = bandpass(x, fs, alpha);
    CHECK(rms(y, 500, 2500) <= 0.1 * rms(x, 500, 2500));
  }

  SECTION("zero in, zero out") {
    const std::vector<double> x(1000, 0.0);
    for (double v : bandpass(x, fs, alpha)) CHECK(v == 0.0);
  }

  SECTION("every metric band attenuates >= 20 dB one octave outside") {
    for (const auto band : {bands::kBeta, bands::kThetaLowAlpha, bands::kDeltaTheta,
                            bands::kWideAlpha, bands::kAlphaBeta, bands::kAlpha}) {
      for (const double f : {band.low_hz / 2.0, band.high_hz * 2.0}) {
        if (f >= fs / 2.0) continue;
        const auto x = sine(f, fs, 40.0);
        const auto y = bandpass(x, fs, band);
        const std::size_t begin = 2500;  // 10 s settle for the lowest bands
        const double gain = tone_amplitude(y, f, fs, begin, x.size()) / tone_amplitude(x, f, fs, begin, x.size());
        INFO("band " << band.low_hz << "-" << band.high_hz << " at " << f << " Hz");
        CHECK(20.0 * std::log10(gain) <= -20.0);
      }
    }
  }

  SECTION("band beyond Nyquist is a configuration error") {
    CHECK_THROWS_AS(design_bandpass(fs, BandSpec{100.0, 130.0}), ConfigError);
    CHECK_THROWS_AS(design_bandpass(fs, BandSpec{12.0, 8.0}), ConfigError);
  }
}

TEST_CASE("bandpass is linear and chunking-invariant", "[signal][bandpass][property]") {
  const double fs = 128.0;
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = white_noise(1024, 100 + trial);
    const auto y = white_noise(1024, 200 + trial);
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    const double a = coef(rng), b = coef(rng);
    std::vector<double> mix(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * y[i];
    const auto fx = bandpass(x, fs, bands::kAlphaBeta);
    const auto fy = bandpass(y, fs, bands::kAlphaBeta);
    const auto fm = bandpass(mix, fs, bands::kAlphaBeta);
    double scale = 0.0, err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      scale = std::max(scale, std::abs(fm[i]));
      err = std::max(err, std::abs(fm[i] - (a * fx[i] + b * fy[i])));
    }
    CHECK(err <= 1e-6 * scale);

    // random chunk boundaries
    auto f = make_bandpass(fs, bands::kAlphaBeta);
    std::vector<double> chunked(x);
    std::uniform_int_distribution<std::size_t> len(1, 97);
    for (std::size_t pos = 0; pos < chunked.size();) {
      const std::size_t n = std::min(len(rng), chunked.size() - pos);
      f.process(std::span(chunked).subspan(pos, n));
      pos += n;
    }
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(chunked[i] - fx[i]) <= 1e-6);
  }
}

TEST_CASE("dc_remove rejects offsets and keeps content", "[signal][dc]") {
  const double fs = 250.0;

  SECTION("constant 100 uV settles below 1 uV") {
    const std::vector<double> x(250 * 30, 100.0);
    const auto y = dc_remove(x, fs, 0.5);
    for (std::size_t i = 250 * 20; i < y.size(); ++i) CHECK(std::abs(y[i]) < 1.0);
  }

  SECTION("10 Hz sine with a 50 uV offset") {
    const auto x = sine(10.0, fs, 30.0, 20.0, 0.0, 50.0);
    const auto y = dc_remove(x, fs, 0.5);
    const std::size_t begin = 250 * 20, end = y.size();
    const double gain_db = 20.0 * std::log10(tone_amplitude(y, 10.0, fs, begin, end) / 20.0);
    CHECK(std::abs(gain_db) <= 1.0);
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += y[i];
    mean /= static_cast<double>(end - begin);
    CHECK(std::abs(mean) < 0.5);  // -40 dB of 50 uV
  }

  SECTION("zero in, zero out; invalid cutoff rejected") {
    for (double v : dc_remove(std::vector<double>(100, 0.0), fs, 0.5)) CHECK(v == 0.0);
    CHECK_THROWS_AS(make_dc_remover(fs, 0.0), ConfigError);
    CHECK_THROWS_AS(make_dc_remover(fs, 130.0), ConfigError);
  }
}

TEST_CASE("common average reference", "[signal][car]") {
  CHECK(common_average_reference(std::vector<double>{1, 2, 3}) == std::vector<double>{-1, 0, 1});
  CHECK(common_average_reference(std::vector<double>{5, 5, 5, 5}) == std::vector<double>{0, 0, 0, 0});
  CHECK_THROWS_AS(common_average_reference(std::vector<double>{1.0}), ContractError);

  SECTION("zero-sum and idempotent on random frames") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-500.0, 500.0);
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<double> frame(2 + trial % 14);
      for (auto& v : frame) v = d(rng);
      const auto once = common_average_reference(frame);
      double sum = 0.0;
      for (double v : once) sum += v;
      CHECK(std::abs(sum) <= 1e-9);
      const auto twice = common_average_reference(once);
      for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == Approx(once[i]).margin(1e-9));
    }
  }
}

TEST_CASE("band_log_power", "[signal][power]") {
  const double fs = 250.0;

  SECTION("sine power matches A^2/2") {
    for (const double amp : {1.0, 10.0, 37.5}) {
      const auto w = Window::from_channel(sine(10.0, fs, 10.0, amp), fs);
      const double lp = band_log_power(w, bands::kAlpha)[0];
      const auto x = sine(10.0, fs, 10.0, amp);
      // closed form, cross-checked with a brute-force periodogram
      CHECK(std::log(dft_band_power(x, fs, 8.0, 12.0)) == Approx(std::log(amp * amp / 2.0)).margin(1e-6));
      CHECK(lp == Approx(std::log(amp * amp / 2.0)).margin(0.2));
    }
  }

  SECTION("doubling amplitude adds log(4)") {
    const auto w1 = Window::from_channel(sine(10.3, fs, 4.0, 3.0, 0.4), fs);
    const auto w2 = Window::from_channel(sine(10.3, fs, 4.0, 6.0, 0.4), fs);
    CHECK(band_log_power(w2, bands::kAlpha)[0] - band_log_power(w1, bands::kAlpha)[0] ==
          Approx(std::log(4.0)).margin(0.05));
  }

  SECTION("white noise: equal-width bands agree within estimator variance") {
    // Monte-Carlo oracle: the difference is unbiased and its spread over 10 s
    // windows stays inside +/-0.3.
    const int trials = 200;
    double sum = 0.0, sum2 = 0.0;
    for (int t = 0; t < trials; ++t) {
      const auto w = Window::from_channel(white_noise(2500, 1000 + t), fs);
      const double d = band_log_power(w, BandSpec{8, 12})[0] - band_log_power(w, BandSpec{16, 20})[0];
      sum += d;
      sum2 += d * d;
    }
    const double mean = sum / trials;
    const double sd = std::sqrt(sum2 / trials - mean * mean);
    CHECK(std::abs(mean) < 0.05);
    CHECK(sd <= 0.3);
  }

  SECTION("window shorter than two cycles of the low edge") {
    const auto w = Window::from_channel(sine(5.0, fs, 1.0), fs);
    CHECK_THROWS_AS(band_log_power(w, bands::kDeltaTheta), ContractError);
  }

  SECTION("silent channel stays finite") {
    const auto w = Window::from_channel(std::vector<double>(500, 0.0), fs);
    CHECK(band_log_power(w, bands::kAlpha)[0] == Approx(std::log(kPowerFloor)));
  }

  SECTION("out-of-band component one octave away barely moves the estimate") {
    auto x = sine(10.0, fs, 10.0, 5.0);
    const auto far = sine(24.0, fs, 10.0, 5.0, 1.1);
    const double base = band_log_power(Window::from_channel(x, fs), bands::kAlpha)[0];
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += far[i];
    CHECK(band_log_power(Window::from_channel(x, fs), bands::kAlpha)[0] == Approx(base).margin(0.1));
  }
}

TEST_CASE("phase locking value", "[signal][plv]") {
  const double fs = 128.0;

  SECTION("identical signals lock exactly") {
    const auto x = white_noise(1280, 5);
    CHECK(plv(x, x, fs, bands::kAlphaBeta) == 1.0);
  }

  SECTION("constant lag of pi/3 still locks") {
    const auto a = sine(10.0, fs, 10.0, 1.0, 0.0);
    const auto b = sine(10.0, fs, 10.0, 1.0, kPi / 3.0);
    CHECK(plv(a, b, fs, bands::kAlphaBeta) == Approx(1.0).margin(0.02));
  }

  SECTION("independent noise is below 0.2 in >= 95% of 1000 trials") {
    int low = 0;
    for (int t = 0; t < 1000; ++t) {
      const auto a = white_noise(1280, 10'000 + 2 * t);
      const auto b = white_noise(1280, 10'001 + 2 * t);
      const double v = plv(a, b, fs, bands::kAlphaBeta);
      CHECK((v >= 0.0 && v <= 1.0));
      if (v < 0.2) ++low;
    }
    CHECK(low >= 950);
  }

  SECTION("length mismatch") {
    CHECK_THROWS_AS(plv(std::vector<double>(100), std::vector<double>(99), fs, bands::kAlphaBeta),
                    ContractError);
  }

  SECTION("global phase shift leaves the value unchanged") {
    const auto a = white_noise(1280, 77);
    auto b = white_noise(1280, 78);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.7 * a[i] + 0.3 * b[i];
    const double v = plv(a, b, fs, bands::kAlphaBeta);
    std::vector<double> a2(a), b2(b);
    for (auto& s : a2) s = -s;  // pi shift of every component
    for (auto& s : b2) s = -s;
    CHECK(plv(a2, b2, fs, bands::kAlphaBeta) == Approx(v).margin(1e-12));
  }
}

TEST_CASE("magnitude-squared coherence", "[signal][msc]") {
  const double fs = 4.0;
  const auto band = bands::kCardiacCoherence;

  SECTION("affine map is fully coherent") {
    for (int t = 0; t < 20; ++t) {
      const auto x = white_noise(40, 300 + t);
      std::vector<double> y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2.0 * x[i] + 1.0;
      CHECK(msc(x, y, fs, band) == Approx(1.0).margin(0.01));
    }
  }

  SECTION("independent noise vs a breathing-like sinusoid stays below 0.45") {
    int low = 0;
    const int trials = 1000;
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    for (int t = 0; t < trials; ++t) {
      const auto x = sine(0.1, fs, 10.0, 1.0, phase(rng));
      const double v = msc(x, white_noise(40, 5000 + t), fs, band);
      CHECK((v >= 0.0 && v <= 1.0));
      if (v < 0.45) ++low;
    }
    CHECK(low >= trials * 95 / 100);
  }

  SECTION("pure delay preserves coherence once 0.1 Hz is resolved") {
    const auto x = sine(0.1, fs, 120.0);
    const auto y = sine(0.1, fs, 120.0, 1.0, -2.0 * kPi * 0.1 * 1.0);
    CHECK(msc(x, y, fs, BandSpec{0.05, 0.3}, CoherenceConfig{20.0, 0.5}) == Approx(1.0).margin(0.02));
  }

  SECTION("fewer than two segments is a contract error") {
    CHECK_THROWS_AS(msc(white_noise(16, 1), white_noise(16, 2), fs, band), ContractError);
    CHECK_THROWS_AS(msc(white_noise(40, 1), white_noise(39, 2), fs, band), ContractError);
  }

  SECTION("constant input has no coherent bin") {
    const std::vector<double> c(40, 70.0);
    CHECK(msc(c, white_noise(40, 9), fs, band) == 0.0);
  }
}

TEST_CASE("sliding windows", "[signal][windows]") {
  const double fs = 100.0;
  CHECK(sliding_windows(std::vector<double>(1000), fs, 10.0, 10.0).size() == 1);
  CHECK(sliding_windows(std::vector<double>(1000), fs, 2.0, 1.0).size() == 9);
  CHECK(sliding_windows(std::vector<double>(150), fs, 2.0, 1.0).empty());

  SECTION("window start times advance by the hop") {
    const auto ws = sliding_windows(std::vector<double>(1000), fs, 2.0, 1.0, 5.0);
    for (std::size_t i = 0; i < ws.size(); ++i) CHECK(ws[i].t_start == Approx(5.0 + static_cast<double>(i)));
  }

  SECTION("invalid hop") {
    CHECK_THROWS_AS(SlidingWindower(fs, 1, 2.0, 3.0), ConfigError);
    CHECK_THROWS_AS(SlidingWindower(fs, 1, 2.0, 0.0), ConfigError);
  }
}

TEST_CASE("normalizer", "[signal][normalizer]") {
  auto fixed = Normalizer::fixed(0.0, 10.0);
  CHECK(fixed(5.0, 0.0) == 0.5);
  CHECK(fixed(15.0, 0.0) == 1.0);
  CHECK(fixed(-3.0, 0.0) == 0.0);
  CHECK_THROWS_AS(Normalizer::fixed(1.0, 1.0), ConfigError);

  SECTION("rolling min-max with constant input reads 0.5") {
    auto r = Normalizer::rolling(60.0);
    double out = -1.0;
    for (int t = 0; t <= 60; ++t) out = r(3.0, t);
    CHECK(out == 0.5);
  }

  SECTION("rolling extremes saturate, window forgets") {
    auto r = Normalizer::rolling(10.0);
    CHECK(r(0.0, 0.0) == 0.5);
    CHECK(r(10.0, 1.0) == 1.0);
    CHECK(r(0.0, 2.0) == 0.0);
    CHECK(r(5.0, 3.0) == Approx(0.5));
    // by t=20 only the value 5 at t=3 has expired; 7 and 9 remain
    r(7.0, 15.0);
    CHECK(r(9.0, 20.0) == 1.0);
  }

  SECTION("logistic is centered") {
    auto l = Normalizer::logistic(0.0, 2.0);
    CHECK(l(0.0, 0.0) == 0.5);
    CHECK(l(100.0, 0.0) == 1.0);
  }

  SECTION("output always in [0,1]") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> d(0.0, 100.0);
    auto r = Normalizer::rolling(5.0);
    auto l = Normalizer::logistic(1.0, 0.3);
    for (int i = 0; i < 2000; ++i) {
      const double v = d(rng);
      const double a = r(v, i * 0.1), b = l(v, 0.0), c = fixed(v, 0.0);
      CHECK((a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0 && c >= 0.0 && c <= 1.0));
    }
  }
}

// Two independent noise series over a single 10 s window: the MSC null
// distribution near 0.1-0.3 Hz has only ~3 effective degrees of freedom, so
// the value exceeds 0.45 in roughly a quarter of trials. The < 0.45 in 95%
// bound is not reachable by any Welch setting that still separates 0.1 Hz
// from 0.25 Hz; kept here as a documented expected failure.
TEST_CASE("msc: two independent noise series below 0.45 in 95% of trials", "[signal][msc][!shouldfail]") {
  int low = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t)
    if (msc(white_noise(40, 5000 + 2 * t), white_noise(40, 5001 + 2 * t), 4.0,
            bands::kCardiacCoherence) < 0.45)
      ++low;
  CHECK(low >= trials * 95 / 100);
}
