#include <catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "tobe/synth/ecg.hpp"
#include "tobe/synth/eda.hpp"
#include "tobe/synth/eeg.hpp"
#include "tobe/synth/recording.hpp"
#include "tobe/synth/respiration.hpp"

using namespace tobe;
using namespace tobe::synth;
using namespace tobe::testing;
using Catch::Approx;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("tobe_test_synth_" + name);
}

// Local maxima above half the R amplitude, refractory 200 ms.
std::vector<double> annotate_peaks(const std::vector<double>& x, double fs, double threshold) {
  std::vector<double> t;
  std::size_t last = 0;
  bool any = false;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > threshold && x[i] >= x[i - 1] && x[i] > x[i + 1]) {
      if (any && static_cast<double>(i - last) / fs < 0.2) continue;
      t.push_back(static_cast<double>(i) / fs);
      last = i;
      any = true;
    }
  }
  return t;
}

}  // namespace

TEST_CASE("gen_ecg at constant rate yields rate x time beats", "[synth][ecg]") {
  EcgSpec spec;
  spec.bpm_profile = {{0.0, 60.0}};
  const auto out = gen_ecg(spec, 60.0);
  CHECK(std::abs(static_cast<double>(out.beat_times.size()) - 60.0) <= 1.0);
  CHECK(out.recording.n_samples() == 15000);
  CHECK(out.recording.meta.modality == Modality::ECG);

  // independent annotation of the waveform agrees with the ground truth
  const auto peaks = annotate_peaks(out.recording.channel(0), spec.fs, 500.0);
  REQUIRE(peaks.size() == out.beat_times.size());
  for (std::size_t i = 0; i < peaks.size(); ++i) CHECK(std::abs(peaks[i] - out.beat_times[i]) <= 1.0 / spec.fs);
}

TEST_CASE("gen_ecg with RSA oscillates the IBI at the breathing period", "[synth][ecg]") {
  EcgSpec spec;
  spec.bpm_profile = {{0.0, 70.0}};
  spec.rsa_depth = 5.0;
  spec.rsa_period_s = 10.0;
  const auto beats = gen_ecg(spec, 120.0).beat_times;
  REQUIRE(beats.size() > 100);

  // least-squares fit of instantaneous HR at IBI midpoints to a + b cos + c sin at 0.1 Hz
  std::vector<double> t, hr;
  for (std::size_t i = 1; i < beats.size(); ++i) {
    t.push_back(0.5 * (beats[i] + beats[i - 1]));
    hr.push_back(60.0 / (beats[i] - beats[i - 1]));
  }
  double mean = 0.0;
  for (double v : hr) mean += v;
  mean /= static_cast<double>(hr.size());
  double cc = 0, ss = 0, cs = 0, yc = 0, ys = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double c = std::cos(2 * kPi * t[i] / 10.0), s = std::sin(2 * kPi * t[i] / 10.0);
    cc += c * c;
    ss += s * s;
    cs += c * s;
    yc += (hr[i] - mean) * c;
    ys += (hr[i] - mean) * s;
  }
  const double det = cc * ss - cs * cs;
  const double b = (yc * ss - ys * cs) / det;
  const double c = (ys * cc - yc * cs) / det;
  double resid = 0.0, total = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double fit = b * std::cos(2 * kPi * t[i] / 10.0) + c * std::sin(2 * kPi * t[i] / 10.0);
    resid += (hr[i] - mean - fit) * (hr[i] - mean - fit);
    total += (hr[i] - mean) * (hr[i] - mean);
  }
  CHECK(1.0 - resid / total > 0.9);
  CHECK(std::hypot(b, c) == Approx(5.0).margin(1.0));
  CHECK(mean == Approx(70.0).margin(1.0));
}

TEST_CASE("gen_ecg rejects heart rates outside 30-220 BPM", "[synth][ecg]") {
  EcgSpec spec;
  spec.bpm_profile = {{0.0, 300.0}};
  CHECK_THROWS_AS(gen_ecg(spec, 10.0), ConfigError);
  spec.bpm_profile = {{0.0, 25.0}};
  CHECK_THROWS_AS(gen_ecg(spec, 10.0), ConfigError);
  spec.bpm_profile = {{0.0, 215.0}};
  spec.rsa_depth = 10.0;
  CHECK_THROWS_AS(gen_ecg(spec, 10.0), ConfigError);
  spec.bpm_profile = {{0.0, 60.0}};
  spec.rsa_depth = -1.0;
  CHECK_THROWS_AS(gen_ecg(spec, 10.0), ConfigError);
}

TEST_CASE("generators are bit-identical under a fixed seed", "[synth][determinism]") {
  EcgSpec ecg;
  ecg.noise_uV = 20.0;
  ecg.rsa_depth = 3.0;
  ecg.seed = 42;
  CHECK(gen_ecg(ecg, 20.0).recording.chunks == gen_ecg(ecg, 20.0).recording.chunks);
  ecg.noise_uV = 0.0;
  CHECK(gen_ecg(ecg, 20.0).recording.chunks == gen_ecg(ecg, 20.0).recording.chunks);

  EegSpec eeg;
  eeg.components["*"] = {{10.0, 2.0, 10.0}};
  eeg.coupling = {{{"FP1", "O1"}, 0.5, {7.0, 28.0}, 5.0}};
  eeg.blink_rate_per_min = 12;
  eeg.background_uV = 1.0;
  eeg.seed = 7;
  const auto a = gen_eeg(eeg, 20.0), b = gen_eeg(eeg, 20.0);
  CHECK(a.recording.chunks == b.recording.chunks);
  CHECK(a.blink_times == b.blink_times);
  eeg.seed = 8;
  CHECK_FALSE(gen_eeg(eeg, 20.0).recording.chunks == a.recording.chunks);

  RespirationSpec resp;
  resp.jitter = 0.1;
  resp.seed = 3;
  CHECK(gen_respiration(resp, 60.0).recording.chunks == gen_respiration(resp, 60.0).recording.chunks);
}

TEST_CASE("derive_seed separates users and is stable", "[synth][determinism]") {
  CHECK(derive_seed(1, "alice") == derive_seed(1, "alice"));
  CHECK(derive_seed(1, "alice") != derive_seed(1, "bob"));
  CHECK(derive_seed(1, "alice") != derive_seed(2, "alice"));
}

TEST_CASE("gen_respiration", "[synth][respiration]") {
  SECTION("10 s period over 60 s completes 6 cycles") {
    RespirationSpec spec;
    spec.period_s = 10.0;
    const auto out = gen_respiration(spec, 60.0);
    CHECK(out.cycles == 6);
    // inhale onsets: ground-truth phase wraps
    std::size_t wraps = 0;
    for (std::size_t i = 1; i < out.phase.size(); ++i) wraps += out.phase[i] < out.phase[i - 1];
    CHECK(wraps == 5);
  }

  SECTION("jitter 0 gives a pure sinusoid with its spectral peak at 0.1 Hz") {
    RespirationSpec spec;
    spec.fs = 10.0;
    const auto out = gen_respiration(spec, 100.0);
    const auto x = out.recording.channel(0);
    double best_f = 0.0, best = -1.0;
    for (double f = 0.02; f <= 1.0; f += 0.01) {
      const double a = tone_amplitude(x, f, spec.fs, 0, x.size());
      if (a > best) {
        best = a;
        best_f = f;
      }
    }
    CHECK(best_f == Approx(0.1).margin(1e-9));
    CHECK(best == Approx(0.5).margin(1e-3));  // amplitude 1 peak-to-trough
  }

  SECTION("amplitude 0 is constant") {
    RespirationSpec spec;
    spec.amplitude = 0.0;
    spec.offset = 2.5;
    for (double v : gen_respiration(spec, 20.0).recording.channel(0)) CHECK(v == 2.5);
  }

  SECTION("phase 0 sits at the belt minimum") {
    RespirationSpec spec;
    const auto out = gen_respiration(spec, 30.0);
    const auto x = out.recording.channel(0);
    CHECK(x[0] == Approx(0.0).margin(1e-6));
    CHECK(x[250] == Approx(1.0).margin(1e-6));  // phase 0.5 at 5 s, fs 50
  }

  SECTION("non-positive period is rejected") {
    RespirationSpec spec;
    spec.period_s = 0.0;
    CHECK_THROWS_AS(gen_respiration(spec, 10.0), ConfigError);
  }
}

TEST_CASE("gen_eeg band power matches the component amplitude", "[synth][eeg]") {
  EegSpec spec;
  spec.labels = {"O1"};
  const double A = 10.0;
  spec.components["O1"] = {{10.0, 2.0, A}};
  spec.seed = 11;
  const auto out = gen_eeg(spec, 16.0);
  const auto x = out.recording.channel(0);
  const double fs = spec.fs;
  const double in_band = dft_band_power(x, fs, 8.0, 12.0);
  const double total = dft_band_power(x, fs, 0.0, fs / 2.0);
  CHECK(in_band == Approx(A * A / 2.0).epsilon(0.05));
  CHECK((total - in_band) / total < 0.05);
  CHECK(out.component_power.at("O1") == Approx(A * A / 2.0));
}

TEST_CASE("gen_eeg coupling mixes a shared source", "[synth][eeg]") {
  auto correlation = [](const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ab += a[i] * b[i];
      aa += a[i] * a[i];
      bb += b[i] * b[i];
    }
    return ab / std::sqrt(aa * bb);
  };
  for (const double c : {0.0, 0.5, 1.0}) {
    EegSpec spec;
    spec.coupling = {{{"FP1", "O1"}, c, {7.0, 28.0}, 10.0}};
    spec.seed = 5;
    const auto rec = gen_eeg(spec, 60.0).recording;
    const auto fp1 = rec.channel(metrics::ChannelLayout::index_of("FP1"));
    const auto o1 = rec.channel(metrics::ChannelLayout::index_of("O1"));
    INFO("coupling " << c);
    // correlation of c*s + r*own across channels is c^2
    CHECK(correlation(fp1, o1) == Approx(c * c).margin(0.05));
    CHECK(rms(fp1, 0, fp1.size()) == Approx(10.0 / std::sqrt(2.0)).epsilon(0.05));
  }
}

TEST_CASE("gen_eeg blinks and validation", "[synth][eeg]") {
  EegSpec spec;
  spec.blink_rate_per_min = 12.0;
  spec.seed = 2;
  const auto out = gen_eeg(spec, 60.0);
  CHECK(out.blink_times.size() >= 10);
  const auto fp1 = out.recording.channel(metrics::ChannelLayout::index_of("FP1"));
  const auto o1 = out.recording.channel(metrics::ChannelLayout::index_of("O1"));
  for (double tb : out.blink_times) {
    const auto i = static_cast<std::size_t>(std::llround((tb + 0.1) * spec.fs));
    CHECK(fp1[i] == Approx(80.0));
    CHECK(o1[i] == 0.0);
  }

  EegSpec bad;
  bad.components["O1"] = {{124.0, 4.0, 1.0}};
  CHECK_THROWS_AS(gen_eeg(bad, 1.0), ConfigError);
  bad.components.clear();
  bad.coupling = {{{"FP1"}, 1.5, {7.0, 28.0}, 1.0}};
  CHECK_THROWS_AS(gen_eeg(bad, 1.0), ConfigError);
  bad.coupling.clear();
  bad.components["O1"] = {{10.0, 2.0, -1.0}};
  CHECK_THROWS_AS(gen_eeg(bad, 1.0), ConfigError);
}

TEST_CASE("gen_eda", "[synth][eda]") {
  SECTION("no events is the tonic level") {
    EdaSpec spec;
    spec.tonic_uS = 3.0;
    for (double v : gen_eda(spec, 10.0).channel(0)) CHECK(v == 3.0);
  }

  SECTION("single SCR peaks within rise time after onset") {
    EdaSpec spec;
    spec.tonic_uS = 0.0;
    spec.fs = 100.0;
    spec.events = {{10.0, 2.0, 1.5, 5.0}};
    const auto x = eda_trace(spec, 40.0);
    const auto peak = std::max_element(x.begin(), x.end()) - x.begin();
    const double tp = static_cast<double>(peak) / spec.fs;
    CHECK(tp >= 10.0);
    CHECK(tp <= 10.0 + 1.5 + 0.5);
    CHECK(tp == Approx(11.5).margin(0.02));
    CHECK(x[static_cast<std::size_t>(peak)] == Approx(2.0).epsilon(1e-3));
  }

  SECTION("overlapping SCRs superpose") {
    const ScrEvent a{5.0, 1.0, 1.0, 4.0}, b{6.0, 0.7, 0.8, 3.0};
    EdaSpec both{1.0, {a, b}, 32.0, "eda"};
    EdaSpec only_a{1.0, {a}, 32.0, "eda"};
    EdaSpec only_b{0.0, {b}, 32.0, "eda"};
    const auto xb = eda_trace(both, 20.0), xa = eda_trace(only_a, 20.0), xo = eda_trace(only_b, 20.0);
    for (std::size_t i = 0; i < xb.size(); ++i) CHECK(std::abs(xb[i] - (xa[i] + xo[i])) <= 1e-9);
  }

  SECTION("negative tonic is rejected") {
    EdaSpec spec;
    spec.tonic_uS = -1.0;
    CHECK_THROWS_AS(gen_eda(spec, 1.0), ConfigError);
  }
}

TEST_CASE("recording round trip is exact", "[synth][recording]") {
  EcgSpec spec;
  spec.noise_uV = 15.0;
  spec.seed = 9;
  const auto rec = gen_ecg(spec, 10.0, 1234.5678).recording;
  const auto path = temp_file("roundtrip.csv");
  record_csv(path.string(), rec);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "# tobe-recording v1 name=ecg modality=ECG rate=250 channels=ECG unit=uV");

  const auto back = read_recording(path.string());
  CHECK(back.meta.name == rec.meta.name);
  CHECK(back.meta.channel_labels == rec.meta.channel_labels);
  CHECK(back.meta.nominal_rate == rec.meta.nominal_rate);
  CHECK(back.timestamps() == rec.timestamps());
  CHECK(back.channel(0) == rec.channel(0));

  // multi-channel
  EegSpec eeg;
  eeg.components["*"] = {{10.0, 2.0, 10.0}};
  const auto eeg_rec = gen_eeg(eeg, 3.0).recording;
  record_csv(path.string(), eeg_rec);
  const auto eeg_back = read_recording(path.string());
  CHECK(eeg_back.meta.channel_labels == eeg_rec.meta.channel_labels);
  for (std::size_t ch = 0; ch < 8; ++ch) CHECK(eeg_back.channel(ch) == eeg_rec.channel(ch));
  std::filesystem::remove(path);
}

TEST_CASE("replay paces to the requested speed", "[synth][recording]") {
  RespirationSpec spec;
  spec.fs = 20.0;
  const auto path = temp_file("pace.csv");
  record_csv(path.string(), gen_respiration(spec, 10.0).recording);

  const auto start = std::chrono::steady_clock::now();
  Replayer r(path.string(), 2.0);
  std::size_t n = 0;
  while (auto c = r.next()) n += c->n_samples();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(n == 200);
  // 10 s of samples (last stamp at 9.95 s) at 2x
  CHECK(elapsed == Approx(5.0).margin(0.25));

  const auto fast_start = std::chrono::steady_clock::now();
  Replayer fast(path.string(), 0.0);
  while (fast.next()) {
  }
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - fast_start).count() < 0.5);
  CHECK_THROWS_AS(Replayer(path.string(), -1.0), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("malformed recordings name the offending line", "[synth][recording]") {
  const auto path = temp_file("bad.csv");
  auto write = [&](const std::vector<std::string>& lines) {
    std::ofstream out(path);
    for (const auto& l : lines) out << l << '\n';
  };
  auto error_of = [&]() -> std::string {
    try {
      read_recording(path.string());
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  const std::string header = "# tobe-recording v1 name=x modality=RESP rate=10 channels=a;b unit=au";

  SECTION("decreasing timestamp on line 42") {
    std::vector<std::string> lines{header};
    for (int i = 0; i < 45; ++i) {
      const double t = (lines.size() + 1 == 42) ? 0.5 : i * 0.1;
      lines.push_back(std::to_string(t) + ",1,2");
    }
    write(lines);
    const auto msg = error_of();
    CHECK_THAT(msg, Catch::Matchers::ContainsSubstring("line 42"));
    CHECK_THAT(msg, Catch::Matchers::ContainsSubstring("timestamp"));
  }

  SECTION("wrong column count") {
    write({header, "0,1,2", "0.1,1"});
    CHECK_THAT(error_of(), Catch::Matchers::ContainsSubstring("line 3"));
    write({header, "0,1,2", "0.1,1,2,3"});
    CHECK_THAT(error_of(), Catch::Matchers::ContainsSubstring("line 3"));
  }

  SECTION("non-numeric value") {
    write({header, "0,1,2", "0.1,1,2", "0.2,abc,2"});
    CHECK_THAT(error_of(), Catch::Matchers::ContainsSubstring("line 4"));
  }

  SECTION("bad header") {
    write({"timestamp,a,b", "0,1,2"});
    CHECK_THAT(error_of(), Catch::Matchers::ContainsSubstring("line 1"));
    write({"# tobe-recording v1 name=x modality=FOO rate=10 channels=a unit=au"});
    CHECK_THAT(error_of(), Catch::Matchers::ContainsSubstring("modality"));
  }
  std::filesystem::remove(path);
}
