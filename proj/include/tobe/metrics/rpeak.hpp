#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "tobe/metrics/types.hpp"
#include "tobe/signal/iir.hpp"

namespace tobe::metrics {

/// Streaming QRS detector: band-pass 5-15 Hz, five-point derivative,
/// squaring, 150 ms moving-window integration and an adaptive two-level
/// threshold with searchback. The R peak is then located on the raw signal.
class RPeakDetector {
 public:
  struct Quality {
    bool saturated = false;              // clipping seen within the last second
    std::size_t saturation_episodes = 0;
    std::size_t suppressed = 0;          // candidate beats dropped because of clipping
  };

  explicit RPeakDetector(double fs)
      : fs_(fs),
        bp_(signal::design_bandpass(fs, {5.0, 15.0}, 2)),
        mwi_len_(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.15 * fs)))),
        learn_n_(static_cast<std::size_t>(std::llround(2.0 * fs))),
        keep_n_(static_cast<std::size_t>(std::llround(4.0 * fs))),
        refractory_s_(0.25),
        search_n_(static_cast<std::size_t>(std::llround(0.3 * fs))),
        sat_n_(std::max<std::size_t>(3, static_cast<std::size_t>(std::llround(0.05 * fs)))) {
    require_config(fs >= 100.0, "R-peak detection needs fs >= 100 Hz");
  }

  double fs() const { return fs_; }
  const Quality& quality() const { return quality_; }

  std::vector<BeatEvent> push(double t, double x) {
    std::vector<BeatEvent> out;
    step(t, x, out);
    return out;
  }

  std::vector<BeatEvent> push(std::span<const double> ts, std::span<const double> xs) {
    require(ts.size() == xs.size(), "timestamp and sample counts differ");
    std::vector<BeatEvent> out;
    for (std::size_t i = 0; i < xs.size(); ++i) step(ts[i], xs[i], out);
    return out;
  }

 private:
  struct Peak {
    std::size_t idx;
    double m;
  };

  void step(double t, double x, std::vector<BeatEvent>& out) {
    const std::size_t idx = n_++;
    raw_.push_back(x);
    ts_.push_back(t);
    while (raw_.size() > keep_n_) {
      raw_.pop_front();
      ts_.pop_front();
      ++base_;
    }
    track_saturation(idx, x);

    const double b = bp_.process_sample(x);
    const double d = (2.0 * b + d_[0] - d_[2] - 2.0 * d_[3]) / 8.0;
    d_[3] = d_[2];
    d_[2] = d_[1];
    d_[1] = d_[0];
    d_[0] = b;
    mwi_q_.push_back(d * d);
    mwi_sum_ += d * d;
    if (mwi_q_.size() > mwi_len_) {
      mwi_sum_ -= mwi_q_.front();
      mwi_q_.pop_front();
    }
    const double m = std::max(0.0, mwi_sum_ / static_cast<double>(mwi_len_));

    if (idx < learn_n_) {
      learn_.push_back(m);
      if (idx + 1 == learn_n_) {
        // thresholds from the learning phase, then detect over it retrospectively
        spki_ = *std::max_element(learn_.begin(), learn_.end()) / 3.0;
        npki_ = 0.5 * std::accumulate(learn_.begin(), learn_.end(), 0.0) / static_cast<double>(learn_.size());
        for (std::size_t j = 0; j < learn_.size(); ++j) detect(j, learn_[j], out);
        learn_.clear();
        learn_.shrink_to_fit();
      }
      return;
    }
    detect(idx, m, out);
  }

  void track_saturation(std::size_t idx, double x) {
    if (x != 0.0 && x == prev_raw_) {
      if (++run_ + 1 >= sat_n_) {
        if (sat_.empty() || sat_.back().second + 1 < idx - run_) {
          sat_.push_back({idx - run_, idx});
          ++quality_.saturation_episodes;
        } else {
          sat_.back().second = idx;
        }
      }
    } else {
      run_ = 0;
    }
    prev_raw_ = x;
    while (!sat_.empty() && sat_.front().second + keep_n_ < idx) sat_.pop_front();
    quality_.saturated = !sat_.empty() && idx <= sat_.back().second + static_cast<std::size_t>(fs_);
  }

  bool near_saturation(std::size_t p) const {
    for (const auto& [s, e] : sat_)
      if (p + search_n_ >= s && p <= e + static_cast<std::size_t>(fs_)) return true;
    return false;
  }

  double threshold1() const { return npki_ + 0.25 * (spki_ - npki_); }

  void detect(std::size_t idx, double m, std::vector<BeatEvent>& out) {
    const bool local_max = have_prev_ >= 2 && m1_ > m2_ && m1_ >= m;
    const double thr1 = threshold1();
    if (!in_hump_) {
      if (m > thr1 && m > 0.0) {
        in_hump_ = true;
        hump_ = {idx, m};
      } else if (local_max) {
        npki_ = 0.125 * m1_ + 0.875 * npki_;
        noise_.push_back({idx - 1, m1_});
      }
    } else {
      if (m > hump_.m) hump_ = {idx, m};
      if (m < 0.5 * hump_.m) {
        in_hump_ = false;
        consider(hump_, false, out);
      }
    }

    if (has_beat_ && !rr_.empty() && !in_hump_ && idx >= next_search_) {
      const double rr_mean = std::accumulate(rr_.begin(), rr_.end(), 0.0) / static_cast<double>(rr_.size());
      if (static_cast<double>(idx - last_beat_idx_) > 1.66 * rr_mean * fs_) {
        const double thr2 = 0.5 * threshold1();
        const std::size_t earliest = last_beat_idx_ + static_cast<std::size_t>(refractory_s_ * fs_);
        std::optional<Peak> best;
        for (const auto& p : noise_)
          if (p.idx > earliest && p.m > thr2 && (!best || p.m > best->m)) best = p;
        if (best) consider(*best, true, out);
        next_search_ = idx + static_cast<std::size_t>(0.25 * fs_);
      }
    }

    m2_ = m1_;
    m1_ = m;
    if (have_prev_ < 2) ++have_prev_;
  }

  // R location: largest deviation from the local median in the 300 ms of raw
  // signal preceding the integrator peak, refined by a parabola.
  std::optional<double> locate_r(std::size_t p) const {
    const std::size_t hi = std::min(p, base_ + raw_.size() - 1);
    const std::size_t lo = std::max(base_, p >= search_n_ ? p - search_n_ : std::size_t{0});
    if (hi <= lo + 2) return std::nullopt;
    std::vector<double> w(raw_.begin() + static_cast<std::ptrdiff_t>(lo - base_),
                          raw_.begin() + static_cast<std::ptrdiff_t>(hi - base_ + 1));
    std::vector<double> sorted = w;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double med = sorted[sorted.size() / 2];
    std::size_t best = 0;
    for (std::size_t i = 1; i < w.size(); ++i)
      if (std::abs(w[i] - med) > std::abs(w[best] - med)) best = i;
    double delta = 0.0;
    if (best > 0 && best + 1 < w.size()) {
      const double a = std::abs(w[best - 1] - med), b = std::abs(w[best] - med), c = std::abs(w[best + 1] - med);
      const double den = a - 2.0 * b + c;
      if (den < 0.0) delta = std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
    }
    return ts_[lo - base_ + best] + delta / fs_;
  }

  void consider(const Peak& pk, bool searchback, std::vector<BeatEvent>& out) {
    if (near_saturation(pk.idx)) {
      ++quality_.suppressed;
      return;
    }
    const auto tr = locate_r(pk.idx);
    if (!tr) return;
    if (has_beat_ && *tr - last_beat_t_ < refractory_s_) {
      npki_ = 0.125 * pk.m + 0.875 * npki_;
      return;
    }
    spki_ = searchback ? 0.25 * pk.m + 0.75 * spki_ : 0.125 * pk.m + 0.875 * spki_;
    if (has_beat_) {
      rr_.push_back(*tr - last_beat_t_);
      if (rr_.size() > 8) rr_.pop_front();
    }
    last_beat_t_ = *tr;
    last_beat_idx_ = pk.idx;
    has_beat_ = true;
    std::erase_if(noise_, [&](const Peak& p) { return p.idx <= pk.idx; });
    out.push_back(BeatEvent{*tr});
  }

  double fs_;
  signal::SosFilter bp_;
  double d_[4] = {0, 0, 0, 0};
  std::size_t mwi_len_;
  std::deque<double> mwi_q_;
  double mwi_sum_ = 0.0;

  std::size_t n_ = 0;
  std::size_t learn_n_;
  std::vector<double> learn_;
  std::size_t keep_n_;
  std::deque<double> raw_;
  std::deque<double> ts_;
  std::size_t base_ = 0;

  double spki_ = 0.0;
  double npki_ = 0.0;
  double m1_ = 0.0;
  double m2_ = 0.0;
  int have_prev_ = 0;
  bool in_hump_ = false;
  Peak hump_{0, 0.0};
  std::vector<Peak> noise_;
  std::size_t next_search_ = 0;

  double refractory_s_;
  std::size_t search_n_;
  bool has_beat_ = false;
  double last_beat_t_ = 0.0;
  std::size_t last_beat_idx_ = 0;
  std::deque<double> rr_;

  std::size_t sat_n_;
  std::size_t run_ = 0;
  double prev_raw_ = 0.0;
  std::deque<std::pair<std::size_t, std::size_t>> sat_;
  Quality quality_;
};

/// Runs the detector over a whole signal.
inline std::vector<BeatEvent> detect_r_peaks(std::span<const double> ts, std::span<const double> x, double fs) {
  RPeakDetector d(fs);
  return d.push(ts, x);
}

}  // namespace tobe::metrics
