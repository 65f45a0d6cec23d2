#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tobe/metrics/layout.hpp"
#include "tobe/metrics/types.hpp"
#include "tobe/signal/normalizer.hpp"
#include "tobe/signal/phase.hpp"
#include "tobe/signal/spectral.hpp"
#include "tobe/signal/window.hpp"

namespace tobe::metrics {

// Raw EEG indices on a common-average-referenced window whose channels are in
// ChannelLayout order. All ratios are differences of natural-log band powers.

namespace detail {

inline void require_eeg_window(const signal::Window& w) {
  w.validate();
  require(w.n_channels == ChannelLayout::kLabels.size(), "EEG window must carry the 8 layout channels");
  require(w.duration() + 1e-9 >= 2.0, "EEG metric window shorter than 2 s");
}

template <std::size_t N>
double mean_log_power(const signal::Window& w, signal::BandSpec band, const std::array<std::string_view, N>& group) {
  const auto idx = ChannelLayout::indices(group);
  const auto lp = signal::band_log_power(w, band, idx);
  double s = 0.0;
  for (double v : lp) s += v;
  return s / static_cast<double>(lp.size());
}

}  // namespace detail

/// Beta (15-20 Hz) over theta + low alpha (4-10 Hz), all channels.
inline double vigilance_raw(const signal::Window& w) {
  detail::require_eeg_window(w);
  const auto beta = signal::band_log_power(w, signal::bands::kBeta);
  const auto theta = signal::band_log_power(w, signal::bands::kThetaLowAlpha);
  double s = 0.0;
  for (std::size_t ch = 0; ch < beta.size(); ++ch) s += beta[ch] - theta[ch];
  return s / static_cast<double>(beta.size());
}

/// Frontal delta + theta (1-8 Hz) over parietal-occipital wide alpha (8-14 Hz).
inline double workload_raw(const signal::Window& w) {
  detail::require_eeg_window(w);
  return detail::mean_log_power(w, signal::bands::kDeltaTheta, ChannelLayout::kFrontal) -
         detail::mean_log_power(w, signal::bands::kWideAlpha, ChannelLayout::kParietalOccipital);
}

/// Left over right alpha (8-12 Hz).
inline double valence_raw(const signal::Window& w) {
  detail::require_eeg_window(w);
  return detail::mean_log_power(w, signal::bands::kAlpha, ChannelLayout::kLeft) -
         detail::mean_log_power(w, signal::bands::kAlpha, ChannelLayout::kRight);
}

/// Mean 7-28 Hz phase locking value over the 9 front x rear pairs.
inline double meditation_raw(const signal::Window& w) {
  detail::require_eeg_window(w);
  std::vector<std::vector<double>> front, rear;
  for (auto i : ChannelLayout::indices(ChannelLayout::kFront)) front.push_back(w.channel(i));
  for (auto i : ChannelLayout::indices(ChannelLayout::kRear)) rear.push_back(w.channel(i));
  double s = 0.0;
  for (const auto& a : front)
    for (const auto& b : rear) s += signal::plv(a, b, w.fs, signal::bands::kAlphaBeta);
  return s / static_cast<double>(front.size() * rear.size());
}

struct EegMetricsConfig {
  double window_s = 2.0;             // vigilance, workload, valence
  double meditation_window_s = 10.0;
  double hop_s = 1.0;
};

/// Streaming extractor: re-orders incoming frames into layout order, applies
/// the common average reference per frame and emits the four EEG metrics on
/// sliding windows. Each value is stamped with the window's last sample.
class EegMetricExtractor {
 public:
  EegMetricExtractor(double fs, const std::vector<std::string>& labels, EegMetricsConfig cfg = {},
                     std::map<MetricId, signal::Normalizer> normalizers = {})
      : fs_(fs),
        short_(fs, ChannelLayout::kLabels.size(), cfg.window_s, cfg.hop_s),
        long_(fs, ChannelLayout::kLabels.size(), cfg.meditation_window_s, cfg.hop_s),
        norms_(std::move(normalizers)) {
    require_config(cfg.window_s >= 2.0 && cfg.meditation_window_s >= 2.0, "EEG metric windows must be >= 2 s");
    for (auto l : ChannelLayout::kLabels) {
      const auto it = std::find(labels.begin(), labels.end(), l);
      require_config(it != labels.end(), "EEG stream lacks electrode " + std::string(l));
      map_.push_back(static_cast<std::size_t>(it - labels.begin()));
    }
    n_in_ = labels.size();
    for (auto id : {MetricId::VIGILANCE, MetricId::WORKLOAD, MetricId::VALENCE, MetricId::MEDITATION})
      norms_.try_emplace(id, signal::Normalizer::rolling());
  }

  std::vector<MetricValue> push(double t, std::span<const double> frame) {
    require(frame.size() == n_in_, "EEG frame width does not match the stream");
    std::vector<double> ordered(map_.size());
    for (std::size_t i = 0; i < map_.size(); ++i) ordered[i] = frame[map_[i]];
    const auto car = signal::common_average_reference(ordered);
    std::vector<MetricValue> out;
    for (const auto& w : short_.push(t, car)) {
      const double te = w.t_start + static_cast<double>(w.n_samples - 1) / fs_;
      emit(out, MetricId::VIGILANCE, te, vigilance_raw(w));
      emit(out, MetricId::WORKLOAD, te, workload_raw(w));
      emit(out, MetricId::VALENCE, te, valence_raw(w));
    }
    for (const auto& w : long_.push(t, car)) {
      const double te = w.t_start + static_cast<double>(w.n_samples - 1) / fs_;
      emit(out, MetricId::MEDITATION, te, meditation_raw(w));
    }
    return out;
  }

  void set_normalizer(MetricId id, signal::Normalizer n) {
    require_config(norms_.count(id) > 0, std::string(to_string(id)) + " is not an EEG metric");
    norms_.at(id) = std::move(n);
  }

 private:
  void emit(std::vector<MetricValue>& out, MetricId id, double t, double raw) {
    out.push_back(make_metric(id, t, raw, norms_.at(id)(raw, t)));
  }

  double fs_;
  signal::SlidingWindower short_;
  signal::SlidingWindower long_;
  std::map<MetricId, signal::Normalizer> norms_;
  std::vector<std::size_t> map_;
  std::size_t n_in_ = 0;
};

}  // namespace tobe::metrics
