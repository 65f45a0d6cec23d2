#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <span>
#include <vector>

#include "tobe/core.hpp"

namespace tobe::signal {

/// Block of multichannel samples with row-major storage (one row per sample).
struct Window {
  std::vector<double> data;
  std::size_t n_samples = 0;
  std::size_t n_channels = 0;
  double fs = 0.0;
  double t_start = 0.0;

  Window() = default;
  Window(std::size_t samples, std::size_t channels, double fs_hz, double t0 = 0.0)
      : data(samples * channels, 0.0), n_samples(samples), n_channels(channels), fs(fs_hz),
        t_start(t0) {}

  double& at(std::size_t i, std::size_t ch) { return data[i * n_channels + ch]; }
  double at(std::size_t i, std::size_t ch) const { return data[i * n_channels + ch]; }

  double duration() const { return fs > 0.0 ? static_cast<double>(n_samples) / fs : 0.0; }
  double t_end() const { return t_start + duration(); }

  std::vector<double> channel(std::size_t ch) const {
    require(ch < n_channels, "window channel out of range");
    std::vector<double> out(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) out[i] = at(i, ch);
    return out;
  }

  void validate() const {
    require(n_samples >= 2, "window needs at least 2 samples");
    require(fs > 0.0, "window sampling rate must be positive");
    require(data.size() == n_samples * n_channels, "window data size mismatch");
  }

  /// Single-channel window from a sample vector.
  static Window from_channel(std::span<const double> x, double fs_hz, double t0 = 0.0) {
    Window w(x.size(), 1, fs_hz, t0);
    std::copy(x.begin(), x.end(), w.data.begin());
    return w;
  }

  /// Builds a window from per-channel columns of equal length.
  static Window from_channels(const std::vector<std::vector<double>>& cols, double fs_hz,
                              double t0 = 0.0) {
    require(!cols.empty(), "window needs at least one channel");
    Window w(cols.front().size(), cols.size(), fs_hz, t0);
    for (std::size_t ch = 0; ch < cols.size(); ++ch) {
      require(cols[ch].size() == w.n_samples, "channel lengths differ");
      for (std::size_t i = 0; i < w.n_samples; ++i) w.at(i, ch) = cols[ch][i];
    }
    return w;
  }
};

/// Common average reference of one frame: each channel minus the frame mean.
inline std::vector<double> common_average_reference(std::span<const double> frame) {
  require(frame.size() >= 2, "common average reference needs at least 2 channels");
  const double mean =
      std::accumulate(frame.begin(), frame.end(), 0.0) / static_cast<double>(frame.size());
  std::vector<double> out(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) out[i] = frame[i] - mean;
  return out;
}

/// Applies the common average reference to every row of a window in place.
inline void common_average_reference(Window& w) {
  require(w.n_channels >= 2, "common average reference needs at least 2 channels");
  for (std::size_t i = 0; i < w.n_samples; ++i) {
    double mean = 0.0;
    for (std::size_t ch = 0; ch < w.n_channels; ++ch) mean += w.at(i, ch);
    mean /= static_cast<double>(w.n_channels);
    for (std::size_t ch = 0; ch < w.n_channels; ++ch) w.at(i, ch) -= mean;
  }
}

/// Cuts a regularly sampled stream into windows of `length_s` every `hop_s`.
/// Samples are pushed in arrival order; a window is released only once all
/// of its samples are present.
class SlidingWindower {
 public:
  SlidingWindower(double fs, std::size_t n_channels, double length_s, double hop_s)
      : fs_(fs), n_channels_(n_channels),
        length_(static_cast<std::size_t>(std::llround(length_s * fs))),
        hop_(static_cast<std::size_t>(std::llround(hop_s * fs))) {
    require_config(fs > 0.0, "window sampling rate must be positive");
    require_config(length_s > 0.0 && hop_s > 0.0 && hop_s <= length_s,
                   "sliding window needs length > 0 and 0 < hop <= length");
    require_config(length_ >= 2 && hop_ >= 1, "sliding window shorter than two samples");
    require(n_channels > 0, "sliding window needs channels");
  }

  std::size_t length_samples() const { return length_; }

  /// Pushes one frame (n_channels values) stamped `t`; returns any completed windows.
  std::vector<Window> push(double t, std::span<const double> frame) {
    require(frame.size() == n_channels_, "frame width does not match the windower");
    if (buffer_.empty()) first_t_ = t;
    buffer_.insert(buffer_.end(), frame.begin(), frame.end());
    ++buffered_;
    std::vector<Window> out;
    while (buffered_ >= length_) {
      Window w(length_, n_channels_, fs_, first_t_);
      std::copy_n(buffer_.begin(), length_ * n_channels_, w.data.begin());
      out.push_back(std::move(w));
      buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(hop_ * n_channels_));
      buffered_ -= hop_;
      first_t_ += static_cast<double>(hop_) / fs_;
    }
    return out;
  }

 private:
  double fs_;
  std::size_t n_channels_;
  std::size_t length_;
  std::size_t hop_;
  std::deque<double> buffer_;
  std::size_t buffered_ = 0;
  double first_t_ = 0.0;
};

/// Splits a whole single-channel recording into windows.
inline std::vector<Window> sliding_windows(std::span<const double> x, double fs, double length_s,
                                           double hop_s, double t0 = 0.0) {
  SlidingWindower w(fs, 1, length_s, hop_s);
  std::vector<Window> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto ws = w.push(t0 + static_cast<double>(i) / fs, x.subspan(i, 1));
    for (auto& win : ws) out.push_back(std::move(win));
  }
  return out;
}

}  // namespace tobe::signal
