#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tobe/core.hpp"

namespace tobe::transport {

/// Identity and shape of a signal stream.
struct StreamMeta {
  std::string name;
  Modality modality = Modality::EEG;
  std::vector<std::string> channel_labels;
  double nominal_rate = 0.0;  // Hz; 0 = irregular / event stream
  std::string unit;
  std::string source_id;

  std::size_t n_channels() const { return channel_labels.size(); }

  void validate() const {
    require_config(!name.empty(), "stream name must not be empty");
    require_config(!source_id.empty(), "stream source_id must not be empty");
    require_config(!channel_labels.empty(), "stream '" + name + "' has no channel labels");
    std::set<std::string> seen;
    for (const auto& l : channel_labels)
      require_config(seen.insert(l).second,
                     "stream '" + name + "' repeats channel label '" + l + "'");
    require_config(nominal_rate >= 0.0 && std::isfinite(nominal_rate),
                   "stream '" + name + "' has a negative nominal rate");
  }

  friend bool operator==(const StreamMeta&, const StreamMeta&) = default;
};

/// Timestamped block of samples, row-major (n_samples x n_channels).
struct SampleChunk {
  std::vector<double> timestamps;
  std::vector<float> samples;
  std::size_t n_channels = 0;

  SampleChunk() = default;
  SampleChunk(std::size_t channels) : n_channels(channels) {}

  std::size_t n_samples() const { return timestamps.size(); }
  bool empty() const { return timestamps.empty(); }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(samples).subspan(i * n_channels, n_channels);
  }

  void push_row(double t, std::span<const float> values) {
    timestamps.push_back(t);
    samples.insert(samples.end(), values.begin(), values.end());
  }

  void validate() const {
    require(n_channels > 0, "chunk has no channels");
    require(samples.size() == timestamps.size() * n_channels,
            "chunk sample count does not match timestamps x channels");
    for (std::size_t i = 1; i < timestamps.size(); ++i)
      require(timestamps[i] > timestamps[i - 1], "chunk timestamps must be strictly increasing");
    for (double t : timestamps) require(std::isfinite(t), "chunk timestamp is not finite");
    for (float v : samples) require(std::isfinite(v), "chunk contains NaN or Inf samples");
  }

  friend bool operator==(const SampleChunk&, const SampleChunk&) = default;
};

/// receiver_clock - sender_clock, measured by a ping/pong exchange.
struct ClockOffset {
  double offset_s = 0.0;
  double rtt_s = 0.0;
};

}  // namespace tobe::transport
