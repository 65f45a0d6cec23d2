#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "tobe/core.hpp"
#include "tobe/transport/types.hpp"

namespace tobe::synth {

using transport::SampleChunk;
using transport::StreamMeta;

/// Generated stream: metadata plus its chunks in time order.
struct Recording {
  StreamMeta meta;
  std::vector<SampleChunk> chunks;

  std::size_t n_samples() const {
    std::size_t n = 0;
    for (const auto& c : chunks) n += c.n_samples();
    return n;
  }

  std::vector<double> timestamps() const {
    std::vector<double> t;
    for (const auto& c : chunks) t.insert(t.end(), c.timestamps.begin(), c.timestamps.end());
    return t;
  }

  /// All samples of one channel, widened to double.
  std::vector<double> channel(std::size_t ch) const {
    std::vector<double> out;
    out.reserve(n_samples());
    for (const auto& c : chunks)
      for (std::size_t i = 0; i < c.n_samples(); ++i) out.push_back(c.samples[i * c.n_channels + ch]);
    return out;
  }
};

/// Mixes a base seed with a label (e.g. a user id) into an independent seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view salt) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : salt) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = base ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Packs per-channel columns sampled at `fs` from `t0` into chunks of
/// `chunk_samples` rows.
inline std::vector<SampleChunk> to_chunks(const std::vector<std::vector<double>>& columns, double fs,
                                          double t0, std::size_t chunk_samples) {
  require(!columns.empty(), "no channels to pack");
  require(chunk_samples > 0, "chunk size must be positive");
  const std::size_t n = columns.front().size();
  const std::size_t n_ch = columns.size();
  std::vector<SampleChunk> out;
  for (std::size_t start = 0; start < n; start += chunk_samples) {
    const std::size_t end = std::min(n, start + chunk_samples);
    SampleChunk c(n_ch);
    c.timestamps.reserve(end - start);
    c.samples.reserve((end - start) * n_ch);
    for (std::size_t i = start; i < end; ++i) {
      c.timestamps.push_back(t0 + static_cast<double>(i) / fs);
      for (std::size_t ch = 0; ch < n_ch; ++ch) c.samples.push_back(static_cast<float>(columns[ch][i]));
    }
    out.push_back(std::move(c));
  }
  return out;
}

inline std::size_t sample_count(double duration_s, double fs) {
  require_config(duration_s > 0.0, "duration must be positive");
  require_config(fs > 0.0, "sampling rate must be positive");
  return static_cast<std::size_t>(std::llround(duration_s * fs));
}

inline std::size_t default_chunk(double fs) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fs / 10.0)));
}

}  // namespace tobe::synth
