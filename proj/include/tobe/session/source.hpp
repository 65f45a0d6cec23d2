#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tobe/session/config.hpp"
#include "tobe/synth/recording.hpp"
#include "tobe/synth/spec_file.hpp"
#include "tobe/transport/transport.hpp"

namespace tobe::session {

using transport::SampleChunk;
using transport::StreamMeta;

/// Where a user's samples come from. Timestamps handed out by poll() are on
/// the session clock (0 = session start).
class Source {
 public:
  virtual ~Source() = default;

  virtual const StreamMeta& meta() const = 0;
  /// Called once before the first poll, with local_clock() at session start.
  virtual void start(double /*local_t0*/) {}
  /// Every chunk with samples stamped up to `until`. Throws when the source
  /// fails; the session then marks the user degraded.
  virtual std::vector<SampleChunk> poll(double until) = 0;
  /// True once no further samples will ever arrive.
  virtual bool exhausted() const { return false; }
  /// Attempts to recover after a failure; false if not possible (yet).
  virtual bool reconnect() { return false; }
  /// Live network sources only make sense against the wall clock.
  virtual bool live() const { return false; }
};

/// In-memory samples, released as the session clock passes them. An
/// optional refill callback supplies further segments on demand.
class BufferedSource : public Source {
 public:
  using Refill = std::function<std::optional<synth::Recording>()>;

  explicit BufferedSource(synth::Recording rec, Refill refill = {}) : meta_(rec.meta), refill_(std::move(refill)) {
    append(std::move(rec.chunks));
  }

  const StreamMeta& meta() const override { return meta_; }

  std::vector<SampleChunk> poll(double until) override {
    std::vector<SampleChunk> out;
    while (true) {
      if (chunks_.empty() && !refill()) break;
      auto& c = chunks_.front();
      if (c.timestamps.front() > until) break;
      if (c.timestamps.back() <= until) {
        out.push_back(std::move(c));
        chunks_.pop_front();
        continue;
      }
      // split: rows up to `until` now, the rest later
      const auto n = static_cast<std::size_t>(
          std::upper_bound(c.timestamps.begin(), c.timestamps.end(), until) - c.timestamps.begin());
      SampleChunk head(c.n_channels);
      head.timestamps.assign(c.timestamps.begin(), c.timestamps.begin() + static_cast<std::ptrdiff_t>(n));
      head.samples.assign(c.samples.begin(), c.samples.begin() + static_cast<std::ptrdiff_t>(n * c.n_channels));
      c.timestamps.erase(c.timestamps.begin(), c.timestamps.begin() + static_cast<std::ptrdiff_t>(n));
      c.samples.erase(c.samples.begin(), c.samples.begin() + static_cast<std::ptrdiff_t>(n * c.n_channels));
      out.push_back(std::move(head));
      break;
    }
    return out;
  }

  bool exhausted() const override { return chunks_.empty() && !refill_; }

 private:
  bool refill() {
    if (!refill_) return false;
    auto next = refill_();
    if (!next) {
      refill_ = nullptr;
      return false;
    }
    append(std::move(next->chunks));
    return !chunks_.empty();
  }

  void append(std::vector<SampleChunk> chunks) {
    for (auto& c : chunks)
      if (!c.empty()) chunks_.push_back(std::move(c));
  }

  StreamMeta meta_;
  std::deque<SampleChunk> chunks_;
  Refill refill_;
};

/// A recording file replayed on the session clock: its first sample lands
/// at session time 0.
inline std::unique_ptr<Source> recording_source(const std::filesystem::path& path) {
  auto rec = synth::read_recording(path.string());
  if (!rec.chunks.empty()) {
    const double t0 = rec.chunks.front().timestamps.front();
    for (auto& c : rec.chunks)
      for (auto& t : c.timestamps) t -= t0;
  }
  return std::make_unique<BufferedSource>(std::move(rec));
}

/// Shifts a spec so that generating from 0 continues where segment `k` of
/// length `seg_s` starts. Random generators get a fresh seed per segment.
inline synth::GeneratorSpec segment_spec(synth::GeneratorSpec g, std::size_t k, double seg_s) {
  if (k == 0) return g;
  const double shift = static_cast<double>(k) * seg_s;
  if (auto* ecg = std::get_if<synth::EcgSpec>(&g.spec))
    for (auto& p : ecg->bpm_profile) p.t -= shift;
  if (auto* eda = std::get_if<synth::EdaSpec>(&g.spec))
    for (auto& e : eda->events) e.t -= shift;
  if (const auto seed = g.seed()) g.set_seed(synth::derive_seed(*seed, "segment/" + std::to_string(k)));
  return g;
}

/// Generator output produced in segments: the whole session at once when
/// its length is known, otherwise ten minutes at a time.
inline std::unique_ptr<Source> generator_source(const synth::GeneratorSpec& g, std::optional<double> session_s) {
  const double seg_s = session_s ? *session_s + 1.0 : 600.0;
  auto first = synth::generate(g, seg_s, 0.0);
  BufferedSource::Refill refill;
  if (!session_s) {
    refill = [g, seg_s, k = std::size_t{1}]() mutable -> std::optional<synth::Recording> {
      const double t0 = static_cast<double>(k) * seg_s;
      return synth::generate(segment_spec(g, k++, seg_s), seg_s, t0);
    };
  }
  return std::make_unique<BufferedSource>(std::move(first), std::move(refill));
}

/// Network stream found by name through discovery. Sample times are mapped
/// onto the session clock with the measured clock offset.
class StreamSource : public Source {
 public:
  StreamSource(std::string name, Modality modality, std::uint16_t discovery_port, double resolve_timeout_s = 3.0)
      : name_(std::move(name)), modality_(modality), port_(discovery_port), timeout_(resolve_timeout_s) {
    meta_.name = name_;
    meta_.modality = modality;
  }

  const StreamMeta& meta() const override { return meta_; }
  bool live() const override { return true; }

  void start(double local_t0) override {
    local_t0_ = local_t0;
    connect();
  }

  std::vector<SampleChunk> poll(double) override {
    require(inlet_ != nullptr, "stream source polled before it connected");
    std::vector<SampleChunk> out;
    while (auto c = inlet_->pull_chunk(0.0)) {
      for (auto& t : c->timestamps) t += offset_ - local_t0_;
      out.push_back(std::move(*c));
    }
    return out;
  }

  bool reconnect() override {
    try {
      inlet_.reset();
      transport::forget_endpoint(meta_.source_id);
      connect();
      return true;
    } catch (const std::exception&) {
      return false;
    }
  }

 private:
  void connect() {
    transport::StreamFilter f;
    f.name = name_;
    f.modality = modality_;
    const auto infos = transport::resolve_stream_infos(f, timeout_, port_, true);
    if (infos.empty())
      throw transport::ConnectionLost("no " + std::string(to_string(modality_)) + " stream named '" + name_ + "'");
    transport::InletOptions opts;
    opts.discovery_port = port_;
    inlet_ = std::make_unique<transport::Inlet>(infos.front(), opts);
    meta_ = inlet_->meta();
    try {
      offset_ = inlet_->measure_clock_offset(1.0).offset_s;
    } catch (const transport::ClockMeasurementFailed&) {
      offset_ = 0.0;
    }
  }

  std::string name_;
  Modality modality_;
  std::uint16_t port_;
  double timeout_;
  StreamMeta meta_;
  std::unique_ptr<transport::Inlet> inlet_;
  double offset_ = 0.0;
  double local_t0_ = 0.0;
};

struct SourceContext {
  std::optional<double> session_s;
  std::uint16_t discovery_port = transport::kDiscoveryPort;
};

using SourceFactory =
    std::function<std::unique_ptr<Source>(const UserConfig&, const SourceConfig&, const SourceContext&)>;

inline std::unique_ptr<Source> make_source(const UserConfig&, const SourceConfig& s, const SourceContext& ctx) {
  switch (s.kind) {
    case SourceConfig::Kind::Stream: return std::make_unique<StreamSource>(s.stream, s.modality, ctx.discovery_port);
    case SourceConfig::Kind::Recording: return recording_source(s.path);
    case SourceConfig::Kind::Generator: return generator_source(*s.generator, ctx.session_s);
  }
  return nullptr;
}

}  // namespace tobe::session
