#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tobe/transport/types.hpp"

namespace tobe::transport {

// Wire format, all integers and floats little-endian.
//   chunk: 0x5C u32 n_samples u32 n_channels f64[n_samples] f32[n_samples*n_channels]
//   ping:  0x5D u64 nonce
//   pong:  0x5E u64 nonce f64 sender_clock
//   beacon (UDP): "TOBE" 0x01 u16 length <JSON metadata document>
inline constexpr std::uint8_t kChunkMagic = 0x5C;
inline constexpr std::uint8_t kPingMagic = 0x5D;
inline constexpr std::uint8_t kPongMagic = 0x5E;
inline constexpr std::uint8_t kBeaconVersion = 0x01;
inline constexpr char kBeaconMagic[4] = {'T', 'O', 'B', 'E'};
inline constexpr std::uint16_t kDiscoveryPort = 16571;

/// Discovery port, overridable through TOBE_DISCOVERY_PORT.
inline std::uint16_t discovery_port_from_env() {
  const char* v = std::getenv("TOBE_DISCOVERY_PORT");
  if (!v || !*v) return kDiscoveryPort;
  char* end = nullptr;
  const long p = std::strtol(v, &end, 10);
  require_config(*end == '\0' && p > 0 && p < 65536, std::string("TOBE_DISCOVERY_PORT must be a port number, got '") + v + "'");
  return static_cast<std::uint16_t>(p);
}

// Limits applied when decoding untrusted bytes.
inline constexpr std::uint32_t kMaxChannels = 4096;
inline constexpr std::size_t kMaxChunkBytes = std::size_t{64} << 20;

struct FramingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PingFrame {
  std::uint64_t nonce = 0;
  friend bool operator==(const PingFrame&, const PingFrame&) = default;
};

struct PongFrame {
  std::uint64_t nonce = 0;
  double sender_clock = 0.0;
  friend bool operator==(const PongFrame&, const PongFrame&) = default;
};

using Frame = std::variant<SampleChunk, PingFrame, PongFrame>;

namespace detail {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
inline void put_f32(std::vector<std::uint8_t>& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
inline double get_f64(const std::uint8_t* p) { return std::bit_cast<double>(get_le<std::uint64_t>(p)); }
inline float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_le<std::uint32_t>(p)); }

}  // namespace detail

inline std::vector<std::uint8_t> encode_chunk(const SampleChunk& c) {
  c.validate();
  require(!c.empty(), "cannot encode an empty chunk");
  std::vector<std::uint8_t> out;
  out.reserve(9 + 8 * c.n_samples() + 4 * c.samples.size());
  out.push_back(kChunkMagic);
  detail::put_le(out, static_cast<std::uint32_t>(c.n_samples()));
  detail::put_le(out, static_cast<std::uint32_t>(c.n_channels));
  for (double t : c.timestamps) detail::put_f64(out, t);
  for (float v : c.samples) detail::put_f32(out, v);
  return out;
}

inline std::vector<std::uint8_t> encode_ping(std::uint64_t nonce) {
  std::vector<std::uint8_t> out{kPingMagic};
  detail::put_le(out, nonce);
  return out;
}

inline std::vector<std::uint8_t> encode_pong(std::uint64_t nonce, double sender_clock) {
  std::vector<std::uint8_t> out{kPongMagic};
  detail::put_le(out, nonce);
  detail::put_f64(out, sender_clock);
  return out;
}

/// Decodes one frame from the front of `bytes`. Returns the frame and the
/// number of bytes it used, nullopt if more bytes are needed, and throws
/// FramingError if the bytes cannot be the start of a valid frame.
inline std::optional<std::pair<Frame, std::size_t>> decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) return std::nullopt;
  const std::uint8_t* p = bytes.data();
  switch (p[0]) {
    case kPingMagic:
      if (bytes.size() < 9) return std::nullopt;
      return std::pair{Frame{PingFrame{detail::get_le<std::uint64_t>(p + 1)}}, std::size_t{9}};
    case kPongMagic: {
      if (bytes.size() < 17) return std::nullopt;
      const double clock = detail::get_f64(p + 9);
      if (!std::isfinite(clock)) throw FramingError("pong carries a non-finite clock");
      return std::pair{Frame{PongFrame{detail::get_le<std::uint64_t>(p + 1), clock}}, std::size_t{17}};
    }
    case kChunkMagic: {
      if (bytes.size() < 9) return std::nullopt;
      const auto ns = detail::get_le<std::uint32_t>(p + 1);
      const auto nc = detail::get_le<std::uint32_t>(p + 5);
      if (ns == 0) throw FramingError("chunk frame with zero samples");
      if (nc == 0 || nc > kMaxChannels) throw FramingError("chunk frame with " + std::to_string(nc) + " channels");
      const std::size_t body = std::size_t{ns} * 8 + std::size_t{ns} * nc * 4;
      if (body > kMaxChunkBytes) throw FramingError("chunk frame larger than the 64 MiB limit");
      if (bytes.size() < 9 + body) return std::nullopt;
      SampleChunk c(nc);
      c.timestamps.resize(ns);
      c.samples.resize(std::size_t{ns} * nc);
      const std::uint8_t* q = p + 9;
      for (std::size_t i = 0; i < ns; ++i, q += 8) {
        c.timestamps[i] = detail::get_f64(q);
        if (!std::isfinite(c.timestamps[i]) || (i && !(c.timestamps[i] > c.timestamps[i - 1])))
          throw FramingError("chunk timestamps are not finite and strictly increasing");
      }
      for (auto& v : c.samples) {
        v = detail::get_f32(q);
        q += 4;
        if (!std::isfinite(v)) throw FramingError("chunk contains NaN or Inf samples");
      }
      return std::pair{Frame{std::move(c)}, 9 + body};
    }
    default:
      throw FramingError("unknown frame type byte " + std::to_string(p[0]));
  }
}

/// Accumulates a byte stream and yields complete frames.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

  std::optional<Frame> next() {
    auto r = decode_frame(std::span<const std::uint8_t>(buf_).subspan(pos_));
    if (!r) {
      if (pos_ > 0) {
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
        pos_ = 0;
      }
      return std::nullopt;
    }
    pos_ += r->second;
    return std::move(r->first);
  }

  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

/// What a discovery beacon announces: the stream and where to connect.
struct StreamInfo {
  StreamMeta meta;
  std::string host;  // empty: use the beacon's source address
  std::uint16_t port = 0;
};

inline nlohmann::json meta_to_json(const StreamMeta& m) {
  return {{"name", m.name},
          {"modality", std::string(to_string(m.modality))},
          {"channel_labels", m.channel_labels},
          {"nominal_rate", m.nominal_rate},
          {"unit", m.unit},
          {"source_id", m.source_id}};
}

inline StreamMeta meta_from_json(const nlohmann::json& j) {
  StreamMeta m;
  m.name = j.at("name").get<std::string>();
  const auto mod = parse_modality(j.at("modality").get<std::string>());
  require_config(mod.has_value(), "unknown modality '" + j.at("modality").get<std::string>() + "'");
  m.modality = *mod;
  m.channel_labels = j.at("channel_labels").get<std::vector<std::string>>();
  m.nominal_rate = j.at("nominal_rate").get<double>();
  m.unit = j.at("unit").get<std::string>();
  m.source_id = j.at("source_id").get<std::string>();
  m.validate();
  return m;
}

inline std::vector<std::uint8_t> encode_beacon(const StreamInfo& info) {
  auto doc = meta_to_json(info.meta);
  doc["host"] = info.host;
  doc["port"] = info.port;
  const std::string text = doc.dump();
  require_config(text.size() <= 0xFFFF, "stream metadata too large for a discovery beacon");
  std::vector<std::uint8_t> out(kBeaconMagic, kBeaconMagic + 4);
  out.push_back(kBeaconVersion);
  detail::put_le(out, static_cast<std::uint16_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  return out;
}

inline StreamInfo decode_beacon(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 7 || std::memcmp(bytes.data(), kBeaconMagic, 4) != 0)
    throw FramingError("not a discovery beacon");
  if (bytes[4] != kBeaconVersion) throw FramingError("unsupported beacon version " + std::to_string(bytes[4]));
  const auto len = detail::get_le<std::uint16_t>(bytes.data() + 5);
  if (bytes.size() != 7u + len) throw FramingError("beacon length field does not match datagram size");
  try {
    const auto doc = nlohmann::json::parse(bytes.begin() + 7, bytes.end());
    StreamInfo info;
    info.meta = meta_from_json(doc);
    info.host = doc.at("host").get<std::string>();
    const auto port = doc.at("port").get<std::int64_t>();
    if (port <= 0 || port > 0xFFFF) throw FramingError("beacon advertises an invalid port");
    info.port = static_cast<std::uint16_t>(port);
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw FramingError(std::string("bad beacon metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw FramingError(std::string("bad beacon metadata: ") + e.what());
  }
}

}  // namespace tobe::transport
