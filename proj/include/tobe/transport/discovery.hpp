#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tobe/transport/codec.hpp"
#include "tobe/transport/net.hpp"

namespace tobe::transport {

/// Selects streams by any combination of modality, name and source id.
struct StreamFilter {
  std::optional<Modality> modality;
  std::optional<std::string> name;
  std::optional<std::string> source_id;

  bool matches(const StreamMeta& m) const {
    return (!modality || m.modality == *modality) && (!name || m.name == *name) &&
           (!source_id || m.source_id == *source_id);
  }
};

namespace detail {

// Endpoints heard most recently, so an inlet can be opened from metadata alone.
inline std::mutex& endpoint_cache_mutex() {
  static std::mutex m;
  return m;
}

inline std::map<std::string, StreamInfo>& endpoint_cache() {
  static std::map<std::string, StreamInfo> cache;
  return cache;
}

}  // namespace detail

/// Listens for beacons for `timeout_s` and returns every distinct stream
/// (by source_id) that matches. With `first_only` it returns on the first match.
inline std::vector<StreamInfo> resolve_stream_infos(const StreamFilter& filter, double timeout_s,
                                                    std::uint16_t port = kDiscoveryPort, bool first_only = false) {
  net::Fd s(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
  if (!s) throw TransportError("socket: " + net::errno_text());
  int one = 1;
  ::setsockopt(s.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const auto addr = net::ipv4("", port);
  if (::bind(s.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
    throw ConfigError("cannot listen for discovery beacons on UDP port " + std::to_string(port) + ": " +
                      net::errno_text());

  std::vector<StreamInfo> found;
  const double deadline = local_clock() + timeout_s;
  std::vector<std::uint8_t> buf(70000);
  for (;;) {
    const double left = deadline - local_clock();
    if (left <= 0) break;
    pollfd p{s.get(), POLLIN, 0};
    if (::poll(&p, 1, static_cast<int>(std::ceil(left * 1000.0))) <= 0) continue;
    sockaddr_in from{};
    socklen_t len = sizeof from;
    const auto n = ::recvfrom(s.get(), buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&from), &len);
    if (n <= 0) continue;
    StreamInfo info;
    try {
      info = decode_beacon({buf.data(), static_cast<std::size_t>(n)});
    } catch (const FramingError&) {
      continue;
    }
    if (info.host.empty()) info.host = net::to_string(from.sin_addr);
    if (!filter.matches(info.meta)) continue;
    bool seen = false;
    for (const auto& f : found) seen = seen || f.meta.source_id == info.meta.source_id;
    if (seen) continue;
    {
      std::lock_guard lk(detail::endpoint_cache_mutex());
      detail::endpoint_cache()[info.meta.source_id] = info;
    }
    found.push_back(std::move(info));
    if (first_only) break;
  }
  return found;
}

inline std::vector<StreamMeta> resolve_streams(const StreamFilter& filter = {}, double timeout_s = 2.0,
                                               std::uint16_t port = kDiscoveryPort) {
  std::vector<StreamMeta> out;
  for (auto& i : resolve_stream_infos(filter, timeout_s, port)) out.push_back(std::move(i.meta));
  return out;
}

inline void forget_endpoint(const std::string& source_id) {
  std::lock_guard lk(detail::endpoint_cache_mutex());
  detail::endpoint_cache().erase(source_id);
}

/// Endpoint for a stream: from the cache of earlier resolutions, otherwise by
/// listening for its beacon.
inline std::optional<StreamInfo> find_endpoint(const StreamMeta& meta, double timeout_s,
                                               std::uint16_t port = kDiscoveryPort) {
  {
    std::lock_guard lk(detail::endpoint_cache_mutex());
    const auto it = detail::endpoint_cache().find(meta.source_id);
    if (it != detail::endpoint_cache().end()) return it->second;
  }
  StreamFilter f;
  f.source_id = meta.source_id;
  auto found = resolve_stream_infos(f, timeout_s, port, true);
  if (found.empty()) return std::nullopt;
  return found.front();
}

}  // namespace tobe::transport
