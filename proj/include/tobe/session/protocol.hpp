#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tobe/core.hpp"

namespace tobe::session {

enum class PhaseId { GUIDED, SOLO, SYNC };

inline std::string_view to_string(PhaseId p) {
  switch (p) {
    case PhaseId::GUIDED: return "GUIDED";
    case PhaseId::SOLO: return "SOLO";
    case PhaseId::SYNC: return "SYNC";
  }
  return "?";
}

inline std::optional<PhaseId> parse_phase(std::string_view s) {
  for (auto p : {PhaseId::GUIDED, PhaseId::SOLO, PhaseId::SYNC})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

struct ProtocolPhase {
  PhaseId id = PhaseId::GUIDED;
  double duration_s = 300.0;
  friend bool operator==(const ProtocolPhase&, const ProtocolPhase&) = default;
};

/// Guided breathing, then breathing alone, then breathing together.
struct RelaxationProtocol {
  std::vector<ProtocolPhase> phases{{PhaseId::GUIDED, 300.0}, {PhaseId::SOLO, 300.0}, {PhaseId::SYNC, 300.0}};
  double gauge_half_cycle_s = 5.0;

  void validate() const {
    require_config(!phases.empty(), "protocol needs at least one phase");
    for (std::size_t i = 0; i < phases.size(); ++i)
      require_config(std::isfinite(phases[i].duration_s) && phases[i].duration_s > 0.0,
                     "protocol.phases[" + std::to_string(i) + "].duration_s must be > 0");
    require_config(std::isfinite(gauge_half_cycle_s) && gauge_half_cycle_s > 0.0,
                   "protocol.gauge.half_cycle_s must be > 0");
  }

  double start_of(std::size_t i) const {
    double t = 0.0;
    for (std::size_t j = 0; j < i; ++j) t += phases[j].duration_s;
    return t;
  }

  double total_s() const { return start_of(phases.size()); }

  /// Index of the phase running at session time t (phases are [start, end)).
  std::optional<std::size_t> phase_at(double t) const {
    if (t < 0.0) return std::nullopt;
    double start = 0.0;
    for (std::size_t i = 0; i < phases.size(); ++i) {
      const double end = start + phases[i].duration_s;
      if (t < end) return i;
      start = end;
    }
    return std::nullopt;
  }

  friend bool operator==(const RelaxationProtocol&, const RelaxationProtocol&) = default;
};

enum class GaugeDirection { RISING, FALLING };

inline std::string_view to_string(GaugeDirection d) { return d == GaugeDirection::RISING ? "RISING" : "FALLING"; }

struct GaugeState {
  double t = 0.0;
  double level = 0.0;
  GaugeDirection direction = GaugeDirection::RISING;
};

/// Breathing guide: a triangle wave that rises from 0 to 1 over one half
/// cycle and falls back over the next, starting at the beginning of each
/// GUIDED phase. At the top the direction is already FALLING. No gauge
/// outside GUIDED phases.
inline std::optional<GaugeState> gauge_level(const RelaxationProtocol& p, double t) {
  const auto i = p.phase_at(t);
  if (!i || p.phases[*i].id != PhaseId::GUIDED) return std::nullopt;
  const double h = p.gauge_half_cycle_s;
  const double u = std::fmod(t - p.start_of(*i), 2.0 * h) / h;  // [0, 2)
  if (u < 1.0) return GaugeState{t, u, GaugeDirection::RISING};
  return GaugeState{t, 2.0 - u, GaugeDirection::FALLING};
}

}  // namespace tobe::session
