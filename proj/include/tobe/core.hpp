#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tobe {

// Error taxonomy shared by every module. Configuration errors come from bad
// user input (files, specs, parameters); contract errors are caller bugs.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Short human form of a number for messages: 300, 0.25, 1e-07.
inline std::string num_str(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

inline void require_config(bool cond, const std::string& what) {
  if (!cond) throw ConfigError(what);
}

enum class Modality { ECG, EDA, RESP, EOG, EEG, METRIC };

inline constexpr std::array<std::string_view, 6> kModalityNames{"ECG", "EDA", "RESP", "EOG",
                                                                "EEG", "METRIC"};

inline std::string_view to_string(Modality m) { return kModalityNames[static_cast<int>(m)]; }

inline std::optional<Modality> parse_modality(std::string_view s) {
  for (std::size_t i = 0; i < kModalityNames.size(); ++i)
    if (kModalityNames[i] == s) return static_cast<Modality>(i);
  return std::nullopt;
}

enum class MetricId {
  HEART_RATE,
  AROUSAL,
  RESPIRATION,
  VIGILANCE,
  WORKLOAD,
  MEDITATION,
  VALENCE,
  CARDIAC_COHERENCE,
  PAIR_SYNCHRONY,
};

inline constexpr std::array<std::string_view, 9> kMetricNames{
    "HEART_RATE", "AROUSAL",    "RESPIRATION",       "VIGILANCE",     "WORKLOAD",
    "MEDITATION", "VALENCE",    "CARDIAC_COHERENCE", "PAIR_SYNCHRONY"};

inline std::string_view to_string(MetricId m) { return kMetricNames[static_cast<int>(m)]; }

inline std::optional<MetricId> parse_metric(std::string_view s) {
  for (std::size_t i = 0; i < kMetricNames.size(); ++i)
    if (kMetricNames[i] == s) return static_cast<MetricId>(i);
  return std::nullopt;
}

// Who can perceive a metric without technological help:
// 1 = self and others (blinks), 2 = self only (heart, breath), 3 = nobody (mental states).
inline int visibility_level(MetricId m) {
  switch (m) {
    case MetricId::HEART_RATE:
    case MetricId::RESPIRATION:
      return 2;
    case MetricId::CARDIAC_COHERENCE:
    case MetricId::PAIR_SYNCHRONY:
    case MetricId::AROUSAL:
    case MetricId::VIGILANCE:
    case MetricId::WORKLOAD:
    case MetricId::MEDITATION:
    case MetricId::VALENCE:
      return 3;
  }
  return 3;
}

inline constexpr int kBlinkVisibilityLevel = 1;

// Monotonic local clock in seconds, used for sample timestamps and offsets.
inline double local_clock() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace tobe
