#pragma once

#include <map>
#include <optional>
#include <string>

#include "tobe/metrics/types.hpp"

namespace tobe::session {

/// Group value of one metric: the mean of the users' latest normalized
/// values, leaving out users whose latest value is older than `fresh_s`.
/// Nothing when no user is fresh.
inline std::optional<metrics::MetricValue> group_aggregate(const std::map<std::string, metrics::MetricValue>& latest,
                                                           MetricId metric, double now, double fresh_s = 5.0) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [user, v] : latest) {
    if (v.metric != metric || now - v.t > fresh_s) continue;
    sum += v.normalized;
    ++n;
  }
  if (n == 0) return std::nullopt;
  const double mean = sum / n;
  return metrics::make_metric(metric, now, mean, mean);
}

}  // namespace tobe::session
