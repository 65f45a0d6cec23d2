#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tobe/core.hpp"

namespace tobe::feedback {

/// 2D sprite transform. Translation is in normalized avatar units.
struct Transform {
  double sx = 1.0;
  double sy = 1.0;
  double rot = 0.0;  // radians
  double tx = 0.0;
  double ty = 0.0;

  void validate() const {
    require_config(std::isfinite(sx) && std::isfinite(sy) && std::isfinite(rot) && std::isfinite(tx) &&
                       std::isfinite(ty),
                   "transform has a non-finite component");
    require_config(sx > 0.0 && sy > 0.0, "transform scale must be > 0");
  }

  friend bool operator==(const Transform&, const Transform&) = default;
};

struct Keyframe {
  double phase = 0.0;
  Transform transform;
  friend bool operator==(const Keyframe&, const Keyframe&) = default;
};

struct Timeline {
  std::string id;
  std::string sprite;
  std::vector<Keyframe> keys;

  void validate() const {
    require_config(!id.empty(), "timeline id must not be empty");
    require_config(keys.size() >= 2, "timeline '" + id + "' needs at least 2 keyframes");
    require_config(keys.front().phase == 0.0 && keys.back().phase == 1.0,
                   "timeline '" + id + "' must start at phase 0 and end at phase 1");
    for (std::size_t i = 0; i < keys.size(); ++i) {
      keys[i].transform.validate();
      if (i) require_config(keys[i].phase > keys[i - 1].phase, "timeline '" + id + "' phases must increase");
    }
  }

  friend bool operator==(const Timeline&, const Timeline&) = default;
};

inline constexpr std::size_t kMaxKeyframes = 64;

struct GestureSample {
  double t = 0.0;
  Transform transform;
};

/// Turns a recorded gesture into a timeline: time is rescaled to phase
/// [0, 1] and long gestures are thinned to at most 64 keyframes by picking
/// the sample nearest each of 64 evenly spaced phases. The first and last
/// samples are kept exactly.
inline Timeline record_timeline(std::span<const GestureSample> samples, std::string id, std::string sprite) {
  require_config(samples.size() >= 2, "a gesture needs at least 2 samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].transform.validate();
    require_config(std::isfinite(samples[i].t), "gesture time is not finite");
    if (i) require_config(samples[i].t > samples[i - 1].t, "gesture times must increase");
  }
  const double t0 = samples.front().t, span = samples.back().t - t0;
  const std::size_t n = samples.size();
  auto phase_of = [&](std::size_t i) {
    if (i == 0) return 0.0;
    if (i + 1 == n) return 1.0;
    return (samples[i].t - t0) / span;
  };

  std::vector<std::size_t> picked;
  if (n <= kMaxKeyframes) {
    for (std::size_t i = 0; i < n; ++i) picked.push_back(i);
  } else {
    std::size_t j = 0;
    for (std::size_t k = 0; k < kMaxKeyframes; ++k) {
      const double target = static_cast<double>(k) / static_cast<double>(kMaxKeyframes - 1);
      while (j + 1 < n && std::abs(phase_of(j + 1) - target) <= std::abs(phase_of(j) - target)) ++j;
      if (picked.empty() || picked.back() != j) picked.push_back(j);
    }
    picked.back() = n - 1;
    if (picked.size() >= 2 && picked[picked.size() - 2] == n - 1) picked.pop_back();
  }

  Timeline tl{std::move(id), std::move(sprite), {}};
  for (std::size_t i : picked) tl.keys.push_back({phase_of(i), samples[i].transform});
  tl.validate();
  return tl;
}

inline double lerp(double a, double b, double u) { return a + (b - a) * u; }

/// Rotation from a toward b along the shorter way round the circle.
inline double lerp_angle(double a, double b, double u) {
  const double d = std::remainder(b - a, 2.0 * std::numbers::pi);
  return a + d * u;
}

/// Piecewise-linear evaluation; phases outside [0, 1] (and NaN) are clamped.
/// Returns the keyframe transform itself when the phase hits a keyframe.
inline Transform evaluate_timeline(const Timeline& tl, double phase) {
  require(tl.keys.size() >= 2, "timeline '" + tl.id + "' has fewer than 2 keyframes");
  if (!(phase > 0.0)) phase = 0.0;
  if (phase > 1.0) phase = 1.0;
  const auto it = std::lower_bound(tl.keys.begin(), tl.keys.end(), phase,
                                   [](const Keyframe& k, double p) { return k.phase < p; });
  if (it != tl.keys.end() && it->phase == phase) return it->transform;
  const Keyframe& b = *it;
  const Keyframe& a = *(it - 1);
  const double u = (phase - a.phase) / (b.phase - a.phase);
  const Transform &x = a.transform, &y = b.transform;
  return {lerp(x.sx, y.sx, u), lerp(x.sy, y.sy, u), lerp_angle(x.rot, y.rot, u), lerp(x.tx, y.tx, u),
          lerp(x.ty, y.ty, u)};
}

}  // namespace tobe::feedback
