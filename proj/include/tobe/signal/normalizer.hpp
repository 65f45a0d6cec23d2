#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <utility>
#include <variant>

#include "tobe/core.hpp"

namespace tobe::signal {

/// Maps raw metric values to [0, 1].
class Normalizer {
 public:
  struct Fixed {
    double min = 0.0;
    double max = 1.0;
  };
  /// Min/max over the trailing `window_s`. `margin` is the fraction of the
  /// observed spread at each end that saturates to 0 or 1, so the current
  /// extremes read exactly 0 and 1.
  struct RollingMinMax {
    double window_s = 60.0;
    double margin = 0.05;
  };
  struct Logistic {
    double center = 0.0;
    double slope = 1.0;
  };
  using Method = std::variant<Fixed, RollingMinMax, Logistic>;

  Normalizer() : Normalizer(RollingMinMax{}) {}
  explicit Normalizer(Method m) : method_(m) {
    if (const auto* f = std::get_if<Fixed>(&method_))
      require_config(f->min < f->max, "fixed normalizer requires min < max");
    if (const auto* r = std::get_if<RollingMinMax>(&method_))
      require_config(r->window_s > 0.0 && r->margin >= 0.0 && r->margin < 0.5,
                     "rolling normalizer needs window > 0 and margin in [0, 0.5)");
  }

  static Normalizer fixed(double min, double max) { return Normalizer(Fixed{min, max}); }
  static Normalizer rolling(double window_s = 60.0, double margin = 0.05) {
    return Normalizer(RollingMinMax{window_s, margin});
  }
  static Normalizer logistic(double center, double slope) {
    return Normalizer(Logistic{center, slope});
  }

  const Method& method() const { return method_; }

  double operator()(double raw, double t) { return normalize(raw, t); }

  double normalize(double raw, double t) {
    return std::clamp(std::visit([&](auto& m) { return apply(m, raw, t); }, method_), 0.0, 1.0);
  }

 private:
  double apply(const Fixed& f, double raw, double) const { return (raw - f.min) / (f.max - f.min); }

  double apply(const Logistic& l, double raw, double) const {
    return 1.0 / (1.0 + std::exp(-l.slope * (raw - l.center)));
  }

  double apply(const RollingMinMax& r, double raw, double t) {
    history_.emplace_back(t, raw);
    while (!history_.empty() && history_.front().first < t - r.window_s) history_.pop_front();
    auto [lo_it, hi_it] = std::minmax_element(
        history_.begin(), history_.end(),
        [](const auto& a, const auto& b) { return a.second < b.second; });
    const double spread = hi_it->second - lo_it->second;
    if (!(spread > 0.0)) return 0.5;
    const double lo = lo_it->second + r.margin * spread;
    const double hi = hi_it->second - r.margin * spread;
    return (raw - lo) / (hi - lo);
  }

  Method method_;
  std::deque<std::pair<double, double>> history_;
};

}  // namespace tobe::signal
