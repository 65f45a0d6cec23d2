#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "tobe/core.hpp"

namespace tobe::metrics {

/// The eight-electrode headband montage and the electrode groups each EEG
/// metric reads from.
struct ChannelLayout {
  static constexpr std::array<std::string_view, 8> kLabels{"O1", "P7", "F7", "FP1",
                                                           "F8", "T8", "P8", "O2"};

  static constexpr std::array<std::string_view, 4> kFrontal{"F7", "FP1", "F8", "T8"};
  static constexpr std::array<std::string_view, 4> kParietalOccipital{"P8", "P7", "O2", "O1"};
  static constexpr std::array<std::string_view, 3> kFront{"FP1", "F7", "F8"};
  static constexpr std::array<std::string_view, 3> kRear{"O1", "P7", "P8"};
  static constexpr std::array<std::string_view, 3> kLeft{"F7", "P7", "O1"};
  static constexpr std::array<std::string_view, 3> kRight{"F8", "P8", "O2"};

  static std::vector<std::string> labels() { return {kLabels.begin(), kLabels.end()}; }

  static std::size_t index_of(std::string_view label) {
    const auto it = std::find(kLabels.begin(), kLabels.end(), label);
    require(it != kLabels.end(), "unknown electrode " + std::string(label));
    return static_cast<std::size_t>(it - kLabels.begin());
  }

  template <std::size_t N>
  static std::vector<std::size_t> indices(const std::array<std::string_view, N>& group) {
    std::vector<std::size_t> out;
    for (auto l : group) out.push_back(index_of(l));
    return out;
  }
};

}  // namespace tobe::metrics
