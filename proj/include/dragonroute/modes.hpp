#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace dragonroute {

// Routing mode selected per message (and re-evaluated per hop for the
// adaptive family until a packet takes its first global link).
enum class RoutingMode : std::uint8_t {
  Adaptive0,  // adaptive, no bias toward minimal paths
  Adaptive1,  // adaptive, bias grows with hops already taken
  Adaptive2,  // adaptive, constant low bias
  Adaptive3,  // adaptive, constant high bias
  MinHash,    // minimal path picked by flow hash
  NminHash,   // non-minimal path picked by flow hash
  InOrder,    // one minimal path pinned per (src, dst)
};

inline constexpr RoutingMode kAllRoutingModes[] = {
    RoutingMode::Adaptive0, RoutingMode::Adaptive1, RoutingMode::Adaptive2,
    RoutingMode::Adaptive3, RoutingMode::MinHash,   RoutingMode::NminHash,
    RoutingMode::InOrder,
};

constexpr const char* to_string(RoutingMode m) {
  switch (m) {
    case RoutingMode::Adaptive0: return "ADAPTIVE_0";
    case RoutingMode::Adaptive1: return "ADAPTIVE_1";
    case RoutingMode::Adaptive2: return "ADAPTIVE_2";
    case RoutingMode::Adaptive3: return "ADAPTIVE_3";
    case RoutingMode::MinHash: return "MIN_HASH";
    case RoutingMode::NminHash: return "NMIN_HASH";
    case RoutingMode::InOrder: return "IN_ORDER";
  }
  return "?";
}

constexpr std::optional<RoutingMode> parse_routing_mode(std::string_view s) {
  for (RoutingMode m : kAllRoutingModes)
    if (s == to_string(m)) return m;
  return std::nullopt;
}

constexpr bool is_adaptive(RoutingMode m) {
  return m == RoutingMode::Adaptive0 || m == RoutingMode::Adaptive1 ||
         m == RoutingMode::Adaptive2 || m == RoutingMode::Adaptive3;
}

// Bias added to the congestion estimate of non-minimal route candidates,
// in flit-cycle congestion units.
struct BiasProfile {
  double low_bias = 5.0;    // ADAPTIVE_2
  double high_bias = 20.0;  // ADAPTIVE_3
  double imb_step = 5.0;    // ADAPTIVE_1: step * (hops_taken + 1)
};

}  // namespace dragonroute
