#pragma once

#include <cstdint>
#include <utility>

#include "dragonroute/counters.hpp"
#include "dragonroute/modes.hpp"

namespace dragonroute {

// Runtime policy that flips each sender between two routing arms:
// the default adaptive mode and the high-bias (strongly minimal) mode.
// Small transfers always use the high-bias arm; once enough bytes have
// accumulated the NIC counters are consulted and the arm whose predicted
// transfer time is lower wins.
struct PolicyConfig {
  std::uint64_t trigger_bytes = 4096;   // evaluate only after this many bytes
  std::uint32_t staleness_limit = 32;   // evaluations before a reading expires
  double latency_scale = 1.0;  // high-bias latency estimated as default * scale
  double stall_scale = 1.0;    // high-bias stall ratio estimated as default * scale
  bool hysteresis = false;     // require two consecutive votes before switching
  std::uint64_t counter_read_penalty = 0;  // cycles charged per evaluation
  bool alltoall_phase = false;  // default arm prefers growing-bias adaptivity
};

enum class PolicyArm : std::uint8_t { Default, HighBias };

struct PolicyState {
  PolicyConfig cfg;
  PolicyArm current = PolicyArm::Default;
  double latency[2] = {0.0, 0.0};      // indexed by PolicyArm
  double stall_ratio[2] = {0.0, 0.0};
  bool observed[2] = {false, false};
  std::uint32_t age[2] = {0, 0};       // evaluations since each arm was measured
  std::uint64_t accumulated_bytes = 0;
  PolicyArm pending_vote = PolicyArm::Default;  // hysteresis bookkeeping
  std::uint32_t pending_count = 0;
  bool evaluated = false;  // last select consulted the counters
};

RoutingMode arm_mode(const PolicyConfig& cfg, PolicyArm arm);
PolicyArm arm_of(const PolicyConfig& cfg, RoutingMode mode);

// Estimate one arm's model inputs from the other's reading.
std::pair<double, double> estimate_counterpart(double latency, double stall_ratio,
                                               double latency_scale, double stall_scale);

// Decide the routing mode for the next transfer of `size_bytes`.
// Mutates the state: accumulates bytes, refreshes stale readings from
// their counterpart, and tracks hysteresis votes.
RoutingMode select_routing(PolicyState& st, std::uint64_t size_bytes);

// Feed a finished transfer's measurement back into the state.
void record_observation(PolicyState& st, RoutingMode mode, double latency,
                        double stall_ratio);

}  // namespace dragonroute
