#include "dragonroute/policy.hpp"

namespace dragonroute {

namespace {
constexpr int kDefault = static_cast<int>(PolicyArm::Default);
constexpr int kHighBias = static_cast<int>(PolicyArm::HighBias);
}  // namespace

RoutingMode arm_mode(const PolicyConfig& cfg, PolicyArm arm) {
  if (arm == PolicyArm::HighBias) return RoutingMode::Adaptive3;
  // All-to-all phases drown a constant-bias default; the growing bias
  // copes better there.
  return cfg.alltoall_phase ? RoutingMode::Adaptive1 : RoutingMode::Adaptive0;
}

PolicyArm arm_of(const PolicyConfig&, RoutingMode mode) {
  return mode == RoutingMode::Adaptive3 ? PolicyArm::HighBias : PolicyArm::Default;
}

std::pair<double, double> estimate_counterpart(double latency, double stall_ratio,
                                               double latency_scale, double stall_scale) {
  return {latency * latency_scale, stall_ratio * stall_scale};
}

RoutingMode select_routing(PolicyState& st, std::uint64_t size_bytes) {
  st.evaluated = false;
  st.accumulated_bytes += size_bytes;
  if (st.accumulated_bytes < st.cfg.trigger_bytes)
    return arm_mode(st.cfg, PolicyArm::HighBias);  // small traffic: stay minimal
  st.accumulated_bytes = 0;
  st.evaluated = true;

  double lscale = st.cfg.latency_scale > 0.0 ? st.cfg.latency_scale : 1.0;
  double sscale = st.cfg.stall_scale > 0.0 ? st.cfg.stall_scale : 1.0;
  // Only the arm currently running produces fresh counters; when the
  // other arm's reading is missing or expired, scale it from this one.
  if (st.current == PolicyArm::Default) {
    if (!st.observed[kHighBias] || st.age[kHighBias] > st.cfg.staleness_limit) {
      auto [l, s] =
          estimate_counterpart(st.latency[kDefault], st.stall_ratio[kDefault], lscale, sscale);
      st.latency[kHighBias] = l;
      st.stall_ratio[kHighBias] = s;
    }
  } else {
    if (!st.observed[kDefault] || st.age[kDefault] > st.cfg.staleness_limit) {
      st.latency[kDefault] = st.latency[kHighBias] / lscale;
      st.stall_ratio[kDefault] = st.stall_ratio[kHighBias] / sscale;
    }
  }

  // Pick the arm whose predicted transfer time is lower. Cross-multiplied
  // so it is exact for any sign of the deltas; ties keep the default arm.
  PacketizeDims dims = packetize(size_bytes, RdmaKind::Put);
  double window = (static_cast<double>(dims.packets) + 512.0) / 1024.0;
  double flits = static_cast<double>(dims.flits);
  double latency_gain = st.latency[kDefault] - st.latency[kHighBias];
  double stall_cost = st.stall_ratio[kHighBias] - st.stall_ratio[kDefault];
  PolicyArm vote;
  if (stall_cost == 0.0)
    vote = st.latency[kHighBias] < st.latency[kDefault] ? PolicyArm::HighBias
                                                        : PolicyArm::Default;
  else
    vote = flits * stall_cost < window * latency_gain ? PolicyArm::HighBias
                                                      : PolicyArm::Default;

  if (!st.cfg.hysteresis || vote == st.current) {
    st.current = vote;
    st.pending_count = 0;
  } else if (st.pending_count > 0 && st.pending_vote == vote) {
    if (++st.pending_count >= 2) {
      st.current = vote;
      st.pending_count = 0;
    }
  } else {
    st.pending_vote = vote;
    st.pending_count = 1;
  }

  st.age[kDefault]++;
  st.age[kHighBias]++;
  return arm_mode(st.cfg, st.current);
}

void record_observation(PolicyState& st, RoutingMode mode, double latency,
                        double stall_ratio) {
  int a = arm_of(st.cfg, mode) == PolicyArm::HighBias ? kHighBias : kDefault;
  st.latency[a] = latency;
  st.stall_ratio[a] = stall_ratio;
  st.observed[a] = true;
  st.age[a] = 0;
}

}  // namespace dragonroute
