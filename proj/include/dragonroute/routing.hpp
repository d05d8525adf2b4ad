#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "dragonroute/modes.hpp"
#include "dragonroute/topology.hpp"

namespace dragonroute {

struct EmptyTrace : std::invalid_argument {
  EmptyTrace() : std::invalid_argument("minimal fraction of an empty route trace") {}
};

// What a router can see when costing a candidate: occupancy of its own
// output queues plus the credit state of the first link of the path.
class CongestionView {
 public:
  virtual ~CongestionView() = default;
  virtual double queued_flits(std::uint32_t edge) const = 0;       // waiting at the tail router
  virtual double credits_available(std::uint32_t edge) const = 0;  // credits left for the edge
  virtual double queue_capacity() const = 0;
};

// Idle network; adaptive choices on it collapse to pure bias comparison.
class ZeroCongestion final : public CongestionView {
 public:
  explicit ZeroCongestion(double capacity) : capacity_(capacity) {}
  double queued_flits(std::uint32_t) const override { return 0.0; }
  double credits_available(std::uint32_t) const override { return capacity_; }
  double queue_capacity() const override { return capacity_; }

 private:
  double capacity_;
};

// Local congestion of the first link, scaled by path length: flits
// already queued for that link plus credits consumed downstream, times
// the number of hops the packet would occupy.
double estimate_congestion(const Topology& topo, const CongestionView& view, const Path& path);

struct RouteCandidate {
  Path path;
  double cost = 0.0;         // congestion estimate
  double biased_cost = 0.0;  // cost + bias when non-minimal
};

struct RouteDecision {
  Path path;
  std::vector<RouteCandidate> candidates;
  std::size_t chosen_index = 0;
  double bias_applied = 0.0;          // bias added to non-minimal candidates
  bool degraded_minimal_only = false; // no third group; fell back to minimal set
};

struct RoutingContext {
  const Topology* topo = nullptr;
  const CongestionView* congestion = nullptr;
  BiasProfile bias;
  std::size_t enumeration_limit = 16;  // minimal-path pool size for sampling
};

// A detour visits one intermediate group: at most 2 local hops, a global
// hop, up to 2 local hops, a global hop, and 2 local hops again. Adaptive
// re-evaluation along the way must not stretch a packet's walk past this
// structural bound, or mutually congesting packets could orbit their
// source group forever; once the budget is spent only shortest-path
// candidates remain and every further hop strictly approaches the
// destination.
inline constexpr std::uint32_t kDetourHopBudget = 8;

// Longest walk any packet can take: the full detour budget above followed
// by a worst-case shortest path (2 local hops, a global hop, 2 local
// hops). The simulator sizes its per-hop buffer classes off this bound.
inline constexpr std::uint32_t kMaxWalkHops = kDetourHopBudget + 5;

// Pick a route for one packet standing at src_router. Adaptive modes
// sample two minimal and two non-minimal candidates and take the lowest
// biased cost (ties resolve to the earliest candidate, minimal ones
// listed first). Hash modes derive everything from flow_key and consume
// no rng draws. NMIN_HASH degrades to minimal candidates when no third
// group exists; the adaptive modes do the same.
RouteDecision choose_route(const RoutingContext& ctx, RoutingMode mode,
                           std::uint32_t src_router, std::uint32_t dst_router,
                           std::uint32_t hops_taken, std::uint64_t flow_key,
                           std::mt19937_64& rng);

double bias_for(const BiasProfile& bias, RoutingMode mode, std::uint32_t hops_taken);

double minimal_fraction(std::span<const PathClass> classes);
double minimal_fraction(std::span<const RouteDecision> decisions);

}  // namespace dragonroute
