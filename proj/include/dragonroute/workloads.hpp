#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "dragonroute/modes.hpp"
#include "dragonroute/policy.hpp"
#include "dragonroute/topology.hpp"

namespace dragonroute {

struct RankMismatch : std::invalid_argument {
  explicit RankMismatch(const std::string& what) : std::invalid_argument(what) {}
};

// How the job's ranks are spread over the machine, from densest to most
// dispersed. One rank per node throughout.
enum class PlacementClass : std::uint8_t {
  InterNode,     // all ranks under one router
  InterBlade,    // one chassis, distinct blades first
  InterChassis,  // one group, spread over its chassis
  InterGroup,    // round-robin over groups
  Scattered,     // seeded shuffle of the whole machine
};

const char* to_string(PlacementClass c);
std::optional<PlacementClass> parse_placement(std::string_view s);

struct AllocationSpec {
  std::uint32_t ranks = 2;
  PlacementClass placement = PlacementClass::InterGroup;
  std::uint64_t seed = 0;
};

struct Allocation {
  std::vector<std::uint32_t> nodes;  // nodes[rank] = node index
  PlacementClass placement = PlacementClass::InterGroup;
  std::uint64_t hash() const;
};

// Deterministic in (topology, spec). Throws ConfigError when the
// placement cannot host that many ranks.
Allocation allocate(const Topology& topo, const AllocationSpec& spec);

enum class PatternKind : std::uint8_t {
  PingPong,
  Allreduce,
  Alltoall,
  Barrier,
  Broadcast,
  Halo3d,
  Sweep3d,
};

const char* to_string(PatternKind k);
std::optional<PatternKind> parse_pattern(std::string_view s);

struct TrafficPattern {
  PatternKind kind = PatternKind::PingPong;
  std::uint64_t size_bytes = 4096;  // per message (allreduce: whole vector)
  std::uint32_t iterations = 1;
  std::uint64_t think_time = 0;  // cycles between a dependency landing and the send
  std::array<std::uint32_t, 3> grid = {0, 0, 0};  // halo3d/sweep3d; 0 = pick for me
  std::uint32_t sweep_blocks = 4;                 // wavefront pipeline depth
};

// One planned transfer in rank space. Depends-on ids always point at
// earlier entries, so plan order is already a valid topological order.
struct PlanMessage {
  std::uint32_t id = 0;
  std::uint32_t src_rank = 0, dst_rank = 0;
  std::uint64_t size_bytes = 0;
  std::uint32_t iteration = 0;
  std::vector<std::uint32_t> deps;
};

struct InjectionPlan {
  PatternKind kind = PatternKind::PingPong;
  std::uint32_t ranks = 0;
  std::uint32_t iterations = 0;
  std::vector<PlanMessage> messages;
};

// Throws RankMismatch when the pattern cannot run on `ranks` ranks.
InjectionPlan schedule(const TrafficPattern& pat, std::uint32_t ranks);

// Pick a 3D (or 2D: z==1) rank grid as close to cubic as possible.
std::array<std::uint32_t, 3> factor_grid(std::uint32_t ranks, bool three_d);

// How routing modes attach to a plan.
struct RoutingPlan {
  enum class Kind : std::uint8_t { Static, Alternation, Policy } kind = Kind::Static;
  RoutingMode static_mode = RoutingMode::Adaptive0;
  std::vector<RoutingMode> alternation;  // iteration i uses alternation[i % size]
  PolicyConfig policy;
};

struct AttachedPlan {
  InjectionPlan plan;
  RoutingPlan routing;
  // Static / alternation: resolved per message. Policy: empty, the
  // harness asks the per-sender policy state at injection time.
  std::vector<RoutingMode> resolved_modes;
};

AttachedPlan attach_routing(InjectionPlan plan, RoutingPlan routing);

}  // namespace dragonroute
