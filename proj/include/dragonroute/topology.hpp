#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dragonroute {

struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};
struct NoIntermediateGroup : std::runtime_error {
  NoIntermediateGroup()
      : std::runtime_error("non-minimal route needs a third group to detour through") {}
};

// Dimensions and per-link cost knobs of the three-tier network:
// groups of chassis of blades, one router per blade, a few NICs each.
struct TopologyConfig {
  std::uint32_t groups = 4;
  std::uint32_t chassis_per_group = 2;
  std::uint32_t blades_per_chassis = 4;
  std::uint32_t nodes_per_router = 2;
  std::uint32_t global_links_per_router = 10;  // budget cap per router
  std::uint32_t global_links_per_pair = 1;     // parallel links between two groups
  std::uint32_t queue_capacity = 64;           // flits per router input queue
  std::uint32_t link_cycle_cost = 10;          // cycles per router-to-router hop

  std::uint32_t routers_per_group() const { return chassis_per_group * blades_per_chassis; }
  std::uint32_t router_count() const { return groups * routers_per_group(); }
  std::uint32_t node_count() const { return router_count() * nodes_per_router; }
};

struct RouterCoords {
  std::uint32_t group = 0, chassis = 0, blade = 0;
  bool operator==(const RouterCoords&) const = default;
};
struct NodeCoords {
  std::uint32_t group = 0, chassis = 0, blade = 0, node = 0;
  bool operator==(const NodeCoords&) const = default;
};

enum class LinkKind : std::uint8_t { IntraChassis, IntraGroupRow, Global };
enum class PathClass : std::uint8_t { Minimal, NonMinimal };

// Router-level route: hops[0] is the source router, hops.back() the
// destination router. hop_count() is the number of links traversed.
struct Path {
  std::vector<std::uint32_t> hops;
  PathClass path_class = PathClass::Minimal;
  std::optional<std::uint32_t> intermediate_group;

  std::size_t hop_count() const { return hops.empty() ? 0 : hops.size() - 1; }
};

class Topology {
 public:
  static Topology build(const TopologyConfig& cfg);  // throws ConfigError

  const TopologyConfig& config() const { return cfg_; }
  std::uint32_t router_count() const { return cfg_.router_count(); }
  std::uint32_t node_count() const { return cfg_.node_count(); }

  std::uint32_t router_index(RouterCoords c) const;
  RouterCoords router_coords(std::uint32_t router) const;
  std::uint32_t node_index(NodeCoords c) const;
  NodeCoords node_coords(std::uint32_t node) const;
  std::uint32_t node_router(std::uint32_t node) const;
  std::uint32_t router_group(std::uint32_t router) const {
    return router / cfg_.routers_per_group();
  }

  std::span<const std::uint32_t> neighbors(std::uint32_t router) const;
  bool linked(std::uint32_t a, std::uint32_t b) const;

  // Directed router-to-router edges, densely numbered; the unit the
  // engine keys queues, credits and congestion estimates on.
  std::uint32_t edge_count() const { return static_cast<std::uint32_t>(edge_to_.size()); }
  std::uint32_t edge_index(std::uint32_t from, std::uint32_t to) const;
  std::pair<std::uint32_t, std::uint32_t> edge_endpoints(std::uint32_t edge) const;
  LinkKind edge_kind(std::uint32_t edge) const;
  LinkKind link_kind(std::uint32_t from, std::uint32_t to) const;

  std::uint16_t distance(std::uint32_t src, std::uint32_t dst) const;

  // All shortest router paths src -> dst in deterministic (ascending
  // neighbor) order, cut off at `limit`.
  std::vector<Path> minimal_paths(std::uint32_t src, std::uint32_t dst, std::size_t limit) const;

  // One shortest path chosen uniformly by descending the distance field.
  Path sample_minimal_path(std::uint32_t src, std::uint32_t dst, std::mt19937_64& rng) const;

  // Detour path through one intermediate group picked at random (or
  // forced). Throws NoIntermediateGroup when src and dst groups are the
  // only groups. Both endpoints in the same group also detour through a
  // foreign group.
  Path sample_nonminimal_path(std::uint32_t src, std::uint32_t dst, std::mt19937_64& rng) const;
  Path sample_nonminimal_path_via(std::uint32_t src, std::uint32_t dst,
                                  std::uint32_t intermediate_group, std::mt19937_64& rng) const;

  std::vector<std::uint32_t> eligible_intermediate_groups(std::uint32_t src_group,
                                                          std::uint32_t dst_group) const;

  // Endpoint router pairs (from-side, to-side) of the global links
  // between two groups.
  std::span<const std::pair<std::uint32_t, std::uint32_t>> group_links(
      std::uint32_t from_group, std::uint32_t to_group) const;

  std::uint64_t adjacency_hash() const;

 private:
  Topology() = default;

  void append_intra_group(std::vector<std::uint32_t>& hops, std::uint32_t from,
                          std::uint32_t to, std::mt19937_64* rng) const;

  TopologyConfig cfg_;
  std::vector<std::uint32_t> adj_flat_;      // neighbor lists, ascending
  std::vector<std::uint32_t> adj_offset_;    // router -> [offset, offset_next)
  std::vector<std::uint32_t> edge_to_;       // edge -> head router (tail via offsets)
  std::vector<std::uint32_t> edge_from_;     // edge -> tail router
  std::vector<std::uint16_t> dist_;          // router-pair hop distances
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> group_links_;
};

}  // namespace dragonroute
