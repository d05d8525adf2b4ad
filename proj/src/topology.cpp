#include "dragonroute/topology.hpp"

#include <algorithm>
#include <cstddef>
#include <deque>
#include <set>

#include "dragonroute/rng.hpp"

namespace dragonroute {

namespace {
constexpr std::uint16_t kUnreached = 0xffff;
constexpr std::uint32_t kMaxRouters = 4096;  // keeps the distance table <= 32 MiB
}  // namespace

std::uint32_t Topology::router_index(RouterCoords c) const {
  return (c.group * cfg_.chassis_per_group + c.chassis) * cfg_.blades_per_chassis + c.blade;
}

RouterCoords Topology::router_coords(std::uint32_t router) const {
  RouterCoords c;
  c.blade = router % cfg_.blades_per_chassis;
  router /= cfg_.blades_per_chassis;
  c.chassis = router % cfg_.chassis_per_group;
  c.group = router / cfg_.chassis_per_group;
  return c;
}

std::uint32_t Topology::node_index(NodeCoords c) const {
  return router_index({c.group, c.chassis, c.blade}) * cfg_.nodes_per_router + c.node;
}

NodeCoords Topology::node_coords(std::uint32_t node) const {
  RouterCoords r = router_coords(node / cfg_.nodes_per_router);
  return {r.group, r.chassis, r.blade, node % cfg_.nodes_per_router};
}

std::uint32_t Topology::node_router(std::uint32_t node) const {
  return node / cfg_.nodes_per_router;
}

std::span<const std::uint32_t> Topology::neighbors(std::uint32_t router) const {
  return {adj_flat_.data() + adj_offset_[router],
          adj_flat_.data() + adj_offset_[router + 1]};
}

bool Topology::linked(std::uint32_t a, std::uint32_t b) const {
  auto nb = neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), b);
}

std::uint32_t Topology::edge_index(std::uint32_t from, std::uint32_t to) const {
  auto nb = neighbors(from);
  auto it = std::lower_bound(nb.begin(), nb.end(), to);
  if (it == nb.end() || *it != to)
    throw std::invalid_argument("edge_index: routers are not linked");
  return adj_offset_[from] + static_cast<std::uint32_t>(it - nb.begin());
}

std::pair<std::uint32_t, std::uint32_t> Topology::edge_endpoints(std::uint32_t edge) const {
  return {edge_from_[edge], edge_to_[edge]};
}

LinkKind Topology::link_kind(std::uint32_t from, std::uint32_t to) const {
  RouterCoords a = router_coords(from), b = router_coords(to);
  if (a.group != b.group) return LinkKind::Global;
  if (a.chassis == b.chassis) return LinkKind::IntraChassis;
  return LinkKind::IntraGroupRow;
}

LinkKind Topology::edge_kind(std::uint32_t edge) const {
  return link_kind(edge_from_[edge], edge_to_[edge]);
}

std::uint16_t Topology::distance(std::uint32_t src, std::uint32_t dst) const {
  return dist_[static_cast<std::size_t>(src) * router_count() + dst];
}

Topology Topology::build(const TopologyConfig& cfg) {
  if (cfg.groups == 0 || cfg.chassis_per_group == 0 || cfg.blades_per_chassis == 0)
    throw ConfigError("topology: all tier sizes must be at least 1");
  if (cfg.nodes_per_router == 0)
    throw ConfigError("topology: need at least one node per router");
  if (cfg.queue_capacity == 0) throw ConfigError("topology: queue_capacity must be positive");
  if (cfg.link_cycle_cost == 0) throw ConfigError("topology: link_cycle_cost must be positive");
  if (cfg.router_count() > kMaxRouters)
    throw ConfigError("topology: router count exceeds supported maximum");
  if (cfg.groups > 1) {
    if (cfg.global_links_per_pair == 0)
      throw ConfigError("topology: connected groups need global_links_per_pair >= 1");
    std::uint64_t tiles_needed =
        static_cast<std::uint64_t>(cfg.groups - 1) * cfg.global_links_per_pair;
    std::uint64_t tiles_avail =
        static_cast<std::uint64_t>(cfg.routers_per_group()) * cfg.global_links_per_router;
    if (tiles_needed > tiles_avail)
      throw ConfigError("topology: global link budget too small for all-to-all groups");
  }

  Topology t;
  t.cfg_ = cfg;
  const std::uint32_t R = cfg.router_count();
  const std::uint32_t rpg = cfg.routers_per_group();

  std::vector<std::set<std::uint32_t>> adj(R);
  auto link = [&](std::uint32_t a, std::uint32_t b) {
    adj[a].insert(b);
    adj[b].insert(a);
  };

  for (std::uint32_t g = 0; g < cfg.groups; ++g) {
    // all-to-all inside each chassis
    for (std::uint32_t c = 0; c < cfg.chassis_per_group; ++c)
      for (std::uint32_t b1 = 0; b1 < cfg.blades_per_chassis; ++b1)
        for (std::uint32_t b2 = b1 + 1; b2 < cfg.blades_per_chassis; ++b2)
          link(t.router_index({g, c, b1}), t.router_index({g, c, b2}));
    // each blade position forms a row across the chassis of its group
    for (std::uint32_t b = 0; b < cfg.blades_per_chassis; ++b)
      for (std::uint32_t c1 = 0; c1 < cfg.chassis_per_group; ++c1)
        for (std::uint32_t c2 = c1 + 1; c2 < cfg.chassis_per_group; ++c2)
          link(t.router_index({g, c1, b}), t.router_index({g, c2, b}));
  }

  // Global tier: every group pair gets global_links_per_pair links whose
  // endpoints rotate round-robin through each group's routers, so tiles
  // spread evenly.
  t.group_links_.assign(static_cast<std::size_t>(cfg.groups) * cfg.groups, {});
  std::vector<std::uint32_t> next_tile(cfg.groups, 0);
  std::vector<std::uint32_t> tile_load(R, 0);
  for (std::uint32_t g1 = 0; g1 < cfg.groups; ++g1) {
    for (std::uint32_t g2 = g1 + 1; g2 < cfg.groups; ++g2) {
      for (std::uint32_t m = 0; m < cfg.global_links_per_pair; ++m) {
        std::uint32_t r1 = g1 * rpg + (next_tile[g1]++ % rpg);
        std::uint32_t r2 = g2 * rpg + (next_tile[g2]++ % rpg);
        link(r1, r2);
        ++tile_load[r1];
        ++tile_load[r2];
        t.group_links_[static_cast<std::size_t>(g1) * cfg.groups + g2].emplace_back(r1, r2);
        t.group_links_[static_cast<std::size_t>(g2) * cfg.groups + g1].emplace_back(r2, r1);
      }
    }
  }
  for (std::uint32_t r = 0; r < R; ++r)
    if (tile_load[r] > cfg.global_links_per_router)
      throw ConfigError("topology: a router exceeded its global link budget");

  t.adj_offset_.assign(R + 1, 0);
  for (std::uint32_t r = 0; r < R; ++r)
    t.adj_offset_[r + 1] = t.adj_offset_[r] + static_cast<std::uint32_t>(adj[r].size());
  t.adj_flat_.reserve(t.adj_offset_[R]);
  t.edge_from_.reserve(t.adj_offset_[R]);
  t.edge_to_.reserve(t.adj_offset_[R]);
  for (std::uint32_t r = 0; r < R; ++r) {
    for (std::uint32_t nb : adj[r]) {  // std::set iterates ascending
      t.adj_flat_.push_back(nb);
      t.edge_from_.push_back(r);
      t.edge_to_.push_back(nb);
    }
  }

  t.dist_.assign(static_cast<std::size_t>(R) * R, kUnreached);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t src = 0; src < static_cast<std::int64_t>(R); ++src) {
    auto* row = t.dist_.data() + static_cast<std::size_t>(src) * R;
    row[src] = 0;
    std::deque<std::uint32_t> frontier{static_cast<std::uint32_t>(src)};
    while (!frontier.empty()) {
      std::uint32_t cur = frontier.front();
      frontier.pop_front();
      for (std::uint32_t nb : t.neighbors(cur)) {
        if (row[nb] == kUnreached) {
          row[nb] = static_cast<std::uint16_t>(row[cur] + 1);
          frontier.push_back(nb);
        }
      }
    }
  }
  for (std::uint32_t r = 0; r < R; ++r)
    if (t.distance(0, r) == kUnreached)
      throw ConfigError("topology: network is not connected");

  return t;
}

std::vector<Path> Topology::minimal_paths(std::uint32_t src, std::uint32_t dst,
                                          std::size_t limit) const {
  std::vector<Path> out;
  if (limit == 0) return out;
  std::vector<std::uint32_t> cur{src};
  auto descend = [&](auto&& self, std::uint32_t r) -> bool {
    if (r == dst) {
      out.push_back(Path{cur, PathClass::Minimal, std::nullopt});
      return out.size() < limit;
    }
    for (std::uint32_t nb : neighbors(r)) {
      if (distance(nb, dst) + 1 == distance(r, dst)) {
        cur.push_back(nb);
        bool keep_going = self(self, nb);
        cur.pop_back();
        if (!keep_going) return false;
      }
    }
    return true;
  };
  descend(descend, src);
  return out;
}

Path Topology::sample_minimal_path(std::uint32_t src, std::uint32_t dst,
                                   std::mt19937_64& rng) const {
  Path p;
  p.hops.push_back(src);
  std::uint32_t cur = src;
  std::vector<std::uint32_t> open;
  while (cur != dst) {
    open.clear();
    for (std::uint32_t nb : neighbors(cur))
      if (distance(nb, dst) + 1 == distance(cur, dst)) open.push_back(nb);
    cur = open[rng_below(rng, open.size())];
    p.hops.push_back(cur);
  }
  return p;
}

std::vector<std::uint32_t> Topology::eligible_intermediate_groups(
    std::uint32_t src_group, std::uint32_t dst_group) const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t g = 0; g < cfg_.groups; ++g)
    if (g != src_group && g != dst_group) out.push_back(g);
  return out;
}

std::span<const std::pair<std::uint32_t, std::uint32_t>> Topology::group_links(
    std::uint32_t from_group, std::uint32_t to_group) const {
  return group_links_[static_cast<std::size_t>(from_group) * cfg_.groups + to_group];
}

void Topology::append_intra_group(std::vector<std::uint32_t>& hops, std::uint32_t from,
                                  std::uint32_t to, std::mt19937_64* rng) const {
  if (from == to) return;
  if (linked(from, to)) {
    hops.push_back(to);
    return;
  }
  // from and to differ in chassis and blade: bend at the router sharing
  // the chassis of one endpoint and the blade row of the other.
  RouterCoords a = router_coords(from), b = router_coords(to);
  RouterCoords bend{a.group, a.chassis, b.blade};
  if (rng && rng_below(*rng, 2)) bend = {a.group, b.chassis, a.blade};
  hops.push_back(router_index(bend));
  hops.push_back(to);
}

Path Topology::sample_nonminimal_path_via(std::uint32_t src, std::uint32_t dst,
                                          std::uint32_t intermediate_group,
                                          std::mt19937_64& rng) const {
  std::uint32_t sg = router_group(src), dg = router_group(dst);
  if (intermediate_group >= cfg_.groups || intermediate_group == sg ||
      intermediate_group == dg)
    throw std::invalid_argument("non-minimal detour group must be a distinct third group");
  auto out_links = group_links(sg, intermediate_group);
  auto in_links = group_links(intermediate_group, dg);
  auto [gw_out, entry] = out_links[rng_below(rng, out_links.size())];
  auto [gw_back, landing] = in_links[rng_below(rng, in_links.size())];

  Path p;
  p.path_class = PathClass::NonMinimal;
  p.intermediate_group = intermediate_group;
  p.hops.push_back(src);
  append_intra_group(p.hops, src, gw_out, &rng);
  p.hops.push_back(entry);
  append_intra_group(p.hops, entry, gw_back, &rng);
  p.hops.push_back(landing);
  append_intra_group(p.hops, landing, dst, &rng);
  return p;
}

Path Topology::sample_nonminimal_path(std::uint32_t src, std::uint32_t dst,
                                      std::mt19937_64& rng) const {
  auto groups = eligible_intermediate_groups(router_group(src), router_group(dst));
  if (groups.empty()) throw NoIntermediateGroup();
  std::uint32_t gi = groups[rng_below(rng, groups.size())];
  return sample_nonminimal_path_via(src, dst, gi, rng);
}

std::uint64_t Topology::adjacency_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto feed = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  feed(cfg_.groups);
  feed(cfg_.chassis_per_group);
  feed(cfg_.blades_per_chassis);
  feed(cfg_.nodes_per_router);
  for (std::uint32_t v : adj_offset_) feed(v);
  for (std::uint32_t v : adj_flat_) feed(v);
  return h;
}

}  // namespace dragonroute
