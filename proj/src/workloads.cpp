#include "dragonroute/workloads.hpp"

#include <algorithm>
#include <cmath>

#include "dragonroute/rng.hpp"

namespace dragonroute {

const char* to_string(PlacementClass c) {
  switch (c) {
    case PlacementClass::InterNode: return "inter_node";
    case PlacementClass::InterBlade: return "inter_blade";
    case PlacementClass::InterChassis: return "inter_chassis";
    case PlacementClass::InterGroup: return "inter_group";
    case PlacementClass::Scattered: return "scattered";
  }
  return "?";
}

std::optional<PlacementClass> parse_placement(std::string_view s) {
  for (PlacementClass c :
       {PlacementClass::InterNode, PlacementClass::InterBlade, PlacementClass::InterChassis,
        PlacementClass::InterGroup, PlacementClass::Scattered})
    if (s == to_string(c)) return c;
  return std::nullopt;
}

const char* to_string(PatternKind k) {
  switch (k) {
    case PatternKind::PingPong: return "pingpong";
    case PatternKind::Allreduce: return "allreduce";
    case PatternKind::Alltoall: return "alltoall";
    case PatternKind::Barrier: return "barrier";
    case PatternKind::Broadcast: return "broadcast";
    case PatternKind::Halo3d: return "halo3d";
    case PatternKind::Sweep3d: return "sweep3d";
  }
  return "?";
}

std::optional<PatternKind> parse_pattern(std::string_view s) {
  for (PatternKind k :
       {PatternKind::PingPong, PatternKind::Allreduce, PatternKind::Alltoall,
        PatternKind::Barrier, PatternKind::Broadcast, PatternKind::Halo3d,
        PatternKind::Sweep3d})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

// ---- allocation --------------------------------------------------------

std::uint64_t Allocation::hash() const {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(placement) + 1);
  for (std::uint32_t n : nodes) h = hash_combine(h, n);
  return h;
}

Allocation allocate(const Topology& topo, const AllocationSpec& spec) {
  const TopologyConfig& c = topo.config();
  if (spec.ranks == 0) throw ConfigError("allocation: need at least one rank");
  if (spec.ranks > topo.node_count())
    throw ConfigError("allocation: more ranks than nodes");
  std::mt19937_64 rng(mix_seed(spec.seed, 0xa110cull));
  Allocation out;
  out.placement = spec.placement;
  out.nodes.reserve(spec.ranks);

  switch (spec.placement) {
    case PlacementClass::InterNode: {
      if (spec.ranks > c.nodes_per_router)
        throw ConfigError("allocation: inter_node placement exceeds one router's nodes");
      std::uint32_t r = static_cast<std::uint32_t>(rng_below(rng, topo.router_count()));
      for (std::uint32_t i = 0; i < spec.ranks; ++i)
        out.nodes.push_back(r * c.nodes_per_router + i);
      break;
    }
    case PlacementClass::InterBlade: {
      if (spec.ranks > c.blades_per_chassis * c.nodes_per_router)
        throw ConfigError("allocation: inter_blade placement exceeds one chassis");
      std::uint32_t g = static_cast<std::uint32_t>(rng_below(rng, c.groups));
      std::uint32_t ch = static_cast<std::uint32_t>(rng_below(rng, c.chassis_per_group));
      for (std::uint32_t i = 0; i < spec.ranks; ++i) {
        std::uint32_t blade = i % c.blades_per_chassis;
        std::uint32_t slot = i / c.blades_per_chassis;
        out.nodes.push_back(topo.node_index({g, ch, blade, slot}));
      }
      break;
    }
    case PlacementClass::InterChassis: {
      std::uint32_t per_group = c.routers_per_group() * c.nodes_per_router;
      if (spec.ranks > per_group)
        throw ConfigError("allocation: inter_chassis placement exceeds one group");
      std::uint32_t g = static_cast<std::uint32_t>(rng_below(rng, c.groups));
      for (std::uint32_t i = 0; i < spec.ranks; ++i) {
        std::uint32_t ch = i % c.chassis_per_group;
        std::uint32_t pos = i / c.chassis_per_group;
        std::uint32_t blade = pos % c.blades_per_chassis;
        std::uint32_t slot = pos / c.blades_per_chassis;
        out.nodes.push_back(topo.node_index({g, ch, blade, slot}));
      }
      break;
    }
    case PlacementClass::InterGroup: {
      // Round-robin over groups; within each group ranks fill
      // sequentially from a seeded random starting position, so repeated
      // allocations land around different routers the way successive
      // scheduler placements do.
      const std::uint32_t per_group =
          c.chassis_per_group * c.blades_per_chassis * c.nodes_per_router;
      std::vector<std::uint32_t> base(c.groups);
      for (auto& b : base) b = rng_below(rng, per_group);
      std::vector<std::uint32_t> used(c.groups, 0);
      for (std::uint32_t i = 0; i < spec.ranks; ++i) {
        std::uint32_t g = i % c.groups;
        std::uint32_t k = used[g]++;
        if (k >= per_group)
          throw ConfigError("allocation: inter_group placement ran out of nodes");
        std::uint32_t pos = (base[g] + k) % per_group;
        std::uint32_t ch = pos % c.chassis_per_group;
        pos /= c.chassis_per_group;
        std::uint32_t blade = pos % c.blades_per_chassis;
        std::uint32_t slot = pos / c.blades_per_chassis;
        out.nodes.push_back(topo.node_index({g, ch, blade, slot}));
      }
      break;
    }
    case PlacementClass::Scattered: {
      std::vector<std::uint32_t> all(topo.node_count());
      for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
      // Fisher-Yates by hand: std::shuffle draws are not pinned across
      // library implementations, and allocations must replay bit-exactly.
      for (std::size_t i = all.size() - 1; i > 0; --i)
        std::swap(all[i], all[rng_below(rng, i + 1)]);
      out.nodes.assign(all.begin(), all.begin() + spec.ranks);
      break;
    }
  }
  return out;
}

// ---- plan construction -------------------------------------------------

std::array<std::uint32_t, 3> factor_grid(std::uint32_t ranks, bool three_d) {
  std::array<std::uint32_t, 3> best = {1, 1, ranks};
  std::uint32_t best_spread = ranks;  // minimize (max - min) of the factors
  auto consider = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    std::array<std::uint32_t, 3> f = {a, b, c};
    std::sort(f.begin(), f.end());
    std::uint32_t spread = f[2] - f[0];
    if (spread < best_spread) {
      best_spread = spread;
      best = f;
    }
  };
  if (!three_d) {
    for (std::uint32_t a = 1; a * a <= ranks; ++a)
      if (ranks % a == 0) consider(1, a, ranks / a);
    return {best[1], best[2], 1};  // x, y for the 2D case
  }
  for (std::uint32_t a = 1; a * a * a <= ranks; ++a) {
    if (ranks % a) continue;
    std::uint32_t m = ranks / a;
    for (std::uint32_t b = a; b * b <= m; ++b)
      if (m % b == 0) consider(a, b, m / b);
  }
  return best;
}

namespace {

class PlanBuilder {
 public:
  PlanBuilder(InjectionPlan& plan, std::uint32_t ranks) : plan_(plan) {
    last_touch_.assign(ranks, kNoMsg);
  }

  // deps that equal kNoMsg are dropped; the sender is always chained
  // behind its previous operation.
  std::uint32_t add(std::uint32_t src, std::uint32_t dst, std::uint64_t size,
                    std::uint32_t iteration, const std::vector<std::uint32_t>& deps) {
    PlanMessage m;
    m.id = static_cast<std::uint32_t>(plan_.messages.size());
    m.src_rank = src;
    m.dst_rank = dst;
    m.size_bytes = size;
    m.iteration = iteration;
    auto push_dep = [&m](std::uint32_t d) {
      if (d == kNoMsg) return;
      if (std::find(m.deps.begin(), m.deps.end(), d) == m.deps.end()) m.deps.push_back(d);
    };
    push_dep(last_touch_[src]);
    for (std::uint32_t d : deps) push_dep(d);
    std::sort(m.deps.begin(), m.deps.end());
    last_touch_[src] = m.id;
    last_touch_[dst] = m.id;
    plan_.messages.push_back(std::move(m));
    return plan_.messages.back().id;
  }

  std::uint32_t last_touch(std::uint32_t rank) const { return last_touch_[rank]; }

  static constexpr std::uint32_t kNoMsg = 0xffffffffu;

 private:
  InjectionPlan& plan_;
  std::vector<std::uint32_t> last_touch_;
};

constexpr std::uint32_t kNoMsg = PlanBuilder::kNoMsg;

void build_pingpong(PlanBuilder& b, const TrafficPattern& p) {
  for (std::uint32_t it = 0; it < p.iterations; ++it) {
    std::uint32_t go = b.add(0, 1, p.size_bytes, it, {});
    b.add(1, 0, p.size_bytes, it, {go});
  }
}

void build_alltoall(PlanBuilder& b, const TrafficPattern& p, std::uint32_t n) {
  // Linear pairwise exchange: at step k every rank i sends to (i+k)%n,
  // having received its step k-1 message.
  std::vector<std::uint32_t> prev(n, kNoMsg), cur(n);
  for (std::uint32_t it = 0; it < p.iterations; ++it) {
    for (std::uint32_t k = 1; k < n; ++k) {
      for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t recv_dep = kNoMsg;
        if (k > 1) recv_dep = prev[(i + n - (k - 1)) % n];
        cur[i] = b.add(i, (i + k) % n, p.size_bytes, it, {recv_dep});
      }
      std::swap(prev, cur);
    }
  }
}

void build_allreduce(PlanBuilder& b, const TrafficPattern& p, std::uint32_t n) {
  std::uint32_t pow2 = 1;
  while (pow2 * 2 <= n) pow2 *= 2;
  std::uint32_t extras = n - pow2;
  for (std::uint32_t it = 0; it < p.iterations; ++it) {
    // fold the surplus ranks into the power-of-two core
    std::vector<std::uint32_t> fold(extras, kNoMsg);
    for (std::uint32_t e = 0; e < extras; ++e)
      fold[e] = b.add(pow2 + e, e, p.size_bytes, it, {});
    // recursive doubling over the core, full vector every round
    std::vector<std::uint32_t> got(pow2, kNoMsg);
    for (std::uint32_t e = 0; e < extras; ++e) got[e] = fold[e];
    for (std::uint32_t stride = 1; stride < pow2; stride *= 2) {
      std::vector<std::uint32_t> next(pow2, kNoMsg);
      for (std::uint32_t i = 0; i < pow2; ++i) {
        std::uint32_t partner = i ^ stride;
        next[partner] = b.add(i, partner, p.size_bytes, it, {got[i]});
      }
      got = std::move(next);
    }
    // hand the result back to the folded ranks
    for (std::uint32_t e = 0; e < extras; ++e)
      b.add(e, pow2 + e, p.size_bytes, it, {got[e]});
  }
}

void build_barrier(PlanBuilder& b, const TrafficPattern& p, std::uint32_t n) {
  constexpr std::uint64_t kFlagBytes = 8;
  std::uint32_t rounds = 0;
  while ((1u << rounds) < n) ++rounds;
  for (std::uint32_t it = 0; it < p.iterations; ++it) {
    std::vector<std::uint32_t> got(n, kNoMsg), next(n, kNoMsg);
    for (std::uint32_t r = 0; r < rounds; ++r) {
      std::uint32_t stride = 1u << r;
      for (std::uint32_t i = 0; i < n; ++i)
        next[(i + stride) % n] = b.add(i, (i + stride) % n, kFlagBytes, it, {got[i]});
      std::swap(got, next);
      std::fill(next.begin(), next.end(), kNoMsg);
    }
  }
}

void build_broadcast(PlanBuilder& b, const TrafficPattern& p, std::uint32_t n) {
  for (std::uint32_t it = 0; it < p.iterations; ++it) {
    std::vector<std::uint32_t> recv_of(n, kNoMsg);
    for (std::uint32_t stride = 1; stride < n; stride *= 2) {
      for (std::uint32_t i = 0; i < stride && i + stride < n; ++i)
        recv_of[i + stride] = b.add(i, i + stride, p.size_bytes, it, {recv_of[i]});
    }
  }
}

void build_halo3d(PlanBuilder& b, const TrafficPattern& p, std::uint32_t n) {
  std::array<std::uint32_t, 3> g = p.grid;
  if (g[0] == 0 && g[1] == 0 && g[2] == 0) g = factor_grid(n, true);
  if (g[0] == 0 || g[1] == 0 || g[2] == 0 ||
      static_cast<std::uint64_t>(g[0]) * g[1] * g[2] != n)
    throw RankMismatch("halo3d: grid does not multiply out to the rank count");
  auto rank_of = [&](std::uint32_t x, std::uint32_t y, std::uint32_t z) {
    return x + g[0] * (y + g[1] * z);
  };
  // non-periodic face neighbors
  std::vector<std::vector<std::uint32_t>> nbrs(n);
  for (std::uint32_t z = 0; z < g[2]; ++z)
    for (std::uint32_t y = 0; y < g[1]; ++y)
      for (std::uint32_t x = 0; x < g[0]; ++x) {
        auto& v = nbrs[rank_of(x, y, z)];
        if (x > 0) v.push_back(rank_of(x - 1, y, z));
        if (x + 1 < g[0]) v.push_back(rank_of(x + 1, y, z));
        if (y > 0) v.push_back(rank_of(x, y - 1, z));
        if (y + 1 < g[1]) v.push_back(rank_of(x, y + 1, z));
        if (z > 0) v.push_back(rank_of(x, y, z - 1));
        if (z + 1 < g[2]) v.push_back(rank_of(x, y, z + 1));
      }
  std::vector<std::vector<std::uint32_t>> got(n), got_next(n);
  for (std::uint32_t it = 0; it < p.iterations; ++it) {
    for (auto& v : got_next) v.clear();
    for (std::uint32_t i = 0; i < n; ++i) {
      // a rank exchanges after digesting all faces of the previous step
      for (std::uint32_t nb : nbrs[i])
        got_next[nb].push_back(b.add(i, nb, p.size_bytes, it, got[i]));
    }
    std::swap(got, got_next);
  }
}

void build_sweep3d(PlanBuilder& b, const TrafficPattern& p, std::uint32_t n) {
  std::array<std::uint32_t, 3> g = p.grid;
  if (g[0] == 0 && g[1] == 0 && g[2] == 0) g = factor_grid(n, false);
  if (g[2] == 0) g[2] = 1;
  if (g[0] == 0 || g[1] == 0 || g[2] != 1 ||
      static_cast<std::uint64_t>(g[0]) * g[1] != n)
    throw RankMismatch("sweep3d: needs a 2D rank grid matching the rank count");
  std::uint32_t px = g[0], py = g[1];
  auto rank_of = [&](std::uint32_t x, std::uint32_t y) { return x + px * y; };
  std::uint32_t blocks = p.sweep_blocks ? p.sweep_blocks : 1;
  for (std::uint32_t it = 0; it < p.iterations; ++it) {
    // west and east inputs of each rank for the current block
    std::vector<std::uint32_t> from_w(n, kNoMsg), from_n(n, kNoMsg);
    for (std::uint32_t blk = 0; blk < blocks; ++blk) {
      std::vector<std::uint32_t> w_next(n, kNoMsg), n_next(n, kNoMsg);
      // wavefront order: diagonals from the corner outward
      for (std::uint32_t diag = 0; diag <= px + py - 2; ++diag) {
        for (std::uint32_t x = 0; x <= std::min(diag, px - 1); ++x) {
          std::uint32_t y = diag - x;
          if (y >= py) continue;
          std::uint32_t i = rank_of(x, y);
          if (x + 1 < px)
            w_next[rank_of(x + 1, y)] =
                b.add(i, rank_of(x + 1, y), p.size_bytes, it, {from_w[i], from_n[i]});
          if (y + 1 < py)
            n_next[rank_of(x, y + 1)] =
                b.add(i, rank_of(x, y + 1), p.size_bytes, it, {from_w[i], from_n[i]});
        }
      }
      from_w = std::move(w_next);
      from_n = std::move(n_next);
    }
  }
}

}  // namespace

InjectionPlan schedule(const TrafficPattern& pat, std::uint32_t ranks) {
  if (ranks < 2) throw RankMismatch("patterns need at least two ranks");
  if (pat.kind == PatternKind::PingPong && ranks != 2)
    throw RankMismatch("pingpong runs on exactly two ranks");
  if (pat.size_bytes == 0) throw RankMismatch("pattern message size must be positive");
  if (pat.iterations == 0) throw RankMismatch("pattern needs at least one iteration");

  InjectionPlan plan;
  plan.kind = pat.kind;
  plan.ranks = ranks;
  plan.iterations = pat.iterations;
  PlanBuilder b(plan, ranks);
  switch (pat.kind) {
    case PatternKind::PingPong: build_pingpong(b, pat); break;
    case PatternKind::Allreduce: build_allreduce(b, pat, ranks); break;
    case PatternKind::Alltoall: build_alltoall(b, pat, ranks); break;
    case PatternKind::Barrier: build_barrier(b, pat, ranks); break;
    case PatternKind::Broadcast: build_broadcast(b, pat, ranks); break;
    case PatternKind::Halo3d: build_halo3d(b, pat, ranks); break;
    case PatternKind::Sweep3d: build_sweep3d(b, pat, ranks); break;
  }
  return plan;
}

AttachedPlan attach_routing(InjectionPlan plan, RoutingPlan routing) {
  AttachedPlan out;
  if (routing.kind == RoutingPlan::Kind::Alternation && routing.alternation.empty())
    throw ConfigError("alternation routing needs at least one mode");
  if (routing.kind == RoutingPlan::Kind::Policy && plan.kind == PatternKind::Alltoall)
    routing.policy.alltoall_phase = true;
  if (routing.kind != RoutingPlan::Kind::Policy) {
    out.resolved_modes.reserve(plan.messages.size());
    for (const PlanMessage& m : plan.messages) {
      RoutingMode mode = routing.kind == RoutingPlan::Kind::Static
                             ? routing.static_mode
                             : routing.alternation[m.iteration % routing.alternation.size()];
      out.resolved_modes.push_back(mode);
    }
  }
  out.plan = std::move(plan);
  out.routing = std::move(routing);
  return out;
}

}  // namespace dragonroute
