#include "dragonroute/routing.hpp"

#include <algorithm>

#include "dragonroute/rng.hpp"

namespace dragonroute {

double estimate_congestion(const Topology& topo, const CongestionView& view, const Path& path) {
  if (path.hop_count() == 0) return 0.0;
  std::uint32_t first_edge = topo.edge_index(path.hops[0], path.hops[1]);
  double downstream = view.queue_capacity() - view.credits_available(first_edge);
  if (downstream < 0.0) downstream = 0.0;
  return (view.queued_flits(first_edge) + downstream) *
         static_cast<double>(path.hop_count());
}

double bias_for(const BiasProfile& bias, RoutingMode mode, std::uint32_t hops_taken) {
  switch (mode) {
    case RoutingMode::Adaptive0: return 0.0;
    case RoutingMode::Adaptive1: return bias.imb_step * static_cast<double>(hops_taken + 1);
    case RoutingMode::Adaptive2: return bias.low_bias;
    case RoutingMode::Adaptive3: return bias.high_bias;
    default: return 0.0;
  }
}

namespace {

// Up to two distinct indices out of [0, n), in draw order.
std::vector<std::size_t> pick_two(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> out;
  if (n == 0) return out;
  std::size_t first = rng_below(rng, n);
  out.push_back(first);
  if (n > 1) {
    std::size_t second = rng_below(rng, n - 1);
    if (second >= first) ++second;
    out.push_back(second);
  }
  return out;
}

RouteDecision hash_minimal(const RoutingContext& ctx, std::uint32_t src, std::uint32_t dst,
                           std::uint64_t flow_key, bool degraded) {
  auto pool = ctx.topo->minimal_paths(src, dst, ctx.enumeration_limit);
  std::size_t idx = splitmix64(flow_key) % pool.size();
  RouteDecision d;
  d.degraded_minimal_only = degraded;
  double cost = estimate_congestion(*ctx.topo, *ctx.congestion, pool[idx]);
  d.candidates.push_back({pool[idx], cost, cost});
  d.chosen_index = 0;
  d.path = std::move(pool[idx]);
  return d;
}

}  // namespace

RouteDecision choose_route(const RoutingContext& ctx, RoutingMode mode,
                           std::uint32_t src_router, std::uint32_t dst_router,
                           std::uint32_t hops_taken, std::uint64_t flow_key,
                           std::mt19937_64& rng) {
  const Topology& topo = *ctx.topo;
  if (src_router == dst_router) {
    RouteDecision d;
    d.path = Path{{src_router}, PathClass::Minimal, std::nullopt};
    d.candidates.push_back({d.path, 0.0, 0.0});
    return d;
  }

  if (mode == RoutingMode::MinHash || mode == RoutingMode::InOrder)
    return hash_minimal(ctx, src_router, dst_router, flow_key, false);

  if (mode == RoutingMode::NminHash) {
    // Deterministic per flow: the detour is sampled from a private
    // generator seeded by the flow key, so equal keys repeat the path.
    auto groups = topo.eligible_intermediate_groups(topo.router_group(src_router),
                                                    topo.router_group(dst_router));
    if (groups.empty())
      return hash_minimal(ctx, src_router, dst_router, flow_key, true);
    std::mt19937_64 flow_rng(mix_seed(flow_key, 0x6e6d696eull));
    Path p = topo.sample_nonminimal_path_via(
        src_router, dst_router, groups[rng_below(flow_rng, groups.size())], flow_rng);
    RouteDecision d;
    double cost = estimate_congestion(topo, *ctx.congestion, p);
    d.candidates.push_back({p, cost, cost});
    d.chosen_index = 0;
    d.path = std::move(p);
    return d;
  }

  // Adaptive family.
  RouteDecision d;
  d.bias_applied = bias_for(ctx.bias, mode, hops_taken);

  auto pool = topo.minimal_paths(src_router, dst_router, ctx.enumeration_limit);
  for (std::size_t idx : pick_two(pool.size(), rng)) {
    double cost = estimate_congestion(topo, *ctx.congestion, pool[idx]);
    d.candidates.push_back({pool[idx], cost, cost});
  }

  auto groups = topo.eligible_intermediate_groups(topo.router_group(src_router),
                                                  topo.router_group(dst_router));
  if (groups.empty()) {
    d.degraded_minimal_only = true;
  } else {
    for (std::size_t gidx : pick_two(groups.size(), rng)) {
      Path p = topo.sample_nonminimal_path_via(src_router, dst_router, groups[gidx], rng);
      if (hops_taken + p.hop_count() > kDetourHopBudget) continue;
      double cost = estimate_congestion(topo, *ctx.congestion, p);
      d.candidates.push_back({std::move(p), cost, cost + d.bias_applied});
    }
  }

  d.chosen_index = 0;
  for (std::size_t i = 1; i < d.candidates.size(); ++i)
    if (d.candidates[i].biased_cost < d.candidates[d.chosen_index].biased_cost)
      d.chosen_index = i;
  d.path = d.candidates[d.chosen_index].path;
  return d;
}

double minimal_fraction(std::span<const PathClass> classes) {
  if (classes.empty()) throw EmptyTrace();
  std::size_t n = 0;
  for (PathClass c : classes)
    if (c == PathClass::Minimal) ++n;
  return static_cast<double>(n) / static_cast<double>(classes.size());
}

double minimal_fraction(std::span<const RouteDecision> decisions) {
  if (decisions.empty()) throw EmptyTrace();
  std::size_t n = 0;
  for (const auto& d : decisions)
    if (d.path.path_class == PathClass::Minimal) ++n;
  return static_cast<double>(n) / static_cast<double>(decisions.size());
}

}  // namespace dragonroute
