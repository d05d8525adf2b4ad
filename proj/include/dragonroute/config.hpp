#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dragonroute/engine.hpp"
#include "dragonroute/topology.hpp"
#include "dragonroute/workloads.hpp"

namespace dragonroute {

struct BackgroundFlow {
  std::uint32_t src = 0, dst = 0;
  std::uint64_t size_bytes = 512;
  RoutingMode mode = RoutingMode::MinHash;
  std::uint64_t period = 64;
  std::uint64_t start = 0;
};

// Convenience generator: `flows` random node pairs, kept off the
// allocation when avoid_allocation is set.
struct UniformBackground {
  std::uint32_t flows = 0;
  std::uint64_t size_bytes = 512;
  RoutingMode mode = RoutingMode::MinHash;
  std::uint64_t period = 64;
  std::uint64_t start = 0;
  std::uint64_t seed = 0;
  bool avoid_allocation = true;
};

struct SweepSpec {
  std::vector<std::uint64_t> sizes;
  std::vector<RoutingMode> modes;
};

// Everything one experiment needs. Parsing is strict: unknown keys are
// rejected so typos fail loudly instead of silently running defaults.
struct ExperimentConfig {
  TopologyConfig topology;
  AllocationSpec allocation;
  TrafficPattern workload;
  RoutingPlan routing;
  bool policy_calibrate = false;  // scales absent: measure them first
  EngineConfig engine;
  std::vector<BackgroundFlow> background;
  std::optional<UniformBackground> uniform_background;
  std::uint32_t trials = 1;
  std::uint64_t seed = 0;
  bool parallel_trials = true;
  std::string output;
  std::optional<SweepSpec> sweep;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

}  // namespace dragonroute
