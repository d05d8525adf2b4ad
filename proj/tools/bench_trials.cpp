// Compares the serial trial loop against the OpenMP one: same records,
// wall time for each. The parallel path must be a pure speedup.
#include <chrono>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "dragonroute/config.hpp"
#include "dragonroute/harness.hpp"

using namespace dragonroute;
using Clock = std::chrono::steady_clock;

namespace {
ExperimentConfig bench_config() {
  ExperimentConfig cfg;
  cfg.topology.groups = 4;
  cfg.topology.chassis_per_group = 2;
  cfg.topology.blades_per_chassis = 4;
  cfg.topology.nodes_per_router = 2;
  cfg.allocation.ranks = 8;
  cfg.allocation.placement = PlacementClass::InterGroup;
  cfg.workload.kind = PatternKind::Allreduce;
  cfg.workload.size_bytes = 16384;
  cfg.workload.iterations = 8;
  cfg.routing.kind = RoutingPlan::Kind::Static;
  cfg.routing.static_mode = RoutingMode::Adaptive0;
  cfg.trials = 8;
  cfg.seed = 1;
  return cfg;
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"benchmark: serial vs parallel trial execution"};
  std::string config_path;
  unsigned trials = 0;
  app.add_option("--config", config_path, "experiment JSON (default: built-in workload)");
  app.add_option("--trials", trials, "override trial count");
  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg =
        config_path.empty() ? bench_config() : load_config(config_path);
    if (trials) cfg.trials = trials;

    auto t0 = Clock::now();
    auto serial = run_experiment(cfg, false);
    auto t1 = Clock::now();
    auto parallel = run_experiment(cfg, true);
    auto t2 = Clock::now();

    double serial_s = std::chrono::duration<double>(t1 - t0).count();
    double parallel_s = std::chrono::duration<double>(t2 - t1).count();
    bool identical = records_to_csv(serial) == records_to_csv(parallel);

    std::printf("trials          : %u\n", cfg.trials);
    std::printf("records         : %zu\n", serial.size());
    std::printf("serial          : %.3f s\n", serial_s);
    std::printf("parallel        : %.3f s\n", parallel_s);
    std::printf("speedup         : %.2fx\n", parallel_s > 0 ? serial_s / parallel_s : 0.0);
    std::printf("records match   : %s\n", identical ? "yes" : "NO");
    return identical ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
