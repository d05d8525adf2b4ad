#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dragonroute/config.hpp"
#include "dragonroute/counters.hpp"
#include "dragonroute/modes.hpp"

namespace dragonroute {

struct EmptyRecords : std::invalid_argument {
  EmptyRecords() : std::invalid_argument("no records to process") {}
};

inline constexpr const char* kCsvMagic = "#dragonroute-csv-v1";

// One row per (trial, iteration, sending rank).
struct RunRecord {
  std::uint32_t trial = 0;
  std::uint32_t iteration = 0;
  std::uint32_t sender = 0;  // rank
  RoutingMode mode = RoutingMode::Adaptive0;  // the rank's dominant mode (by bytes)
  std::uint64_t t_msg_cycles = 0;  // last delivery minus first injection, this rank
  double latency_cycles = 0.0;     // mean packet round-trip from the counter delta
  double stall_per_flit = 0.0;
  double min_fraction = 1.0;       // share of this rank's packets routed minimally
  NicCounters delta;               // raw counter movement over the iteration
  // Share of the trial's plan bytes sent on anything but the high-bias
  // mode; same value on every row of a trial.
  double default_arm_fraction = 1.0;
};

// Build topology and allocation once, then run `trials` independent
// simulations (optionally OpenMP-parallel; results are identical either
// way and ordered by trial).
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, bool parallel_trials);

std::string records_to_csv(std::span<const RunRecord> records);
std::vector<RunRecord> parse_records_csv(const std::string& text);

struct SummaryRow {
  std::string group;
  std::size_t n = 0;
  double q1 = 0, median = 0, q3 = 0, iqr = 0, qcd = 0;
  double ci_low = 0, ci_high = 0, mean = 0;
  // Group median over the reference median (the ADAPTIVE_0 group when
  // grouping by mode, else the first group), for cross-mode comparison.
  double normalized_median = 1.0;
};

// Distribution of t_msg_cycles per group; group_by is one of
// "mode", "trial", "iteration", "sender".
std::vector<SummaryRow> summarize(std::span<const RunRecord> records,
                                  const std::string& group_by);
std::string summary_to_csv(std::span<const SummaryRow> rows);

// Measure how the high-bias arm's latency and stall ratio relate to the
// default arm's on this workload: a short alternation run, then the
// ratio of medians. Used when the policy scales are not configured.
std::pair<double, double> calibrate_scaling(const ExperimentConfig& cfg);

// Transfer-time model check: for each size, train the counters with a
// few warmup transfers, predict the next transfer from the counter
// delta, then measure it.
struct ModelValidationRow {
  std::uint64_t size = 0;
  double measured = 0, predicted = 0, rel_error = 0;
};
struct ModelValidationReport {
  std::vector<ModelValidationRow> rows;
  double max_rel_error = 0;
};
ModelValidationReport validate_model(const ExperimentConfig& cfg);

}  // namespace dragonroute
