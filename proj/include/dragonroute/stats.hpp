#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dragonroute/counters.hpp"

namespace dragonroute::stats {

struct EmptySample : std::invalid_argument {
  EmptySample() : std::invalid_argument("statistic requested on an empty sample") {}
};
struct TooFewSamples : std::invalid_argument {
  TooFewSamples() : std::invalid_argument("confidence interval needs at least 3 samples") {}
};
struct ZeroDenominator : std::invalid_argument {
  ZeroDenominator() : std::invalid_argument("dispersion undefined: Q1 + Q3 == 0") {}
};
struct ZeroInterval : std::invalid_argument {
  ZeroInterval() : std::invalid_argument("counter rates need a positive interval") {}
};

struct Quartiles {
  double q1 = 0, median = 0, q3 = 0;
};

// Linear-interpolation quantile (the scheme spreadsheets and numpy use
// by default): rank h = (n-1)q, value = x[floor(h)] + frac(h) * gap.
double quantile(std::span<const double> sample, double q);
Quartiles quartiles(std::span<const double> sample);
double median(std::span<const double> sample);
double iqr(std::span<const double> sample);
double mean(std::span<const double> sample);

// Quartile coefficient of dispersion: (Q3 - Q1) / (Q3 + Q1).
double qcd(std::span<const double> sample);

// Notched 95% interval for the median: median +/- 1.57 * IQR / sqrt(n).
std::pair<double, double> median_ci95(std::span<const double> sample);

// Counter deltas per cycle over a measurement window.
struct CounterRates {
  double flits = 0, flits_stalled = 0, packets = 0, cum_latency = 0;
};
CounterRates normalize_counters(const NicCounters& delta, std::uint64_t interval_cycles);

}  // namespace dragonroute::stats
