#include "dragonroute/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dragonroute::stats {

namespace {
std::vector<double> sorted(std::span<const double> sample) {
  if (sample.empty()) throw EmptySample();
  std::vector<double> v(sample.begin(), sample.end());
  std::sort(v.begin(), v.end());
  return v;
}

double quantile_sorted(const std::vector<double>& v, double q) {
  if (q <= 0.0) return v.front();
  if (q >= 1.0) return v.back();
  double h = static_cast<double>(v.size() - 1) * q;
  auto lo = static_cast<std::size_t>(h);
  double frac = h - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}
}  // namespace

double quantile(std::span<const double> sample, double q) {
  return quantile_sorted(sorted(sample), q);
}

Quartiles quartiles(std::span<const double> sample) {
  auto v = sorted(sample);
  return {quantile_sorted(v, 0.25), quantile_sorted(v, 0.5), quantile_sorted(v, 0.75)};
}

double median(std::span<const double> sample) { return quantile(sample, 0.5); }

double iqr(std::span<const double> sample) {
  auto q = quartiles(sample);
  return q.q3 - q.q1;
}

double mean(std::span<const double> sample) {
  if (sample.empty()) throw EmptySample();
  return std::accumulate(sample.begin(), sample.end(), 0.0) /
         static_cast<double>(sample.size());
}

double qcd(std::span<const double> sample) {
  auto q = quartiles(sample);
  if (q.q3 + q.q1 == 0.0) throw ZeroDenominator();
  return (q.q3 - q.q1) / (q.q3 + q.q1);
}

std::pair<double, double> median_ci95(std::span<const double> sample) {
  if (sample.empty()) throw EmptySample();
  if (sample.size() < 3) throw TooFewSamples();
  auto v = sorted(sample);
  double med = quantile_sorted(v, 0.5);
  double spread = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
  double half = 1.57 * spread / std::sqrt(static_cast<double>(v.size()));
  return {med - half, med + half};
}

CounterRates normalize_counters(const NicCounters& delta, std::uint64_t interval_cycles) {
  if (interval_cycles == 0) throw ZeroInterval();
  auto c = static_cast<double>(interval_cycles);
  return {static_cast<double>(delta.req_flits) / c,
          static_cast<double>(delta.req_flits_stalled) / c,
          static_cast<double>(delta.req_packets) / c,
          static_cast<double>(delta.req_cum_latency) / c};
}

}  // namespace dragonroute::stats
