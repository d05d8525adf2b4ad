#include "dragonroute/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <map>
#include <sstream>

#include "dragonroute/engine.hpp"
#include "dragonroute/policy.hpp"
#include "dragonroute/rng.hpp"
#include "dragonroute/stats.hpp"

namespace dragonroute {

namespace {

std::vector<BackgroundFlow> expand_background(const ExperimentConfig& cfg,
                                              const Topology& topo,
                                              const Allocation& alloc) {
  std::vector<BackgroundFlow> out = cfg.background;
  if (!cfg.uniform_background) return out;
  const UniformBackground& ub = *cfg.uniform_background;
  std::vector<std::uint32_t> pool;
  std::vector<char> taken(topo.node_count(), 0);
  if (ub.avoid_allocation)
    for (std::uint32_t n : alloc.nodes) taken[n] = 1;
  for (std::uint32_t n = 0; n < topo.node_count(); ++n)
    if (!taken[n]) pool.push_back(n);
  if (pool.size() < 2 && ub.flows > 0)
    throw ConfigError("background.uniform: not enough free nodes for flows");
  std::mt19937_64 rng(mix_seed(ub.seed, 0xb6e5ull));
  for (std::uint32_t i = 0; i < ub.flows; ++i) {
    BackgroundFlow f;
    f.src = pool[rng_below(rng, pool.size())];
    do {
      f.dst = pool[rng_below(rng, pool.size())];
    } while (f.dst == f.src);
    f.size_bytes = ub.size_bytes;
    f.mode = ub.mode;
    f.period = ub.period;
    f.start = ub.start;
    out.push_back(f);
  }
  return out;
}

// One full simulation of the plan. Returns per-(iteration, rank) rows.
std::vector<RunRecord> run_trial(const Topology& topo, const ExperimentConfig& cfg,
                                 const AttachedPlan& ap, const Allocation& alloc,
                                 const std::vector<BackgroundFlow>& background,
                                 std::uint32_t trial, std::uint64_t engine_seed) {
  Engine eng(topo, cfg.engine, engine_seed);
  for (const BackgroundFlow& f : background)
    eng.add_periodic_flow(f.src, f.dst, f.size_bytes, f.mode, f.period, f.start);

  const InjectionPlan& plan = ap.plan;
  const bool policy = ap.routing.kind == RoutingPlan::Kind::Policy;
  const std::size_t total = plan.messages.size();

  std::vector<PolicyState> pstate;
  if (policy) pstate.assign(plan.ranks, PolicyState{ap.routing.policy});

  std::vector<std::uint32_t> remaining(total, 0);
  std::vector<std::vector<std::uint32_t>> dependents(total);
  std::vector<Cycle> ready_at(total, 0);
  std::vector<RoutingMode> used_mode(total, RoutingMode::Adaptive0);
  for (const PlanMessage& m : plan.messages) {
    remaining[m.id] = static_cast<std::uint32_t>(m.deps.size());
    for (std::uint32_t d : m.deps) dependents[d].push_back(m.id);
  }
  std::vector<std::pair<std::size_t, std::size_t>> iter_range(plan.iterations,
                                                              {total, total});
  for (const PlanMessage& m : plan.messages) {
    auto& [lo, hi] = iter_range[m.iteration];
    lo = std::min<std::size_t>(lo, m.id);
    hi = m.id + 1;  // plan ids are iteration-contiguous and ascending
  }

  std::uint32_t current_iter = 0;
  std::vector<std::uint32_t> parked;  // ready, but their iteration has not started
  std::uint64_t bytes_total = 0, bytes_default = 0;

  auto inject_msg = [&](std::uint32_t id) {
    const PlanMessage& pm = plan.messages[id];
    RoutingMode mode;
    Cycle penalty = 0;
    if (policy) {
      PolicyState& st = pstate[pm.src_rank];
      mode = select_routing(st, pm.size_bytes);
      if (st.evaluated) penalty = st.cfg.counter_read_penalty;
    } else {
      mode = ap.resolved_modes[id];
    }
    used_mode[id] = mode;
    bytes_total += pm.size_bytes;
    if (mode != RoutingMode::Adaptive3) bytes_default += pm.size_bytes;
    Message m;
    m.tag = id;
    m.src_node = alloc.nodes[pm.src_rank];
    m.dst_node = alloc.nodes[pm.dst_rank];
    m.size_bytes = pm.size_bytes;
    m.kind = RdmaKind::Put;
    m.mode = mode;
    eng.inject(m, ready_at[id] + penalty);
  };

  eng.set_delivery_callback([&](std::uint64_t tag, Cycle cy) {
    if (tag >= total) return;  // background traffic has no dependents
    for (std::uint32_t d : dependents[static_cast<std::uint32_t>(tag)]) {
      ready_at[d] = std::max(ready_at[d], cy + cfg.workload.think_time);
      if (--remaining[d] == 0) {
        if (plan.messages[d].iteration == current_iter)
          inject_msg(d);
        else
          parked.push_back(d);
      }
    }
  });
  if (policy) {
    eng.set_completion_callback([&](std::uint64_t tag, Cycle) {
      if (tag >= total) return;
      MessageStats st = eng.message_stats(tag);
      record_observation(pstate[plan.messages[tag].src_rank], st.mode,
                         st.packet_latency, st.stall_ratio);
    });
  }

  for (const PlanMessage& m : plan.messages)
    if (m.deps.empty()) parked.push_back(m.id);

  std::vector<RunRecord> records;
  std::vector<NicCounters> before(plan.ranks);
  std::vector<std::uint64_t> tags;
  for (std::uint32_t it = 0; it < plan.iterations; ++it) {
    current_iter = it;
    for (std::uint32_t r = 0; r < plan.ranks; ++r)
      before[r] = eng.snapshot(alloc.nodes[r]);
    std::size_t trace_start = eng.route_trace().size();

    std::sort(parked.begin(), parked.end());
    std::vector<std::uint32_t> still_parked;
    for (std::uint32_t id : parked) {
      if (plan.messages[id].iteration == it)
        inject_msg(id);
      else
        still_parked.push_back(id);
    }
    parked = std::move(still_parked);

    auto [lo, hi] = iter_range[it];
    tags.clear();
    for (std::size_t id = lo; id < hi; ++id) tags.push_back(id);
    eng.run_until_complete(tags);

    auto trace = eng.route_trace();
    for (std::uint32_t r = 0; r < plan.ranks; ++r) {
      NicCounters delta = eng.snapshot(alloc.nodes[r]) - before[r];
      if (delta.req_packets == 0 && delta.req_flits == 0) continue;
      RunRecord rec;
      rec.trial = trial;
      rec.iteration = it;
      rec.sender = r;
      rec.delta = delta;
      if (delta.req_packets > 0)
        rec.latency_cycles = static_cast<double>(delta.req_cum_latency) /
                             static_cast<double>(delta.req_packets);
      if (delta.req_flits > 0)
        rec.stall_per_flit = static_cast<double>(delta.req_flits_stalled) /
                             static_cast<double>(delta.req_flits);

      Cycle lo_inject = ~Cycle{0};
      Cycle hi_deliver = 0;
      std::uint64_t mode_bytes[7] = {0};
      for (std::size_t id = lo; id < hi; ++id) {
        const PlanMessage& pm = plan.messages[id];
        if (pm.src_rank != r) continue;
        MessageStats st = eng.message_stats(id);
        lo_inject = std::min(lo_inject, st.inject_cycle);
        hi_deliver = std::max(hi_deliver, st.delivered_cycle);
        mode_bytes[static_cast<int>(used_mode[id])] += pm.size_bytes;
      }
      if (hi_deliver >= lo_inject) rec.t_msg_cycles = hi_deliver - lo_inject;
      int best = 0;
      for (int m = 1; m < 7; ++m)
        if (mode_bytes[m] > mode_bytes[best]) best = m;
      rec.mode = static_cast<RoutingMode>(best);

      std::uint32_t node = alloc.nodes[r];
      std::size_t mine = 0, minimal = 0;
      for (std::size_t i = trace_start; i < trace.size(); ++i) {
        if (trace[i].src_node != node) continue;
        ++mine;
        if (trace[i].path_class == PathClass::Minimal) ++minimal;
      }
      if (mine > 0)
        rec.min_fraction = static_cast<double>(minimal) / static_cast<double>(mine);
      records.push_back(rec);
    }
  }

  double frac = bytes_total
                    ? static_cast<double>(bytes_default) / static_cast<double>(bytes_total)
                    : 1.0;
  for (RunRecord& r : records) r.default_arm_fraction = frac;
  return records;
}

RoutingMode default_arm_for(const ExperimentConfig& cfg) {
  PolicyConfig pc = cfg.routing.policy;
  if (cfg.workload.kind == PatternKind::Alltoall) pc.alltoall_phase = true;
  return arm_mode(pc, PolicyArm::Default);
}

}  // namespace

std::pair<double, double> calibrate_scaling(const ExperimentConfig& cfg) {
  Topology topo = Topology::build(cfg.topology);
  Allocation alloc = allocate(topo, cfg.allocation);
  TrafficPattern pat = cfg.workload;
  pat.iterations = 8;  // four samples per arm
  RoutingPlan alt;
  alt.kind = RoutingPlan::Kind::Alternation;
  alt.alternation = {default_arm_for(cfg), RoutingMode::Adaptive3};
  AttachedPlan ap = attach_routing(schedule(pat, static_cast<std::uint32_t>(
                                                     alloc.nodes.size())),
                                   alt);
  auto background = expand_background(cfg, topo, alloc);
  auto records = run_trial(topo, cfg, ap, alloc, background, 0,
                           mix_seed(cfg.seed, 0x5ca1eull));
  std::vector<double> l_def, l_hb, s_def, s_hb;
  for (const RunRecord& r : records) {
    if (r.delta.req_packets == 0) continue;
    if (r.mode == RoutingMode::Adaptive3) {
      l_hb.push_back(r.latency_cycles);
      s_hb.push_back(r.stall_per_flit);
    } else {
      l_def.push_back(r.latency_cycles);
      s_def.push_back(r.stall_per_flit);
    }
  }
  auto ratio_of_medians = [](std::vector<double>& num, std::vector<double>& den) {
    if (num.empty() || den.empty()) return 1.0;
    double n = stats::median(num), d = stats::median(den);
    if (n <= 0.0 || d <= 0.0) return 1.0;
    return std::clamp(n / d, 0.05, 20.0);
  };
  return {ratio_of_medians(l_hb, l_def), ratio_of_medians(s_hb, s_def)};
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, cfg.parallel_trials);
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, bool parallel_trials) {
  Topology topo = Topology::build(cfg.topology);
  // One allocation per experiment: trials share the node placement so
  // their spread reflects routing, not allocation luck.
  Allocation alloc = allocate(topo, cfg.allocation);
  RoutingPlan routing = cfg.routing;
  if (routing.kind == RoutingPlan::Kind::Policy && cfg.policy_calibrate) {
    auto [lscale, sscale] = calibrate_scaling(cfg);
    routing.policy.latency_scale = lscale;
    routing.policy.stall_scale = sscale;
  }
  AttachedPlan ap = attach_routing(
      schedule(cfg.workload, static_cast<std::uint32_t>(alloc.nodes.size())), routing);
  auto background = expand_background(cfg, topo, alloc);

  std::vector<std::vector<RunRecord>> per_trial(cfg.trials);
  std::vector<std::exception_ptr> errors(cfg.trials);
  if (parallel_trials && cfg.trials > 1) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(cfg.trials); ++t) {
      try {
        per_trial[t] = run_trial(topo, cfg, ap, alloc, background,
                                 static_cast<std::uint32_t>(t),
                                 mix_seed(cfg.seed, static_cast<std::uint64_t>(t) + 1));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  } else {
    for (std::uint32_t t = 0; t < cfg.trials; ++t) {
      try {
        per_trial[t] = run_trial(topo, cfg, ap, alloc, background, t,
                                 mix_seed(cfg.seed, static_cast<std::uint64_t>(t) + 1));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<RunRecord> all;
  for (auto& v : per_trial) all.insert(all.end(), v.begin(), v.end());
  return all;
}

// ---- CSV ---------------------------------------------------------------

namespace {
const char* kCsvHeader =
    "trial,iteration,sender,mode,t_msg_cycles,L_cycles,s_per_flit,minimal_fraction,"
    "req_flits,req_flits_stalled,req_packets,req_cum_latency,default_arm_fraction";

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}
}  // namespace

std::string records_to_csv(std::span<const RunRecord> records) {
  std::ostringstream out;
  out << kCsvMagic << '\n' << kCsvHeader << '\n';
  for (const RunRecord& r : records) {
    out << r.trial << ',' << r.iteration << ',' << r.sender << ',' << to_string(r.mode)
        << ',' << r.t_msg_cycles << ',' << fmt_double(r.latency_cycles) << ','
        << fmt_double(r.stall_per_flit) << ',' << fmt_double(r.min_fraction) << ','
        << r.delta.req_flits << ',' << r.delta.req_flits_stalled << ','
        << r.delta.req_packets << ',' << r.delta.req_cum_latency << ','
        << fmt_double(r.default_arm_fraction) << '\n';
  }
  return out.str();
}

std::vector<RunRecord> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvMagic)
    throw ConfigError("csv: missing format marker line");
  if (!std::getline(in, line) || line != kCsvHeader)
    throw ConfigError("csv: header does not match the expected columns");
  std::vector<RunRecord> out;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 13)
      throw ConfigError("csv: line " + std::to_string(lineno) + ": expected 13 fields");
    try {
      RunRecord r;
      r.trial = static_cast<std::uint32_t>(std::stoul(f[0]));
      r.iteration = static_cast<std::uint32_t>(std::stoul(f[1]));
      r.sender = static_cast<std::uint32_t>(std::stoul(f[2]));
      auto m = parse_routing_mode(f[3]);
      if (!m) throw ConfigError("csv: unknown mode '" + f[3] + "'");
      r.mode = *m;
      r.t_msg_cycles = std::stoull(f[4]);
      r.latency_cycles = std::stod(f[5]);
      r.stall_per_flit = std::stod(f[6]);
      r.min_fraction = std::stod(f[7]);
      r.delta.req_flits = std::stoull(f[8]);
      r.delta.req_flits_stalled = std::stoull(f[9]);
      r.delta.req_packets = std::stoull(f[10]);
      r.delta.req_cum_latency = std::stoull(f[11]);
      r.default_arm_fraction = std::stod(f[12]);
      out.push_back(r);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("csv: line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

// ---- summaries -----------------------------------------------------------

std::vector<SummaryRow> summarize(std::span<const RunRecord> records,
                                  const std::string& group_by) {
  if (records.empty()) throw EmptyRecords();
  auto key_of = [&](const RunRecord& r) -> std::uint64_t {
    if (group_by == "mode") return static_cast<std::uint64_t>(r.mode);
    if (group_by == "trial") return r.trial;
    if (group_by == "iteration") return r.iteration;
    if (group_by == "sender") return r.sender;
    throw std::invalid_argument("summarize: group_by must be mode|trial|iteration|sender");
  };
  std::map<std::uint64_t, std::vector<double>> groups;
  for (const RunRecord& r : records)
    groups[key_of(r)].push_back(static_cast<double>(r.t_msg_cycles));

  std::vector<SummaryRow> out;
  for (auto& [key, sample] : groups) {
    SummaryRow row;
    row.group = group_by == "mode" ? to_string(static_cast<RoutingMode>(key))
                                   : std::to_string(key);
    row.n = sample.size();
    auto q = stats::quartiles(sample);
    row.q1 = q.q1;
    row.median = q.median;
    row.q3 = q.q3;
    row.iqr = q.q3 - q.q1;
    row.qcd = (q.q3 + q.q1) != 0.0 ? (q.q3 - q.q1) / (q.q3 + q.q1) : 0.0;
    if (sample.size() >= 3) {
      auto [lo, hi] = stats::median_ci95(sample);
      row.ci_low = lo;
      row.ci_high = hi;
    } else {
      row.ci_low = row.ci_high = row.median;
    }
    row.mean = stats::mean(sample);
    out.push_back(std::move(row));
  }

  // Medians relative to the default adaptive group (or the first group
  // when that mode is absent from the records).
  double ref = out.front().median;
  if (group_by == "mode") {
    for (const char* want : {"ADAPTIVE_0", "ADAPTIVE_1"}) {
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const SummaryRow& r) { return r.group == want; });
      if (it != out.end()) {
        ref = it->median;
        break;
      }
    }
  }
  for (SummaryRow& row : out)
    row.normalized_median = ref > 0.0 ? row.median / ref : 1.0;
  return out;
}

std::string summary_to_csv(std::span<const SummaryRow> rows) {
  std::ostringstream out;
  out << "group,n,q1,median,q3,iqr,qcd,ci_low,ci_high,mean,normalized_median\n";
  for (const SummaryRow& r : rows) {
    out << r.group << ',' << r.n << ',' << fmt_double(r.q1) << ',' << fmt_double(r.median)
        << ',' << fmt_double(r.q3) << ',' << fmt_double(r.iqr) << ',' << fmt_double(r.qcd)
        << ',' << fmt_double(r.ci_low) << ',' << fmt_double(r.ci_high) << ','
        << fmt_double(r.mean) << ',' << fmt_double(r.normalized_median) << '\n';
  }
  return out.str();
}

// ---- model validation ------------------------------------------------------

ModelValidationReport validate_model(const ExperimentConfig& cfg) {
  Topology topo = Topology::build(cfg.topology);
  Allocation alloc = allocate(topo, cfg.allocation);
  if (alloc.nodes.size() < 2)
    throw ConfigError("validate_model: allocation needs at least two ranks");
  std::vector<std::uint64_t> sizes = {64, 256, 1024, 4096, 16384, 65536};
  if (cfg.sweep && !cfg.sweep->sizes.empty()) sizes = cfg.sweep->sizes;
  RoutingMode mode = cfg.routing.kind == RoutingPlan::Kind::Static
                         ? cfg.routing.static_mode
                         : RoutingMode::MinHash;
  auto background = expand_background(cfg, topo, alloc);

  ModelValidationReport report;
  for (std::uint64_t size : sizes) {
    Engine eng(topo, cfg.engine, mix_seed(cfg.seed, size));
    for (const BackgroundFlow& f : background)
      eng.add_periodic_flow(f.src, f.dst, f.size_bytes, f.mode, f.period, f.start);
    std::uint32_t src = alloc.nodes[0], dst = alloc.nodes[1];
    NicCounters base = eng.snapshot(src);
    constexpr int kWarmup = 4;
    for (int i = 0; i < kWarmup; ++i) {
      Message m;
      m.tag = static_cast<std::uint64_t>(i) + 1;
      m.src_node = src;
      m.dst_node = dst;
      m.size_bytes = size;
      m.mode = mode;
      eng.inject(m, eng.now());
      std::uint64_t tags[] = {m.tag};
      eng.run_until_complete(tags);
    }
    ModelInputs in = derive_inputs(base, eng.snapshot(src), size, RdmaKind::Put);
    double predicted = predict_tmsg(in);
    Message probe;
    probe.tag = 0xbeef;
    probe.src_node = src;
    probe.dst_node = dst;
    probe.size_bytes = size;
    probe.mode = mode;
    eng.inject(probe, eng.now());
    std::uint64_t tags[] = {probe.tag};
    eng.run_until_complete(tags);
    double measured = static_cast<double>(eng.measure_tmsg(probe.tag));

    ModelValidationRow row;
    row.size = size;
    row.measured = measured;
    row.predicted = predicted;
    row.rel_error = measured > 0 ? std::abs(predicted - measured) / measured : 0.0;
    report.rows.push_back(row);
    report.max_rel_error = std::max(report.max_rel_error, row.rel_error);
  }
  return report;
}

}  // namespace dragonroute
