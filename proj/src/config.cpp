#include "dragonroute/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

namespace dragonroute {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError("config: " + where + ": " + what);
}

void reject_unknown(const json& j, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) fail(where, "unknown key '" + it.key() + "'");
  }
}

const json* get(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

template <typename T>
T num(const json& j, const std::string& where) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!j.is_boolean()) fail(where, "expected a boolean");
  } else {
    if (!j.is_number()) fail(where, "expected a number");
  }
  return j.get<T>();
}

template <typename T>
void take(const json& j, const char* key, const std::string& where, T& out) {
  if (const json* v = get(j, key)) out = num<T>(*v, where + "." + key);
}

std::string str(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

RoutingMode mode_of(const json& j, const std::string& where) {
  std::string s = str(j, where);
  auto m = parse_routing_mode(s);
  if (!m) fail(where, "unknown routing mode '" + s + "'");
  return *m;
}

void parse_topology(const json& j, TopologyConfig& t) {
  reject_unknown(j, "topology",
                 {"groups", "chassis_per_group", "blades_per_chassis", "nodes_per_router",
                  "global_links_per_router", "global_links_per_pair", "queue_capacity",
                  "link_cycle_cost"});
  take(j, "groups", "topology", t.groups);
  take(j, "chassis_per_group", "topology", t.chassis_per_group);
  take(j, "blades_per_chassis", "topology", t.blades_per_chassis);
  take(j, "nodes_per_router", "topology", t.nodes_per_router);
  take(j, "global_links_per_router", "topology", t.global_links_per_router);
  take(j, "global_links_per_pair", "topology", t.global_links_per_pair);
  take(j, "queue_capacity", "topology", t.queue_capacity);
  take(j, "link_cycle_cost", "topology", t.link_cycle_cost);
}

void parse_allocation(const json& j, AllocationSpec& a) {
  reject_unknown(j, "allocation", {"ranks", "placement", "seed"});
  take(j, "ranks", "allocation", a.ranks);
  take(j, "seed", "allocation", a.seed);
  if (const json* v = get(j, "placement")) {
    std::string s = str(*v, "allocation.placement");
    auto p = parse_placement(s);
    if (!p) fail("allocation.placement", "unknown placement '" + s + "'");
    a.placement = *p;
  }
}

void parse_workload(const json& j, TrafficPattern& w) {
  reject_unknown(j, "workload",
                 {"pattern", "size", "iterations", "think_time", "grid", "sweep_blocks"});
  if (const json* v = get(j, "pattern")) {
    std::string s = str(*v, "workload.pattern");
    auto p = parse_pattern(s);
    if (!p) fail("workload.pattern", "unknown pattern '" + s + "'");
    w.kind = *p;
  }
  take(j, "size", "workload", w.size_bytes);
  take(j, "iterations", "workload", w.iterations);
  take(j, "think_time", "workload", w.think_time);
  take(j, "sweep_blocks", "workload", w.sweep_blocks);
  if (const json* v = get(j, "grid")) {
    if (!v->is_array() || v->size() < 2 || v->size() > 3)
      fail("workload.grid", "expected [x, y] or [x, y, z]");
    w.grid = {0, 0, 0};
    for (std::size_t i = 0; i < v->size(); ++i)
      w.grid[i] = num<std::uint32_t>((*v)[i], "workload.grid");
  }
}

void parse_policy(const json& j, PolicyConfig& p, bool& calibrate) {
  reject_unknown(j, "routing.policy",
                 {"trigger_bytes", "staleness_limit", "latency_scale", "stall_scale",
                  "hysteresis", "counter_read_penalty", "alltoall_phase"});
  take(j, "trigger_bytes", "routing.policy", p.trigger_bytes);
  take(j, "staleness_limit", "routing.policy", p.staleness_limit);
  take(j, "hysteresis", "routing.policy", p.hysteresis);
  take(j, "counter_read_penalty", "routing.policy", p.counter_read_penalty);
  take(j, "alltoall_phase", "routing.policy", p.alltoall_phase);
  bool has_l = get(j, "latency_scale"), has_s = get(j, "stall_scale");
  if (has_l != has_s)
    fail("routing.policy", "give both latency_scale and stall_scale, or neither");
  if (has_l) {
    take(j, "latency_scale", "routing.policy", p.latency_scale);
    take(j, "stall_scale", "routing.policy", p.stall_scale);
    calibrate = false;
  } else {
    calibrate = true;  // measured from a short alternation prologue
  }
}

void parse_routing(const json& j, RoutingPlan& r, bool& calibrate) {
  reject_unknown(j, "routing", {"static", "alternation", "policy"});
  int given = (get(j, "static") != nullptr) + (get(j, "alternation") != nullptr) +
              (get(j, "policy") != nullptr);
  if (given != 1) fail("routing", "exactly one of static, alternation, policy");
  if (const json* v = get(j, "static")) {
    r.kind = RoutingPlan::Kind::Static;
    r.static_mode = mode_of(*v, "routing.static");
  } else if (const json* v2 = get(j, "alternation")) {
    if (!v2->is_array() || v2->empty())
      fail("routing.alternation", "expected a non-empty array of modes");
    r.kind = RoutingPlan::Kind::Alternation;
    for (const auto& e : *v2) r.alternation.push_back(mode_of(e, "routing.alternation"));
  } else if (const json* v3 = get(j, "policy")) {
    if (!v3->is_object()) fail("routing.policy", "expected an object");
    r.kind = RoutingPlan::Kind::Policy;
    parse_policy(*v3, r.policy, calibrate);
  }
}

void parse_engine(const json& j, EngineConfig& e) {
  reject_unknown(j, "engine",
                 {"max_cycles", "bias", "route_enumeration_limit", "validate", "event_log"});
  take(j, "max_cycles", "engine", e.max_cycles);
  take(j, "route_enumeration_limit", "engine", e.route_enumeration_limit);
  take(j, "validate", "engine", e.validate_invariants);
  take(j, "event_log", "engine", e.keep_event_log);
  if (const json* v = get(j, "bias")) {
    reject_unknown(*v, "engine.bias", {"low", "high", "imb_step"});
    take(*v, "low", "engine.bias", e.bias.low_bias);
    take(*v, "high", "engine.bias", e.bias.high_bias);
    take(*v, "imb_step", "engine.bias", e.bias.imb_step);
  }
}

void parse_background(const json& j, ExperimentConfig& cfg) {
  reject_unknown(j, "background", {"flows", "uniform"});
  if (const json* v = get(j, "flows")) {
    if (!v->is_array()) fail("background.flows", "expected an array");
    for (const auto& f : *v) {
      reject_unknown(f, "background.flows[]",
                     {"src", "dst", "size", "mode", "period", "start"});
      BackgroundFlow bf;
      take(f, "src", "background.flows[]", bf.src);
      take(f, "dst", "background.flows[]", bf.dst);
      take(f, "size", "background.flows[]", bf.size_bytes);
      take(f, "period", "background.flows[]", bf.period);
      take(f, "start", "background.flows[]", bf.start);
      if (const json* m = get(f, "mode")) bf.mode = mode_of(*m, "background.flows[].mode");
      cfg.background.push_back(bf);
    }
  }
  if (const json* v = get(j, "uniform")) {
    reject_unknown(*v, "background.uniform",
                   {"flows", "size", "mode", "period", "start", "seed", "avoid_allocation"});
    UniformBackground ub;
    take(*v, "flows", "background.uniform", ub.flows);
    take(*v, "size", "background.uniform", ub.size_bytes);
    take(*v, "period", "background.uniform", ub.period);
    take(*v, "start", "background.uniform", ub.start);
    take(*v, "seed", "background.uniform", ub.seed);
    take(*v, "avoid_allocation", "background.uniform", ub.avoid_allocation);
    if (const json* m = get(*v, "mode")) ub.mode = mode_of(*m, "background.uniform.mode");
    cfg.uniform_background = ub;
  }
}

void parse_sweep(const json& j, SweepSpec& s) {
  reject_unknown(j, "sweep", {"sizes", "modes"});
  if (const json* v = get(j, "sizes")) {
    if (!v->is_array() || v->empty()) fail("sweep.sizes", "expected a non-empty array");
    for (const auto& e : *v) s.sizes.push_back(num<std::uint64_t>(e, "sweep.sizes"));
  }
  if (const json* v = get(j, "modes")) {
    if (!v->is_array() || v->empty()) fail("sweep.modes", "expected a non-empty array");
    for (const auto& e : *v) s.modes.push_back(mode_of(e, "sweep.modes"));
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(j, "top level",
                 {"topology", "allocation", "workload", "routing", "engine", "background",
                  "trials", "seed", "parallel_trials", "output", "sweep"});

  ExperimentConfig cfg;
  if (const json* v = get(j, "topology")) parse_topology(*v, cfg.topology);
  if (const json* v = get(j, "allocation")) parse_allocation(*v, cfg.allocation);
  if (const json* v = get(j, "workload")) parse_workload(*v, cfg.workload);
  if (const json* v = get(j, "routing"))
    parse_routing(*v, cfg.routing, cfg.policy_calibrate);
  else
    throw ConfigError("config: a routing section is required");
  if (const json* v = get(j, "engine")) parse_engine(*v, cfg.engine);
  if (const json* v = get(j, "background")) parse_background(*v, cfg);
  take(j, "trials", "top level", cfg.trials);
  take(j, "seed", "top level", cfg.seed);
  take(j, "parallel_trials", "top level", cfg.parallel_trials);
  if (const json* v = get(j, "output")) cfg.output = str(*v, "output");
  if (const json* v = get(j, "sweep")) {
    SweepSpec s;
    parse_sweep(*v, s);
    cfg.sweep = std::move(s);
  }
  if (cfg.trials == 0) throw ConfigError("config: trials must be at least 1");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace dragonroute
