#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dragonroute/counters.hpp"
#include "dragonroute/message.hpp"
#include "dragonroute/routing.hpp"
#include "dragonroute/topology.hpp"

namespace dragonroute {

using Cycle = std::uint64_t;

struct LivelockGuard : std::runtime_error {
  explicit LivelockGuard(Cycle limit)
      : std::runtime_error("simulation exceeded " + std::to_string(limit) + " cycles") {}
};
struct UnknownTag : std::invalid_argument {
  UnknownTag() : std::invalid_argument("no message with this tag was injected") {}
};
struct NotYetDelivered : std::runtime_error {
  NotYetDelivered() : std::runtime_error("message has not finished yet") {}
};

struct EngineConfig {
  Cycle max_cycles = 200'000'000;  // hard stop against stuck simulations
  BiasProfile bias;
  std::size_t route_enumeration_limit = 16;
  bool validate_invariants = false;  // per-cycle conservation checks (slow)
  bool keep_event_log = false;
};

struct RouteTraceEntry {
  std::uint64_t tag = 0;
  std::uint32_t src_node = 0;
  PathClass path_class = PathClass::Minimal;
};

// Everything known about a finished (or in-flight) transfer.
struct MessageStats {
  std::uint64_t tag = 0;
  std::uint32_t src_node = 0, dst_node = 0;
  RoutingMode mode = RoutingMode::Adaptive0;
  std::uint64_t packets = 0, flits = 0;
  Cycle inject_cycle = 0;
  Cycle delivered_cycle = 0;  // last request flit reached the destination
  Cycle responded_cycle = 0;  // last response flit reached the source
  double packet_latency = 0.0;  // mean round-trip cycles over the message's packets
  double stall_ratio = 0.0;     // credit-stalled cycles per flit of this message
};

// Deterministic cycle-quantized network simulator. Each cycle runs three
// phases: (A) link arrivals and credit returns, (B) router service, at
// most one flit per input queue and per output link, (C) NIC service,
// one flit per NIC with responses preferred. Identical seeds and
// injections give identical schedules and counters.
//
// Flow control: every edge buffer is split into classes indexed by the
// hop count a flit arrives with, each class holding up to queue_capacity
// flits with its own credits. A forwarded flit always lands one class
// above the one it leaves, so a buffer-full wait points strictly up the
// ladder and circular waits can never form, whatever mix of routes is in
// flight. The top class only ever hands flits to their destination NIC,
// which always drains; deadlock is therefore structurally impossible.
// Router service takes, per input queue, the earliest flit whose output
// link is free this cycle and whose next class has a credit, so a blocked
// head never pins the flits behind it.
class Engine final : public CongestionView {
 public:
  Engine(const Topology& topo, const EngineConfig& cfg, std::uint64_t seed);

  // Queue a transfer for injection. Tags must be unique; at_cycle in the
  // past is clamped to "next cycle". Same-node transfers complete
  // instantly and never touch the network.
  void inject(const Message& msg, Cycle at_cycle);

  // Fixed-period background source: one `size`-byte message from src to
  // dst every `period` cycles starting at `start`.
  void add_periodic_flow(std::uint32_t src_node, std::uint32_t dst_node,
                         std::uint64_t size_bytes, RoutingMode mode, Cycle period,
                         Cycle start);

  using Callback = std::function<void(std::uint64_t tag, Cycle cycle)>;
  void set_delivery_callback(Callback cb) { on_delivered_ = std::move(cb); }
  void set_completion_callback(Callback cb) { on_completed_ = std::move(cb); }

  // Run until every injected transfer has its responses back and no
  // events remain. Refuses to run with periodic flows attached (they
  // never drain). Returns the cycle of the last delivered response.
  Cycle run_until_idle();
  // Run until all listed tags have completed (response flits received).
  Cycle run_until_complete(std::span<const std::uint64_t> tags);

  Cycle now() const { return cycle_; }

  std::uint64_t measure_tmsg(std::uint64_t tag) const;    // delivery - injection
  std::uint64_t measure_completion(std::uint64_t tag) const;  // response - injection
  MessageStats message_stats(std::uint64_t tag) const;
  bool is_delivered(std::uint64_t tag) const;

  NicCounters snapshot(std::uint32_t node) const;
  std::span<const RouteTraceEntry> route_trace() const { return trace_; }
  const std::vector<std::string>& event_log() const { return log_; }
  const Topology& topology() const { return topo_; }

  // CongestionView over the live network state.
  double queued_flits(std::uint32_t edge) const override;
  double credits_available(std::uint32_t edge) const override;
  double queue_capacity() const override;

 private:
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  static constexpr Cycle kNever = std::numeric_limits<Cycle>::max();

  struct Flit {
    std::uint32_t transit = 0;
    std::uint32_t out_edge = 0;   // fixed at arrival
    std::uint16_t flit_idx = 0;   // position within the packet
    std::uint16_t hop_pos = 0;    // index of the current router in the path
  };

  // One packet on the wire (request or response).
  struct Transit {
    Path path;
    std::uint32_t msg = kNone;
    std::uint32_t request = kNone;  // responses: transit of the request packet
    std::uint64_t packet_index = 0;
    std::uint32_t dest_node = 0;
    std::int32_t trace_idx = -1;
    Cycle first_emit = 0;
    std::uint16_t flits_total = 1;
    bool response = false;
    bool committed = false;  // took its first global hop; route frozen
  };

  struct MsgState {
    Message msg;
    Cycle ready_cycle = 0;
    Cycle inject_cycle = 0;
    Cycle delivered_cycle = kNever;
    Cycle responded_cycle = kNever;
    std::uint64_t total_packets = 0, total_flits = 0;
    std::uint64_t packets_emitted = 0, packets_responded = 0, flits_delivered = 0;
    std::uint64_t latency_sum = 0, stall_cycles = 0;
    std::uint32_t open_transit = kNone;  // packet currently serializing
    std::uint16_t next_flit = 0;
    bool loopback = false;
  };

  struct RespEntry {
    std::uint32_t transit = 0;
    Cycle ready = 0;
  };

  struct NicState {
    std::deque<std::uint32_t> sendq;  // message indices, FIFO
    std::deque<RespEntry> respq;
    std::uint32_t outstanding = 0;  // request packets without a response yet
    NicCounters counters;
  };

  // Buffer classes: walks are bounded by kMaxWalkHops, so a flit's hop
  // index — and with it the class it occupies — never reaches past the
  // ladder's top rung.
  static constexpr std::uint32_t kBufferClasses = kMaxWalkHops + 1;

  struct EdgeState {
    std::array<std::uint32_t, kBufferClasses> credits{};
    std::array<std::uint32_t, kBufferClasses> queued{};    // per-class occupancy
    std::array<std::uint32_t, kBufferClasses> inflight{};  // flits on the wire
    std::array<std::uint32_t, kBufferClasses> credits_inflight{};  // returns on the wire
    std::uint32_t pending = 0;  // flits queued somewhere whose next hop is this edge
    Cycle last_send = kNever;
  };

  struct PeriodicFlow {
    std::uint32_t src = 0, dst = 0;
    std::uint64_t size = 0;
    RoutingMode mode = RoutingMode::MinHash;
    Cycle period = 1;
  };

  enum class EvKind : std::uint8_t { FlitArrive, CreditReturn, Inject, FlowSpawn };
  struct Event {
    Cycle cycle = 0;
    std::uint64_t seq = 0;
    EvKind kind = EvKind::FlitArrive;
    std::uint32_t edge = 0;
    std::uint32_t index = 0;  // msg / flow index
    Flit flit;
  };
  struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
      if (a.cycle != b.cycle) return a.cycle > b.cycle;
      return a.seq > b.seq;
    }
  };

  // edge layout: [0, E) router-router, [E, E+N) NIC->router injection,
  // [E+N, E+2N) router->NIC delivery
  std::uint32_t inject_edge(std::uint32_t node) const { return rr_edges_ + node; }
  std::uint32_t deliver_edge(std::uint32_t node) const {
    return rr_edges_ + nodes_ + node;
  }
  bool is_rr(std::uint32_t edge) const { return edge < rr_edges_; }
  bool is_deliver(std::uint32_t edge) const { return edge >= rr_edges_ + nodes_; }
  Cycle edge_latency(std::uint32_t edge) const {
    return is_rr(edge) ? topo_.config().link_cycle_cost : 1;
  }

  void schedule(Cycle at, EvKind kind, std::uint32_t edge, std::uint32_t index, Flit flit);
  void process_events();
  void service_routers();
  void service_nics();
  void advance_clock();
  void arrive(std::uint32_t edge, Flit flit);
  void deliver(std::uint32_t edge, Flit flit);
  void handle_response_arrival(Flit flit);
  void reroute(std::uint32_t ti, std::uint32_t router, std::uint16_t hop_pos);
  std::uint32_t out_edge_for(const Transit& tr, std::uint16_t hop_pos) const;
  void open_packet(std::uint32_t node, std::uint32_t mi);
  void emit_flit(std::uint32_t node, std::uint32_t mi);
  void enqueue_to_nic(std::uint32_t mi);
  void complete_message(std::uint32_t mi);
  std::uint64_t flow_key(const Message& m, std::uint64_t packet_index) const;
  void note(const char* kind, char unit, std::uint32_t id, std::uint64_t tag,
            std::uint64_t packet);
  void validate_state() const;
  const MsgState& find_msg(std::uint64_t tag) const;
  template <typename Done>
  Cycle run_loop(Done done);

  const Topology& topo_;
  EngineConfig cfg_;
  std::mt19937_64 rng_;
  RoutingContext route_ctx_;

  std::uint32_t rr_edges_ = 0, nodes_ = 0, routers_ = 0;
  Cycle cycle_ = 0;
  std::uint64_t event_seq_ = 0;
  Cycle last_response_cycle_ = 0;

  std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
  std::vector<MsgState> msgs_;
  std::vector<Transit> transits_;
  std::vector<NicState> nics_;
  std::vector<EdgeState> edges_;
  std::vector<std::deque<Flit>> queues_;           // rr + injection edges
  std::vector<std::vector<std::uint32_t>> router_inputs_;
  std::vector<std::uint32_t> rr_ptr_;              // round-robin input cursor
  std::vector<std::uint32_t> resident_;            // flits queued at each router
  std::uint64_t resident_total_ = 0;
  std::uint64_t inflight_total_ = 0;
  std::uint64_t unresponded_messages_ = 0;
  std::uint64_t sendq_total_ = 0, respq_total_ = 0;
  std::uint64_t background_tags_ = 0;
  std::vector<PeriodicFlow> flows_;
  std::vector<RouteTraceEntry> trace_;
  std::vector<std::string> log_;
  std::unordered_map<std::uint64_t, std::uint32_t> tag_to_msg_;

  Callback on_delivered_, on_completed_;

  // run_until_complete bookkeeping
  std::unordered_set<std::uint64_t> waiting_tags_;
  std::uint64_t waiting_left_ = 0;
};

}  // namespace dragonroute
