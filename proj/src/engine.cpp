#include "dragonroute/engine.hpp"

#include <algorithm>
#include <cassert>

#include "dragonroute/rng.hpp"

namespace dragonroute {

Engine::Engine(const Topology& topo, const EngineConfig& cfg, std::uint64_t seed)
    : topo_(topo), cfg_(cfg), rng_(mix_seed(seed, 0xd27a6f01u)) {
  rr_edges_ = topo_.edge_count();
  nodes_ = topo_.node_count();
  routers_ = topo_.router_count();

  route_ctx_.topo = &topo_;
  route_ctx_.congestion = this;
  route_ctx_.bias = cfg_.bias;
  route_ctx_.enumeration_limit = cfg_.route_enumeration_limit;

  edges_.resize(rr_edges_ + 2ull * nodes_);
  std::uint32_t cap = topo_.config().queue_capacity;
  for (std::uint32_t e = 0; e < rr_edges_ + nodes_; ++e) edges_[e].credits.fill(cap);
  queues_.resize(rr_edges_ + nodes_);

  router_inputs_.resize(routers_);
  for (std::uint32_t e = 0; e < rr_edges_; ++e)
    router_inputs_[topo_.edge_endpoints(e).second].push_back(e);
  for (std::uint32_t n = 0; n < nodes_; ++n)
    router_inputs_[topo_.node_router(n)].push_back(inject_edge(n));
  rr_ptr_.assign(routers_, 0);
  resident_.assign(routers_, 0);
  nics_.resize(nodes_);
}

void Engine::schedule(Cycle at, EvKind kind, std::uint32_t edge, std::uint32_t index,
                      Flit flit) {
  events_.push(Event{at, event_seq_++, kind, edge, index, flit});
}

std::uint64_t Engine::flow_key(const Message& m, std::uint64_t packet_index) const {
  std::uint64_t key = hash_combine(splitmix64(m.src_node), m.dst_node);
  if (m.mode == RoutingMode::InOrder) return key;  // one path per endpoint pair
  return hash_combine(hash_combine(key, m.tag), packet_index);
}

void Engine::inject(const Message& msg, Cycle at_cycle) {
  if (msg.src_node >= nodes_ || msg.dst_node >= nodes_)
    throw std::invalid_argument("inject: node index out of range");
  if (tag_to_msg_.count(msg.tag)) throw std::invalid_argument("inject: duplicate tag");
  PacketizeDims dims = packetize(msg.size_bytes, msg.kind);  // throws ZeroSize

  Cycle at = std::max(at_cycle, cycle_);
  MsgState ms;
  ms.msg = msg;
  ms.inject_cycle = at;
  ms.total_packets = dims.packets;
  ms.total_flits = dims.flits;
  std::uint32_t mi = static_cast<std::uint32_t>(msgs_.size());
  tag_to_msg_.emplace(msg.tag, mi);
  if (cfg_.keep_event_log) note("inject", 'n', msg.src_node, msg.tag, 0);

  if (msg.src_node == msg.dst_node) {
    // Loopback never enters the network: delivered and answered on the
    // spot, no flits, no counter movement.
    ms.loopback = true;
    ms.delivered_cycle = ms.responded_cycle = at;
    msgs_.push_back(std::move(ms));
    std::uint64_t tag = msg.tag;
    if (on_delivered_) on_delivered_(tag, at);
    complete_message(mi);
    return;
  }

  ++unresponded_messages_;
  msgs_.push_back(std::move(ms));
  if (at <= cycle_) {
    enqueue_to_nic(mi);
  } else {
    schedule(at, EvKind::Inject, 0, mi, {});
  }
}

void Engine::enqueue_to_nic(std::uint32_t mi) {
  MsgState& ms = msgs_[mi];
  ms.ready_cycle = cycle_ + 1;
  nics_[ms.msg.src_node].sendq.push_back(mi);
  ++sendq_total_;
}

void Engine::add_periodic_flow(std::uint32_t src_node, std::uint32_t dst_node,
                               std::uint64_t size_bytes, RoutingMode mode, Cycle period,
                               Cycle start) {
  if (src_node >= nodes_ || dst_node >= nodes_)
    throw std::invalid_argument("flow: node index out of range");
  if (period == 0) throw std::invalid_argument("flow: period must be positive");
  if (size_bytes == 0) throw ZeroSize();
  std::uint32_t fi = static_cast<std::uint32_t>(flows_.size());
  flows_.push_back({src_node, dst_node, size_bytes, mode, period});
  schedule(std::max(start, cycle_), EvKind::FlowSpawn, 0, fi, {});
}

void Engine::complete_message(std::uint32_t mi) {
  MsgState& ms = msgs_[mi];
  ms.responded_cycle = std::max(ms.inject_cycle, cycle_);
  Cycle when = ms.responded_cycle;
  std::uint64_t tag = ms.msg.tag;
  if (!ms.loopback) --unresponded_messages_;
  if (waiting_left_ > 0) {
    auto it = waiting_tags_.find(tag);
    if (it != waiting_tags_.end()) {
      waiting_tags_.erase(it);
      --waiting_left_;
    }
  }
  if (on_completed_) on_completed_(tag, when);  // may inject; ms may dangle after
}

// ---- event phase -----------------------------------------------------

void Engine::process_events() {
  while (!events_.empty() && events_.top().cycle <= cycle_) {
    Event ev = events_.top();
    events_.pop();
    switch (ev.kind) {
      case EvKind::FlitArrive: {
        edges_[ev.edge].inflight[ev.flit.hop_pos]--;
        --inflight_total_;
        if (is_deliver(ev.edge))
          deliver(ev.edge, ev.flit);
        else
          arrive(ev.edge, ev.flit);
        break;
      }
      case EvKind::CreditReturn: {
        edges_[ev.edge].credits_inflight[ev.flit.hop_pos]--;
        edges_[ev.edge].credits[ev.flit.hop_pos]++;
        break;
      }
      case EvKind::Inject: {
        enqueue_to_nic(ev.index);
        break;
      }
      case EvKind::FlowSpawn: {
        const PeriodicFlow fl = flows_[ev.index];
        Message m;
        m.tag = (1ull << 63) | background_tags_++;
        m.src_node = fl.src;
        m.dst_node = fl.dst;
        m.size_bytes = fl.size;
        m.mode = fl.mode;
        inject(m, cycle_);
        schedule(cycle_ + fl.period, EvKind::FlowSpawn, 0, ev.index, {});
        break;
      }
    }
  }
}

std::uint32_t Engine::out_edge_for(const Transit& tr, std::uint16_t hop_pos) const {
  if (hop_pos + 1u >= tr.path.hops.size()) return deliver_edge(tr.dest_node);
  return topo_.edge_index(tr.path.hops[hop_pos], tr.path.hops[hop_pos + 1]);
}

void Engine::reroute(std::uint32_t ti, std::uint32_t router, std::uint16_t hop_pos) {
  Transit& tr = transits_[ti];
  std::uint32_t dst_router = tr.path.hops.back();
  if (router == dst_router) return;
  RouteDecision d = choose_route(route_ctx_, msgs_[tr.msg].msg.mode, router, dst_router,
                                 hop_pos, flow_key(msgs_[tr.msg].msg, tr.packet_index),
                                 rng_);
  // Keep the hops already walked, replace everything ahead. No global
  // hop was taken yet (reroutes stop at commit), so the path class is
  // exactly the class of the new tail.
  std::vector<std::uint32_t> hops(tr.path.hops.begin(),
                                  tr.path.hops.begin() + hop_pos + 1);
  hops.insert(hops.end(), d.path.hops.begin() + 1, d.path.hops.end());
  tr.path.hops = std::move(hops);
  tr.path.path_class = d.path.path_class;
  tr.path.intermediate_group = d.path.intermediate_group;
  if (tr.trace_idx >= 0) trace_[tr.trace_idx].path_class = d.path.path_class;
}

void Engine::arrive(std::uint32_t edge, Flit f) {
  std::uint32_t r = is_rr(edge) ? topo_.edge_endpoints(edge).second
                                : topo_.node_router(edge - rr_edges_);
  Transit& tr = transits_[f.transit];
  assert(tr.path.hops[f.hop_pos] == r);
  if (!tr.response && f.flit_idx == 0 && !tr.committed &&
      is_adaptive(msgs_[tr.msg].msg.mode) && f.hop_pos + 1u < tr.path.hops.size()) {
    reroute(f.transit, r, f.hop_pos);
  }
  f.out_edge = out_edge_for(transits_[f.transit], f.hop_pos);
  if (f.hop_pos >= kBufferClasses)
    throw std::logic_error("flow control violated: walk outran the buffer classes");
  edges_[f.out_edge].pending++;
  edges_[edge].queued[f.hop_pos]++;
  queues_[edge].push_back(f);
  resident_[r]++;
  ++resident_total_;
  if (cfg_.validate_invariants &&
      edges_[edge].queued[f.hop_pos] > topo_.config().queue_capacity)
    throw std::logic_error("flow control violated: queue above capacity");
  if (cfg_.keep_event_log)
    note("arrive", 'r', r, transits_[f.transit].msg == kNone
                              ? 0
                              : msgs_[transits_[f.transit].msg].msg.tag,
         transits_[f.transit].packet_index);
}

void Engine::deliver(std::uint32_t edge, Flit f) {
  std::uint32_t node = edge - rr_edges_ - nodes_;
  std::uint32_t ti = f.transit;
  if (transits_[ti].response) {
    handle_response_arrival(f);
    return;
  }
  std::uint32_t mi = transits_[ti].msg;
  msgs_[mi].flits_delivered++;
  if (cfg_.keep_event_log)
    note("deliver", 'n', node, msgs_[mi].msg.tag, transits_[ti].packet_index);

  if (f.flit_idx + 1u == transits_[ti].flits_total) {
    // Last flit of the packet: the receiving NIC answers with a single
    // response flit over a hash-picked minimal path, ready next cycle.
    Transit resp;
    resp.msg = mi;
    resp.request = ti;
    resp.response = true;
    resp.flits_total = 1;
    resp.dest_node = msgs_[mi].msg.src_node;
    std::uint32_t from_r = topo_.node_router(node);
    std::uint32_t to_r = topo_.node_router(resp.dest_node);
    if (from_r == to_r) {
      resp.path = Path{{from_r}, PathClass::Minimal, std::nullopt};
    } else {
      auto pool = topo_.minimal_paths(from_r, to_r, route_ctx_.enumeration_limit);
      std::uint64_t key =
          hash_combine(hash_combine(msgs_[mi].msg.tag, transits_[ti].packet_index),
                       0x72657370ull);
      resp.path = pool[splitmix64(key) % pool.size()];
    }
    std::uint32_t rti = static_cast<std::uint32_t>(transits_.size());
    transits_.push_back(std::move(resp));
    nics_[node].respq.push_back({rti, cycle_ + 1});
    ++respq_total_;
  }

  MsgState& ms = msgs_[mi];
  if (ms.flits_delivered == ms.total_flits && ms.delivered_cycle == kNever) {
    ms.delivered_cycle = cycle_;
    std::uint64_t tag = ms.msg.tag;
    if (on_delivered_) on_delivered_(tag, cycle_);  // may inject; ms dangles after
  }
}

void Engine::handle_response_arrival(Flit f) {
  Transit& resp = transits_[f.transit];
  std::uint32_t mi = resp.msg;
  MsgState& ms = msgs_[mi];
  std::uint32_t src = ms.msg.src_node;
  nics_[src].outstanding--;
  std::uint64_t latency = cycle_ - transits_[resp.request].first_emit;
  nics_[src].counters.req_cum_latency += latency;
  ms.latency_sum += latency;
  ms.packets_responded++;
  last_response_cycle_ = cycle_;
  if (cfg_.keep_event_log) note("resp_deliver", 'n', src, ms.msg.tag, resp.packet_index);
  if (ms.packets_responded == ms.total_packets) complete_message(mi);
}

// ---- router phase ----------------------------------------------------

void Engine::service_routers() {
  if (resident_total_ == 0) return;
  for (std::uint32_t r = 0; r < routers_; ++r) {
    if (resident_[r] == 0) continue;
    const auto& inputs = router_inputs_[r];
    const std::size_t k = inputs.size();
    const std::size_t start = rr_ptr_[r] % k;
    rr_ptr_[r] = static_cast<std::uint32_t>((start + 1) % k);
    for (std::size_t i = 0; i < k; ++i) {
      std::uint32_t e_in = inputs[(start + i) % k];
      auto& q = queues_[e_in];
      if (q.empty()) continue;
      // Earliest flit that can actually move this cycle: output link
      // still free and, unless it is being handed to its NIC, a credit
      // available in the class it would enter.
      std::size_t pick = q.size();
      for (std::size_t j = 0; j < q.size(); ++j) {
        const Flit& cand = q[j];
        const EdgeState& cand_oe = edges_[cand.out_edge];
        if (cand_oe.last_send == cycle_) continue;  // output link already served
        if (!is_deliver(cand.out_edge)) {
          std::uint32_t next_class = cand.hop_pos + 1u;
          if (next_class >= kBufferClasses || cand_oe.credits[next_class] == 0)
            continue;
        }
        pick = j;
        break;
      }
      if (pick == q.size()) continue;
      Flit f = q[pick];
      EdgeState& oe = edges_[f.out_edge];
      q.erase(q.begin() + static_cast<std::ptrdiff_t>(pick));
      edges_[e_in].queued[f.hop_pos]--;
      resident_[r]--;
      --resident_total_;
      oe.pending--;
      oe.last_send = cycle_;
      Flit nf = f;
      if (!is_deliver(f.out_edge)) {
        nf.hop_pos = static_cast<std::uint16_t>(f.hop_pos + 1);
        oe.credits[nf.hop_pos]--;
      }
      oe.inflight[nf.hop_pos]++;
      ++inflight_total_;
      schedule(cycle_ + edge_latency(f.out_edge), EvKind::FlitArrive, f.out_edge, 0, nf);
      // free the input slot: credit travels back at the link's latency
      edges_[e_in].credits_inflight[f.hop_pos]++;
      schedule(cycle_ + edge_latency(e_in), EvKind::CreditReturn, e_in, 0,
               Flit{0, 0, 0, f.hop_pos});
      Transit& tr = transits_[f.transit];
      if (!tr.response && is_rr(f.out_edge) &&
          topo_.edge_kind(f.out_edge) == LinkKind::Global)
        tr.committed = true;
      if (cfg_.keep_event_log)
        note("forward", 'r', r, tr.msg == kNone ? 0 : msgs_[tr.msg].msg.tag,
             tr.packet_index);
    }
  }
}

// ---- NIC phase -------------------------------------------------------

void Engine::open_packet(std::uint32_t node, std::uint32_t mi) {
  Transit tr;
  {
    MsgState& ms = msgs_[mi];
    tr.msg = mi;
    tr.packet_index = ms.packets_emitted;
    tr.flits_total = static_cast<std::uint16_t>(
        packet_flits(ms.msg.size_bytes, ms.msg.kind, tr.packet_index));
    tr.dest_node = ms.msg.dst_node;
    std::uint32_t r_src = topo_.node_router(ms.msg.src_node);
    std::uint32_t r_dst = topo_.node_router(ms.msg.dst_node);
    if (r_src == r_dst) {
      tr.path = Path{{r_src}, PathClass::Minimal, std::nullopt};
    } else {
      RouteDecision d = choose_route(route_ctx_, ms.msg.mode, r_src, r_dst, 0,
                                     flow_key(ms.msg, tr.packet_index), rng_);
      tr.path = std::move(d.path);
    }
    tr.trace_idx = static_cast<std::int32_t>(trace_.size());
    trace_.push_back({ms.msg.tag, ms.msg.src_node, tr.path.path_class});
  }
  std::uint32_t ti = static_cast<std::uint32_t>(transits_.size());
  transits_.push_back(std::move(tr));
  msgs_[mi].open_transit = ti;
  msgs_[mi].next_flit = 0;
  nics_[node].outstanding++;
}

void Engine::emit_flit(std::uint32_t node, std::uint32_t mi) {
  MsgState& ms = msgs_[mi];
  std::uint32_t ti = ms.open_transit;
  Transit& tr = transits_[ti];
  std::uint16_t idx = ms.next_flit;
  if (idx == 0) tr.first_emit = cycle_;
  EdgeState& ee = edges_[inject_edge(node)];
  ee.credits[0]--;
  ee.last_send = cycle_;
  ee.inflight[0]++;
  ++inflight_total_;
  schedule(cycle_ + 1, EvKind::FlitArrive, inject_edge(node), 0, Flit{ti, 0, idx, 0});
  nics_[node].counters.req_flits++;
  if (cfg_.keep_event_log) note("emit", 'n', node, ms.msg.tag, tr.packet_index);
  if (idx + 1u == tr.flits_total) {
    nics_[node].counters.req_packets++;
    ms.packets_emitted++;
    ms.open_transit = kNone;
    ms.next_flit = 0;
    if (ms.packets_emitted == ms.total_packets) {
      nics_[node].sendq.pop_front();
      --sendq_total_;
    }
  } else {
    ms.next_flit++;
  }
}

void Engine::service_nics() {
  for (std::uint32_t n = 0; n < nodes_; ++n) {
    NicState& nic = nics_[n];
    // Response flits preempt request serialization.
    if (!nic.respq.empty() && nic.respq.front().ready <= cycle_) {
      EdgeState& ee = edges_[inject_edge(n)];
      if (ee.credits[0] > 0 && ee.last_send != cycle_) {
        std::uint32_t ti = nic.respq.front().transit;
        nic.respq.pop_front();
        --respq_total_;
        transits_[ti].first_emit = cycle_;
        ee.credits[0]--;
        ee.last_send = cycle_;
        ee.inflight[0]++;
        ++inflight_total_;
        schedule(cycle_ + 1, EvKind::FlitArrive, inject_edge(n), 0, Flit{ti, 0, 0, 0});
        if (cfg_.keep_event_log)
          note("resp_emit", 'n', n, msgs_[transits_[ti].msg].msg.tag,
               transits_[ti].packet_index);
      }
      continue;  // the NIC spent this cycle on the response either way
    }
    if (nic.sendq.empty()) continue;
    std::uint32_t mi = nic.sendq.front();
    if (msgs_[mi].ready_cycle > cycle_) continue;
    if (msgs_[mi].open_transit == kNone) {
      // Window limit: no new packet while too many wait for responses.
      // Waiting on the window is idle time, not a credit stall.
      if (nic.outstanding >= kMaxOutstandingPackets) continue;
      open_packet(n, mi);
    }
    if (edges_[inject_edge(n)].credits[0] == 0) {
      nic.counters.req_flits_stalled++;
      msgs_[mi].stall_cycles++;
      continue;
    }
    emit_flit(n, mi);
  }
}

// ---- clock -----------------------------------------------------------

void Engine::advance_clock() {
  if (resident_total_ > 0) {
    ++cycle_;
    return;
  }
  // Nothing inside the network: jump to the next cycle anything can act.
  Cycle next = kNever;
  if (!events_.empty()) next = events_.top().cycle;
  for (std::uint32_t n = 0; n < nodes_ && next > cycle_ + 1; ++n) {
    const NicState& nic = nics_[n];
    if (!nic.respq.empty())
      next = std::min(next, std::max(nic.respq.front().ready, cycle_ + 1));
    if (!nic.sendq.empty())
      next = std::min(next, std::max(msgs_[nic.sendq.front()].ready_cycle, cycle_ + 1));
  }
  if (next == kNever) {
    ++cycle_;  // nothing left anywhere; the run loop exits on its own
    return;
  }
  cycle_ = std::max(next, cycle_ + 1);
}

template <typename Done>
Cycle Engine::run_loop(Done done) {
  while (!done()) {
    if (cycle_ > cfg_.max_cycles) throw LivelockGuard(cfg_.max_cycles);
    process_events();
    if (done()) break;
    service_routers();
    service_nics();
    if (cfg_.validate_invariants) validate_state();
    if (done()) break;
    advance_clock();
  }
  return last_response_cycle_;
}

Cycle Engine::run_until_idle() {
  if (!flows_.empty())
    throw std::logic_error("run_until_idle: periodic flows never drain");
  auto done = [this] {
    return unresponded_messages_ == 0 && sendq_total_ == 0 && respq_total_ == 0 &&
           resident_total_ == 0 && inflight_total_ == 0 && events_.empty();
  };
  return run_loop(done);
}

Cycle Engine::run_until_complete(std::span<const std::uint64_t> tags) {
  waiting_tags_.clear();
  for (std::uint64_t tag : tags) {
    auto it = tag_to_msg_.find(tag);
    if (it != tag_to_msg_.end() && msgs_[it->second].responded_cycle != kNever) continue;
    waiting_tags_.insert(tag);
  }
  waiting_left_ = waiting_tags_.size();
  auto done = [this] { return waiting_left_ == 0; };
  Cycle c = run_loop(done);
  waiting_tags_.clear();
  return c;
}

// ---- measurement -----------------------------------------------------

const Engine::MsgState& Engine::find_msg(std::uint64_t tag) const {
  auto it = tag_to_msg_.find(tag);
  if (it == tag_to_msg_.end()) throw UnknownTag();
  return msgs_[it->second];
}

std::uint64_t Engine::measure_tmsg(std::uint64_t tag) const {
  const MsgState& ms = find_msg(tag);
  if (ms.delivered_cycle == kNever) throw NotYetDelivered();
  return ms.delivered_cycle - ms.inject_cycle;
}

std::uint64_t Engine::measure_completion(std::uint64_t tag) const {
  const MsgState& ms = find_msg(tag);
  if (ms.responded_cycle == kNever) throw NotYetDelivered();
  return ms.responded_cycle - ms.inject_cycle;
}

bool Engine::is_delivered(std::uint64_t tag) const {
  return find_msg(tag).delivered_cycle != kNever;
}

MessageStats Engine::message_stats(std::uint64_t tag) const {
  const MsgState& ms = find_msg(tag);
  if (ms.responded_cycle == kNever) throw NotYetDelivered();
  MessageStats st;
  st.tag = tag;
  st.src_node = ms.msg.src_node;
  st.dst_node = ms.msg.dst_node;
  st.mode = ms.msg.mode;
  st.packets = ms.loopback ? 0 : ms.total_packets;
  st.flits = ms.loopback ? 0 : ms.total_flits;
  st.inject_cycle = ms.inject_cycle;
  st.delivered_cycle = ms.delivered_cycle;
  st.responded_cycle = ms.responded_cycle;
  if (ms.packets_responded > 0)
    st.packet_latency = static_cast<double>(ms.latency_sum) /
                        static_cast<double>(ms.packets_responded);
  if (st.flits > 0)
    st.stall_ratio =
        static_cast<double>(ms.stall_cycles) / static_cast<double>(st.flits);
  return st;
}

NicCounters Engine::snapshot(std::uint32_t node) const {
  if (node >= nodes_) throw std::invalid_argument("snapshot: node out of range");
  return nics_[node].counters;
}

double Engine::queued_flits(std::uint32_t edge) const {
  return static_cast<double>(edges_[edge].pending);
}

double Engine::credits_available(std::uint32_t edge) const {
  // The tightest class is the one backpressure is acting through.
  const auto& cr = edges_[edge].credits;
  return static_cast<double>(*std::min_element(cr.begin(), cr.end()));
}

double Engine::queue_capacity() const {
  return static_cast<double>(topo_.config().queue_capacity);
}

// ---- diagnostics -----------------------------------------------------

void Engine::note(const char* kind, char unit, std::uint32_t id, std::uint64_t tag,
                  std::uint64_t packet) {
  log_.push_back(std::to_string(cycle_) + " " + kind + " " + unit +
                 std::to_string(id) + " t" + std::to_string(tag) + ":p" +
                 std::to_string(packet));
}

void Engine::validate_state() const {
  std::uint64_t queued = 0;
  for (const auto& q : queues_) queued += q.size();
  if (queued != resident_total_)
    throw std::logic_error("conservation violated: resident flit count drifted");
  std::uint32_t cap = topo_.config().queue_capacity;
  for (std::uint32_t e = 0; e < rr_edges_ + nodes_; ++e) {
    const EdgeState& es = edges_[e];
    std::uint64_t occupied = 0;
    for (std::uint32_t p = 0; p < kBufferClasses; ++p) {
      if (es.credits[p] + es.credits_inflight[p] + es.inflight[p] + es.queued[p] != cap)
        throw std::logic_error("conservation violated: credits leaked on an edge");
      occupied += es.queued[p];
    }
    if (occupied != queues_[e].size())
      throw std::logic_error("conservation violated: class occupancy drifted");
  }
  for (const NicState& nic : nics_)
    if (nic.outstanding > kMaxOutstandingPackets)
      throw std::logic_error("window violated: too many outstanding packets");
}

}  // namespace dragonroute
