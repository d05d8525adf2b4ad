#pragma once

#include <cstdint>
#include <stdexcept>

#include "dragonroute/message.hpp"

namespace dragonroute {

struct NoPackets : std::runtime_error {
  NoPackets() : std::runtime_error("counter interval contains no completed packets") {}
};

// Per-NIC request counters, all in cycles / counts. Latency is kept in
// cycles internally; conversion to wall time is a presentation concern.
struct NicCounters {
  std::uint64_t req_flits = 0;            // request flits emitted
  std::uint64_t req_flits_stalled = 0;    // cycles the head request flit sat credit-blocked
  std::uint64_t req_packets = 0;          // request packets fully serialized
  std::uint64_t req_cum_latency = 0;      // sum of per-packet round-trip cycles

  NicCounters operator-(const NicCounters& o) const {
    return {req_flits - o.req_flits, req_flits_stalled - o.req_flits_stalled,
            req_packets - o.req_packets, req_cum_latency - o.req_cum_latency};
  }
  bool operator==(const NicCounters&) const = default;
};

// Inputs of the transmission-time model, derived from a counter delta
// plus the dimensions of the transfer being predicted.
struct ModelInputs {
  double packet_latency = 0.0;    // mean round-trip cycles per packet in the interval
  double stall_ratio = 0.0;       // stalled cycles per emitted flit
  std::uint64_t message_packets = 0;
  std::uint64_t message_flits = 0;

  // Mean flits per packet of the transfer; 1 for GETs, up to 5 for PUTs.
  double flits_per_packet() const {
    return message_packets ? static_cast<double>(message_flits) /
                                 static_cast<double>(message_packets)
                           : 0.0;
  }
  // The model approximates a packet's round trip by its measured latency.
  double round_trip() const { return packet_latency; }
};

// Throws NoPackets if the interval completed no packets. A packet-free
// interval with emitted flits still yields a stall ratio of 0/ns, so the
// flit delta may be zero only together with the packet delta.
ModelInputs derive_inputs(const NicCounters& before, const NicCounters& after,
                          std::uint64_t msg_size_bytes, RdmaKind kind);

// First-flit service time for transfers that fit one outstanding window:
// latency/2 to reach the wire plus one serialization slot per flit.
double predict_tmsg_small(const ModelInputs& in);

// Windowed transfer time: round-trips consumed by the outstanding-packet
// window plus credit-stall-inflated serialization of every flit.
double predict_tmsg(const ModelInputs& in);

}  // namespace dragonroute
