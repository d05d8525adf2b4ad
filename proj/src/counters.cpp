#include "dragonroute/counters.hpp"

namespace dragonroute {

ModelInputs derive_inputs(const NicCounters& before, const NicCounters& after,
                          std::uint64_t msg_size_bytes, RdmaKind kind) {
  NicCounters d = after - before;
  if (d.req_packets == 0) throw NoPackets();
  ModelInputs in;
  in.packet_latency = static_cast<double>(d.req_cum_latency) / static_cast<double>(d.req_packets);
  in.stall_ratio = d.req_flits
                       ? static_cast<double>(d.req_flits_stalled) / static_cast<double>(d.req_flits)
                       : 0.0;
  PacketizeDims dims = packetize(msg_size_bytes, kind);
  in.message_packets = dims.packets;
  in.message_flits = dims.flits;
  return in;
}

double predict_tmsg_small(const ModelInputs& in) {
  return in.packet_latency / 2.0 +
         static_cast<double>(in.message_flits) * (in.stall_ratio + 1.0);
}

double predict_tmsg(const ModelInputs& in) {
  double window = (static_cast<double>(in.message_packets) + 512.0) / 1024.0;
  return window * in.packet_latency +
         static_cast<double>(in.message_flits) * (in.stall_ratio + 1.0);
}

}  // namespace dragonroute
