#include "dragonroute/message.hpp"

#include <algorithm>

namespace dragonroute {

std::uint32_t packet_flits(std::uint64_t size_bytes, RdmaKind kind, std::uint64_t index) {
  if (size_bytes == 0) throw ZeroSize();
  if (kind == RdmaKind::Get) return 1;
  std::uint64_t offset = index * kPacketPayloadBytes;
  if (offset >= size_bytes) return 0;
  std::uint64_t payload = std::min(size_bytes - offset, kPacketPayloadBytes);
  return static_cast<std::uint32_t>(1 + (payload + kFlitPayloadBytes - 1) / kFlitPayloadBytes);
}

PacketizeDims packetize(std::uint64_t size_bytes, RdmaKind kind) {
  if (size_bytes == 0) throw ZeroSize();
  PacketizeDims dims;
  dims.packets = (size_bytes + kPacketPayloadBytes - 1) / kPacketPayloadBytes;
  if (kind == RdmaKind::Get) {
    dims.flits = dims.packets;
    return dims;
  }
  // Full packets all cost 5 flits; only the tail differs.
  dims.flits = 0;
  if (dims.packets > 1) dims.flits += (dims.packets - 1) * 5;
  dims.flits += packet_flits(size_bytes, kind, dims.packets - 1);
  return dims;
}

}  // namespace dragonroute
