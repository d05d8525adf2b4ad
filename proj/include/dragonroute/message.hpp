#pragma once

#include <cstdint>
#include <stdexcept>

#include "dragonroute/modes.hpp"

namespace dragonroute {

struct ZeroSize : std::invalid_argument {
  ZeroSize() : std::invalid_argument("message size must be at least 1 byte") {}
};

enum class RdmaKind : std::uint8_t { Put, Get };

// One RDMA transfer as handed to the source NIC.
struct Message {
  std::uint64_t tag = 0;  // unique per engine instance
  std::uint32_t src_node = 0;
  std::uint32_t dst_node = 0;
  std::uint64_t size_bytes = 1;
  RdmaKind kind = RdmaKind::Put;
  RoutingMode mode = RoutingMode::Adaptive0;
};

struct PacketizeDims {
  std::uint64_t packets = 0;
  std::uint64_t flits = 0;
  double flits_per_packet() const {
    return packets ? static_cast<double>(flits) / static_cast<double>(packets) : 0.0;
  }
};

inline constexpr std::uint64_t kPacketPayloadBytes = 64;
inline constexpr std::uint64_t kFlitPayloadBytes = 16;
// NIC stops starting new packets while this many request packets await
// their response flit.
inline constexpr std::uint32_t kMaxOutstandingPackets = 1024;

// Request flits carried by packet `index` of a transfer. PUTs carry one
// header flit plus up to four payload flits (16 B each); GETs are a
// single request flit, the payload rides the response path.
std::uint32_t packet_flits(std::uint64_t size_bytes, RdmaKind kind, std::uint64_t index);

// Total (packets, request flits) for a transfer. Throws ZeroSize.
PacketizeDims packetize(std::uint64_t size_bytes, RdmaKind kind);

}  // namespace dragonroute
