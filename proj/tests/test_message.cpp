#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <random>

#include "dragonroute/message.hpp"

using namespace dragonroute;

namespace {

// Independent oracle: walk the transfer in 64-byte chunks and count what
// each chunk costs on the request path, one 16-byte flit at a time.
PacketizeDims packetize_oracle(std::uint64_t size, RdmaKind kind) {
  PacketizeDims dims;
  std::uint64_t remaining = size;
  while (remaining > 0) {
    const std::uint64_t chunk = std::min<std::uint64_t>(remaining, 64);
    dims.packets += 1;
    if (kind == RdmaKind::Get) {
      dims.flits += 1;  // request flit only; payload rides the response
    } else {
      std::uint64_t header = 1, payload_flits = 0, left = chunk;
      while (left > 0) {
        payload_flits += 1;
        left -= std::min<std::uint64_t>(left, 16);
      }
      dims.flits += header + payload_flits;
    }
    remaining -= chunk;
  }
  return dims;
}

}  // namespace

TEST_CASE("single-packet boundaries") {
  auto p64 = packetize(64, RdmaKind::Put);
  CHECK(p64.packets == 1);
  CHECK(p64.flits == 5);
  CHECK(p64.flits_per_packet() == doctest::Approx(5.0));

  auto g64 = packetize(64, RdmaKind::Get);
  CHECK(g64.packets == 1);
  CHECK(g64.flits == 1);
  CHECK(g64.flits_per_packet() == doctest::Approx(1.0));

  auto p1 = packetize(1, RdmaKind::Put);
  CHECK(p1.packets == 1);
  CHECK(p1.flits == 2);  // header + one 16-byte payload flit

  CHECK(packetize(16, RdmaKind::Put).flits == 2);
  CHECK(packetize(17, RdmaKind::Put).flits == 3);
}

TEST_CASE("multi-packet transfer with a short tail") {
  auto p = packetize(130, RdmaKind::Put);
  CHECK(p.packets == 3);
  CHECK(p.flits == 12);  // 5 + 5 + (header + one flit for 2 bytes)

  auto g = packetize(130, RdmaKind::Get);
  CHECK(g.packets == 3);
  CHECK(g.flits == 3);
}

TEST_CASE("per-packet flit counts") {
  CHECK(packet_flits(130, RdmaKind::Put, 0) == 5);
  CHECK(packet_flits(130, RdmaKind::Put, 1) == 5);
  CHECK(packet_flits(130, RdmaKind::Put, 2) == 2);
  CHECK(packet_flits(130, RdmaKind::Put, 3) == 0);  // past the end
  CHECK(packet_flits(130, RdmaKind::Get, 0) == 1);
  CHECK(packet_flits(130, RdmaKind::Get, 2) == 1);
}

TEST_CASE("large transfer dimensions") {
  auto p = packetize(1 << 20, RdmaKind::Put);
  CHECK(p.packets == 16384);
  CHECK(p.flits == 16384 * 5);
  auto g = packetize(1 << 20, RdmaKind::Get);
  CHECK(g.packets == 16384);
  CHECK(g.flits == 16384);
}

TEST_CASE("zero-size transfers are rejected") {
  CHECK_THROWS_AS(packetize(0, RdmaKind::Put), ZeroSize);
  CHECK_THROWS_AS(packetize(0, RdmaKind::Get), ZeroSize);
  CHECK_THROWS_AS(packet_flits(0, RdmaKind::Put, 0), ZeroSize);
}

TEST_CASE("packetize agrees with the chunk-walking oracle") {
  for (std::uint64_t size = 1; size <= 5000; ++size) {
    for (auto kind : {RdmaKind::Put, RdmaKind::Get}) {
      auto a = packetize(size, kind);
      auto b = packetize_oracle(size, kind);
      REQUIRE(a.packets == b.packets);
      REQUIRE(a.flits == b.flits);
    }
  }
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint64_t> dist(1, 1 << 22);
  for (int rep = 0; rep < 200; ++rep) {
    const std::uint64_t size = dist(rng);
    for (auto kind : {RdmaKind::Put, RdmaKind::Get}) {
      auto a = packetize(size, kind);
      auto b = packetize_oracle(size, kind);
      REQUIRE(a.packets == b.packets);
      REQUIRE(a.flits == b.flits);
    }
  }
}

TEST_CASE("per-packet counts sum to the transfer total") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint64_t> dist(1, 100'000);
  for (int rep = 0; rep < 200; ++rep) {
    const std::uint64_t size = dist(rng);
    for (auto kind : {RdmaKind::Put, RdmaKind::Get}) {
      auto dims = packetize(size, kind);
      std::uint64_t total = 0;
      for (std::uint64_t i = 0; i < dims.packets; ++i) {
        const auto f = packet_flits(size, kind, i);
        REQUIRE(f >= 1);
        REQUIRE(f <= 5);
        total += f;
      }
      REQUIRE(total == dims.flits);
    }
  }
}
