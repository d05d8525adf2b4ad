#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dragonroute/counters.hpp"

using namespace dragonroute;

TEST_CASE("counter deltas subtract field-wise") {
  NicCounters before{10, 2, 1, 50};
  NicCounters after{30, 7, 5, 452};
  NicCounters delta = after - before;
  CHECK(delta == NicCounters{20, 5, 4, 402});
  CHECK(delta.req_flits == 20);
  CHECK(delta.req_flits_stalled == 5);
  CHECK(delta.req_packets == 4);
  CHECK(delta.req_cum_latency == 402);
}

TEST_CASE("model inputs derive from a counter interval") {
  NicCounters before{10, 2, 1, 50};
  NicCounters after{30, 7, 5, 452};
  auto in = derive_inputs(before, after, 256, RdmaKind::Put);
  CHECK(in.packet_latency == doctest::Approx(100.5));  // 402 / 4
  CHECK(in.stall_ratio == doctest::Approx(0.25));      // 5 / 20
  CHECK(in.message_packets == 4);                      // 256 bytes, 64 per packet
  CHECK(in.message_flits == 20);
  CHECK(in.flits_per_packet() == doctest::Approx(5.0));
  CHECK(in.round_trip() == doctest::Approx(100.5));

  auto get = derive_inputs(before, after, 256, RdmaKind::Get);
  CHECK(get.message_packets == 4);
  CHECK(get.message_flits == 4);
  CHECK(get.flits_per_packet() == doctest::Approx(1.0));
}

TEST_CASE("packet-free intervals cannot parameterize the model") {
  NicCounters a{100, 10, 3, 900};
  CHECK_THROWS_AS(derive_inputs(a, a, 64, RdmaKind::Put), NoPackets);
  NicCounters b{120, 12, 3, 900};  // flits moved but no packet completed
  CHECK_THROWS_AS(derive_inputs(a, b, 64, RdmaKind::Put), NoPackets);
}

TEST_CASE("flit-free interval yields a zero stall ratio") {
  NicCounters before{};
  NicCounters after{0, 0, 2, 100};
  auto in = derive_inputs(before, after, 64, RdmaKind::Put);
  CHECK(in.stall_ratio == 0.0);
  CHECK(in.packet_latency == doctest::Approx(50.0));
}

TEST_CASE("transfer-time prediction, single packet") {
  ModelInputs in{1000.0, 0.0, 1, 5};
  CHECK(predict_tmsg_small(in) == doctest::Approx(505.0));
  CHECK(predict_tmsg(in) == doctest::Approx(505.9765625));
}

TEST_CASE("transfer-time prediction, windowed transfer") {
  ModelInputs window_only{1000.0, 0.0, 1024, 0};
  CHECK(predict_tmsg(window_only) == doctest::Approx(1500.0));  // (1024+512)/1024 * 1000

  ModelInputs in{2000.0, 3.0, 16, 80};
  CHECK(predict_tmsg(in) == doctest::Approx(1351.25));

  // a 64 KiB store: 1024 packets of 5 flits
  ModelInputs big{1000.0, 0.0, 1024, 5120};
  CHECK(predict_tmsg(big) == doctest::Approx(1500.0 + 5120.0));
}

TEST_CASE("half-window pivot separates the two predictors") {
  // At 512 outstanding packets the window factor is exactly 1, so the
  // two predictors differ by half the packet latency.
  ModelInputs in{800.0, 0.5, 512, 2560};
  CHECK(predict_tmsg(in) - predict_tmsg_small(in) == doctest::Approx(400.0));

  ModelInputs one{800.0, 0.5, 1, 5};
  CHECK(predict_tmsg(one) - predict_tmsg_small(one) ==
        doctest::Approx(800.0 / 1024.0));
}

TEST_CASE("predictions grow with every model input") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 200; ++rep) {
    ModelInputs base;
    base.packet_latency = 1.0 + static_cast<double>(rng() % 10000);
    base.stall_ratio = static_cast<double>(rng() % 100) / 25.0;
    base.message_packets = 1 + rng() % 2048;
    base.message_flits = base.message_packets * (1 + rng() % 5);

    ModelInputs more = base;
    more.packet_latency += 100.0;
    CHECK(predict_tmsg(more) > predict_tmsg(base));
    CHECK(predict_tmsg_small(more) > predict_tmsg_small(base));

    more = base;
    more.stall_ratio += 1.0;
    CHECK(predict_tmsg(more) > predict_tmsg(base));

    more = base;
    more.message_packets += 64;
    CHECK(predict_tmsg(more) > predict_tmsg(base));

    more = base;
    more.message_flits += 64;
    CHECK(predict_tmsg(more) > predict_tmsg(base));
  }
}

TEST_CASE("stalls inflate serialization linearly") {
  ModelInputs calm{100.0, 0.0, 8, 40};
  ModelInputs stalled{100.0, 1.0, 8, 40};  // one stalled cycle per flit
  CHECK(predict_tmsg(stalled) - predict_tmsg(calm) == doctest::Approx(40.0));
  CHECK(predict_tmsg_small(stalled) - predict_tmsg_small(calm) == doctest::Approx(40.0));
}
