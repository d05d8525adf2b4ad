#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <random>
#include <vector>

#include "dragonroute/counters.hpp"
#include "dragonroute/policy.hpp"

using namespace dragonroute;

namespace {

constexpr int kD = static_cast<int>(PolicyArm::Default);
constexpr int kH = static_cast<int>(PolicyArm::HighBias);

PolicyState fresh_state(std::uint64_t trigger = 1) {
  PolicyState st;
  st.cfg.trigger_bytes = trigger;
  st.cfg.staleness_limit = 1'000'000;  // keep readings fresh unless a test wants expiry
  return st;
}

void seed_readings(PolicyState& st, double l_def, double s_def, double l_hb, double s_hb) {
  record_observation(st, RoutingMode::Adaptive0, l_def, s_def);
  record_observation(st, RoutingMode::Adaptive3, l_hb, s_hb);
}

// Draw dyadic rationals so every product in both the selector and the
// reference predictor is exact; the arg-min comparison then has no
// rounding slack to hide behind.
double dyadic(std::mt19937_64& rng, double max, double step = 0.25) {
  return step * static_cast<double>(rng() % static_cast<std::uint64_t>(max / step + 1));
}

}  // namespace

TEST_CASE("arms map to routing modes") {
  PolicyConfig plain;
  CHECK(arm_mode(plain, PolicyArm::Default) == RoutingMode::Adaptive0);
  CHECK(arm_mode(plain, PolicyArm::HighBias) == RoutingMode::Adaptive3);

  PolicyConfig a2a;
  a2a.alltoall_phase = true;
  CHECK(arm_mode(a2a, PolicyArm::Default) == RoutingMode::Adaptive1);
  CHECK(arm_mode(a2a, PolicyArm::HighBias) == RoutingMode::Adaptive3);

  CHECK(arm_of(plain, RoutingMode::Adaptive3) == PolicyArm::HighBias);
  CHECK(arm_of(plain, RoutingMode::Adaptive0) == PolicyArm::Default);
  CHECK(arm_of(plain, RoutingMode::Adaptive1) == PolicyArm::Default);
  CHECK(arm_of(plain, RoutingMode::MinHash) == PolicyArm::Default);
}

TEST_CASE("counterpart estimation scales both readings") {
  auto [l, s] = estimate_counterpart(100.0, 0.5, 2.0, 3.0);
  CHECK(l == doctest::Approx(200.0));
  CHECK(s == doctest::Approx(1.5));
}

TEST_CASE("small transfers stay on the high-bias arm without evaluating") {
  auto st = fresh_state(4096);
  seed_readings(st, 1.0, 0.0, 1'000'000.0, 5.0);  // counters scream "default!"

  CHECK(select_routing(st, 1024) == RoutingMode::Adaptive3);
  CHECK_FALSE(st.evaluated);
  CHECK(st.accumulated_bytes == 1024);

  CHECK(select_routing(st, 2048) == RoutingMode::Adaptive3);
  CHECK_FALSE(st.evaluated);
  CHECK(st.accumulated_bytes == 3072);

  // the next kilobyte reaches the trigger: counters finally consulted
  CHECK(select_routing(st, 1024) == RoutingMode::Adaptive0);
  CHECK(st.evaluated);
  CHECK(st.accumulated_bytes == 0);

  // accumulation restarts from zero after an evaluation
  CHECK(select_routing(st, 4095) == RoutingMode::Adaptive3);
  CHECK_FALSE(st.evaluated);
}

TEST_CASE("selection is the arg-min of the two predicted transfer times") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 2000; ++rep) {
    auto st = fresh_state(1);
    const double l_def = dyadic(rng, 4096.0);
    const double s_def = dyadic(rng, 8.0);
    const double l_hb = dyadic(rng, 4096.0);
    const double s_hb = dyadic(rng, 8.0);
    seed_readings(st, l_def, s_def, l_hb, s_hb);
    st.current = rng() % 2 ? PolicyArm::HighBias : PolicyArm::Default;

    const std::uint64_t size = 1 + rng() % 100'000;
    const RoutingMode selected = select_routing(st, size);

    auto dims = packetize(size, RdmaKind::Put);
    ModelInputs def{l_def, s_def, dims.packets, dims.flits};
    ModelInputs hb{l_hb, s_hb, dims.packets, dims.flits};
    RoutingMode expected;
    if (s_hb == s_def)
      expected = l_hb < l_def ? RoutingMode::Adaptive3 : RoutingMode::Adaptive0;
    else
      expected = predict_tmsg(hb) < predict_tmsg(def) ? RoutingMode::Adaptive3
                                                      : RoutingMode::Adaptive0;
    REQUIRE(selected == expected);
  }
}

TEST_CASE("worked threshold: stall penalty against latency gain") {
  // Default arm: latency 2000, one stalled cycle per flit. High-bias arm:
  // latency 1000 but three stalled cycles per flit. One outstanding
  // packet puts the crossover near 250 flits; the real selector sees the
  // flit count implied by the transfer size.
  ModelInputs hb_small{1000.0, 3.0, 1, 100};
  ModelInputs def_small{2000.0, 1.0, 1, 100};
  CHECK(predict_tmsg(hb_small) < predict_tmsg(def_small));  // 100 flits: high bias wins

  ModelInputs hb_large{1000.0, 3.0, 1, 300};
  ModelInputs def_large{2000.0, 1.0, 1, 300};
  CHECK(predict_tmsg(hb_large) > predict_tmsg(def_large));  // 300 flits: default wins

  // Same readings driven through the selector: a 3-packet transfer (15
  // flits) sits far below the crossover, so the high-bias arm is chosen.
  auto st = fresh_state(1);
  seed_readings(st, 2000.0, 1.0, 1000.0, 3.0);
  CHECK(select_routing(st, 192) == RoutingMode::Adaptive3);
}

TEST_CASE("equal stall ratios fall back to the latency comparison") {
  auto st = fresh_state(1);
  seed_readings(st, 500.0, 1.0, 499.0, 1.0);
  CHECK(select_routing(st, 64) == RoutingMode::Adaptive3);

  auto st2 = fresh_state(1);
  seed_readings(st2, 499.0, 1.0, 500.0, 1.0);
  CHECK(select_routing(st2, 64) == RoutingMode::Adaptive0);

  auto st3 = fresh_state(1);
  seed_readings(st3, 500.0, 1.0, 500.0, 1.0);  // full tie keeps the default arm
  CHECK(select_routing(st3, 64) == RoutingMode::Adaptive0);
}

TEST_CASE("missing counterpart readings are scaled from the current arm") {
  auto st = fresh_state(1);
  st.cfg.latency_scale = 2.0;
  st.cfg.stall_scale = 3.0;
  record_observation(st, RoutingMode::Adaptive0, 100.0, 0.5);
  st.current = PolicyArm::Default;
  select_routing(st, 64);
  CHECK(st.latency[kH] == doctest::Approx(200.0));
  CHECK(st.stall_ratio[kH] == doctest::Approx(1.5));

  auto st2 = fresh_state(1);
  st2.cfg.latency_scale = 2.0;
  st2.cfg.stall_scale = 3.0;
  record_observation(st2, RoutingMode::Adaptive3, 200.0, 1.5);
  st2.current = PolicyArm::HighBias;
  select_routing(st2, 64);
  CHECK(st2.latency[kD] == doctest::Approx(100.0));
  CHECK(st2.stall_ratio[kD] == doctest::Approx(0.5));
}

TEST_CASE("fresh readings are left untouched") {
  auto st = fresh_state(1);
  st.cfg.latency_scale = 2.0;
  seed_readings(st, 100.0, 0.25, 777.0, 2.5);
  select_routing(st, 64);
  CHECK(st.latency[kH] == 777.0);  // not replaced by 200
  CHECK(st.stall_ratio[kH] == 2.5);
}

TEST_CASE("expired readings are refreshed from the counterpart") {
  auto st = fresh_state(1);
  st.cfg.staleness_limit = 2;
  st.cfg.latency_scale = 2.0;
  seed_readings(st, 100.0, 0.0, 7777.0, 0.0);
  st.current = PolicyArm::Default;

  for (int i = 0; i < 3; ++i) {
    select_routing(st, 64);
    record_observation(st, RoutingMode::Adaptive0, 100.0, 0.0);  // default stays fresh
    CHECK(st.latency[kH] == 7777.0);  // ages 1..3 stay within the limit at eval time
  }
  select_routing(st, 64);  // age 3 exceeded the limit: estimate replaces it
  CHECK(st.latency[kH] == doctest::Approx(200.0));
}

TEST_CASE("observations reset the age of their arm only") {
  auto st = fresh_state(1);
  seed_readings(st, 10.0, 0.0, 10.0, 0.0);
  select_routing(st, 64);
  select_routing(st, 64);
  CHECK(st.age[kD] == 2);
  CHECK(st.age[kH] == 2);
  record_observation(st, RoutingMode::Adaptive3, 11.0, 0.0);
  CHECK(st.age[kH] == 0);
  CHECK(st.age[kD] == 2);
}

TEST_CASE("hysteresis demands two consecutive votes to switch") {
  auto st = fresh_state(1);
  st.cfg.hysteresis = true;
  seed_readings(st, 1000.0, 0.0, 10.0, 0.0);  // votes always favor high bias

  CHECK(select_routing(st, 64) == RoutingMode::Adaptive0);  // first vote: pending
  CHECK(select_routing(st, 64) == RoutingMode::Adaptive3);  // second vote: switch
  CHECK(select_routing(st, 64) == RoutingMode::Adaptive3);

  // a contradicting vote in between resets the pending streak
  auto st2 = fresh_state(1);
  st2.cfg.hysteresis = true;
  seed_readings(st2, 1000.0, 0.0, 10.0, 0.0);
  CHECK(select_routing(st2, 64) == RoutingMode::Adaptive0);   // pending high-bias
  record_observation(st2, RoutingMode::Adaptive3, 2000.0, 0.0);
  CHECK(select_routing(st2, 64) == RoutingMode::Adaptive0);   // vote back to default
  record_observation(st2, RoutingMode::Adaptive3, 10.0, 0.0);
  CHECK(select_routing(st2, 64) == RoutingMode::Adaptive0);   // pending again
  CHECK(select_routing(st2, 64) == RoutingMode::Adaptive3);   // now it sticks
}

TEST_CASE("without hysteresis the vote applies immediately") {
  auto st = fresh_state(1);
  seed_readings(st, 1000.0, 0.0, 10.0, 0.0);
  CHECK(select_routing(st, 64) == RoutingMode::Adaptive3);
}

TEST_CASE("all-to-all phases run the default arm with growing bias") {
  auto st = fresh_state(1);
  st.cfg.alltoall_phase = true;
  seed_readings(st, 10.0, 0.0, 1000.0, 0.0);  // default arm wins
  CHECK(select_routing(st, 64) == RoutingMode::Adaptive1);

  // small transfers still pin the high-bias arm
  auto st2 = fresh_state(4096);
  st2.cfg.alltoall_phase = true;
  CHECK(select_routing(st2, 64) == RoutingMode::Adaptive3);
}

TEST_CASE("an unmeasured policy starts on the default arm") {
  auto st = fresh_state(1);
  CHECK(select_routing(st, 64) == RoutingMode::Adaptive0);
  CHECK(st.evaluated);
}
