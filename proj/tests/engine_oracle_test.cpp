#include <gtest/gtest.h>

#include "support/tick_reference.hpp"

using namespace nrumac;
using oracle::check_equivalent;

TEST(EngineOracle, TwoNodesMatchTickReference) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = check_equivalent(seed, 2, 100000);
    EXPECT_TRUE(r.ok) << r.detail;
  }
}

TEST(EngineOracle, ThreeNodesChunkedRun) {
  for (std::uint64_t seed = 21; seed <= 25; ++seed) {
    const auto r = check_equivalent(seed, 3, 7919);
    EXPECT_TRUE(r.ok) << r.detail;
  }
}

TEST(EngineOracle, ColocatedNodesCollideOnEqualExpiry) {
  // Identical configs, zero backoff window: both finish the defer at the
  // same boundary and transmit together.
  std::vector<NodeSetup> s(2);
  for (int i = 0; i < 2; ++i) {
    s[static_cast<std::size_t>(i)].position = {static_cast<double>(i), 0};
    s[static_cast<std::size_t>(i)].ues = {{static_cast<double>(i), 10}};
    s[static_cast<std::size_t>(i)].mac.backoff = BackoffType::off;
  }
  ChannelSim sim(RadioConfig{}, LbtConfig{}, s);
  sim.enable_event_log(true);
  const std::vector<Packet> one = {{0.0, kPacketBits, std::nullopt}};
  sim.add_arrivals(0, one);
  sim.add_arrivals(1, one);
  sim.run_until(1000);
  ASSERT_GE(sim.events().size(), 2u);
  EXPECT_EQ(sim.events()[0], (TxEvent{43, 0, TxEvent::tx_start}));
  EXPECT_EQ(sim.events()[1], (TxEvent{43, 1, TxEvent::tx_start}));
}
