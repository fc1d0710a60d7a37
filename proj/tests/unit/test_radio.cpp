#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sidelink/radio.hpp"

using namespace sidelink;

namespace {

Transmission data_tx(NodeId sender, Slot slot, int start, int len, double power = 23.0) {
  Transmission t;
  t.sender = sender;
  t.slot = slot;
  t.tx_power_dbm = power;
  t.channel = PhyChannel::Pssch;
  t.payload = DataPayload{};
  t.subchannels = SubchannelRange{start, len};
  return t;
}

Transmission ssb_tx(NodeId sender, Slot slot, double power = 23.0) {
  Transmission t;
  t.sender = sender;
  t.slot = slot;
  t.tx_power_dbm = power;
  t.channel = PhyChannel::Psbch;
  t.payload = SsbPayload{BitString::zeros(43)};
  return t;
}

std::vector<double> rsrp_series(std::uint64_t seed, double decorrelation) {
  ChannelModel m;
  m.shadowing_sigma_db = 4.0;
  m.shadowing_decorrelation_m = decorrelation;
  m.noise_floor_dbm = -500;
  RadioMedium med(m, 1.0, seed);
  med.add_node(NodeId{1}, Motion{{0, 0}, {0, 0}});
  med.add_node(NodeId{2}, Motion{{10, 0}, {20, 0}});
  std::vector<double> out;
  for (Slot s = 0; s < 200; s += 10) {
    // shadowing term only
    out.push_back(med.deliver(ssb_tx(NodeId{1}, s)).at(0).rsrp_dbm - med.mean_rsrp(NodeId{1}, NodeId{2}, 23.0, s));
  }
  return out;
}

}  // namespace

TEST(radio, rsrp_at_examples) {
  ChannelModel m;
  EXPECT_DOUBLE_EQ(rsrp_at(23, 1, m), -17.0);
  EXPECT_DOUBLE_EQ(rsrp_at(23, 10, m), -37.0);
  EXPECT_NEAR(rsrp_at(23, 100, m), -57.0, 1e-12);
  EXPECT_THROW(rsrp_at(23, 0, m), std::invalid_argument);
  EXPECT_THROW(rsrp_at(23, -1, m), std::invalid_argument);
}

TEST(radio, rsrp_monotone_in_distance) {
  ChannelModel m;
  double prev = rsrp_at(23, 0.5, m);
  for (double d = 1; d < 2000; d *= 1.3) {
    const double v = rsrp_at(23, d, m);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(radio, clock_wraps_dfn) {
  SimClock c;
  c.advance_to(10239);
  EXPECT_EQ(c.direct_frame_number(), 1023);
  EXPECT_EQ(c.slot_in_frame(), 9);
  c.advance_to(10240);
  EXPECT_EQ(c.direct_frame_number(), 0);
  EXPECT_EQ(c.slot_in_frame(), 0);
}

TEST(radio, channel_model_validation) {
  ChannelModel m;
  m.shadowing_sigma_db = -1;
  EXPECT_THROW(m.validate(), std::invalid_argument);
  m = {};
  m.capture_threshold_db = -0.5;
  EXPECT_THROW(m.validate(), std::invalid_argument);
}

TEST(radio, transmission_payload_must_match_channel) {
  auto t = ssb_tx(NodeId{1}, 0);
  t.channel = PhyChannel::Pscch;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  auto d = data_tx(NodeId{1}, 0, 0, 1);
  d.subchannels.reset();
  EXPECT_THROW(d.validate(), std::invalid_argument);
}

TEST(radio, deliver_respects_noise_floor_and_order) {
  RadioMedium med(ChannelModel{}, 1.0, 1);
  med.add_node(NodeId{3}, Motion{{10, 0}, {}});
  med.add_node(NodeId{1}, Motion{{0, 0}, {}});
  med.add_node(NodeId{2}, Motion{{50000, 0}, {}});  // -110.98 dBm, below floor
  const auto rx = med.deliver(ssb_tx(NodeId{1}, 0));
  ASSERT_EQ(rx.size(), 1u);
  EXPECT_EQ(rx[0].receiver, NodeId{3});
  EXPECT_DOUBLE_EQ(rx[0].rsrp_dbm, -37.0);
  EXPECT_THROW(med.add_node(NodeId{1}, Motion{}), std::invalid_argument);
}

TEST(radio, motion_moves_nodes) {
  RadioMedium med(ChannelModel{}, 1.0, 1);
  med.add_node(NodeId{1}, Motion{{0, 0}, {10, 0}});
  const auto p = med.position(NodeId{1}, 1000);
  EXPECT_NEAR(p.x, 10.0, 1e-9);
}

TEST(radio, capture_rule) {
  // receiver 3 at the origin; near sender 1 at 1 m, far sender 2 at 10 m
  RadioMedium med(ChannelModel{}, 1.0, 1);
  med.add_node(NodeId{1}, Motion{{1, 0}, {}});
  med.add_node(NodeId{2}, Motion{{10, 0}, {}});
  med.add_node(NodeId{3}, Motion{{0, 0}, {}});
  med.transmit(data_tx(NodeId{1}, 0, 0, 2));
  med.transmit(data_tx(NodeId{2}, 0, 1, 2));
  auto out = med.resolve(0);
  ASSERT_EQ(out.collisions.size(), 1u);
  auto got = [&](std::size_t tx, NodeId rx) {
    for (const auto& d : out.deliveries) {
      if (d.tx_index == tx && d.rx.receiver == rx) return true;
    }
    return false;
  };
  EXPECT_TRUE(got(0, NodeId{3}));   // 20 dB margin
  EXPECT_FALSE(got(1, NodeId{3}));  // swamped
  EXPECT_EQ(out.destroyed, 1u);     // senders never hear through their own transmission

  // equal distance: neither clears the 3 dB threshold
  RadioMedium eq(ChannelModel{}, 1.0, 1);
  eq.add_node(NodeId{1}, Motion{{-5, 0}, {}});
  eq.add_node(NodeId{2}, Motion{{5, 0}, {}});
  eq.add_node(NodeId{3}, Motion{{0, 0}, {}});
  eq.transmit(data_tx(NodeId{1}, 0, 0, 1));
  eq.transmit(data_tx(NodeId{2}, 0, 0, 1));
  out = eq.resolve(0);
  for (const auto& d : out.deliveries) EXPECT_NE(d.rx.receiver, NodeId{3});
}

TEST(radio, disjoint_subchannels_do_not_collide) {
  RadioMedium med(ChannelModel{}, 1.0, 1);
  med.add_node(NodeId{1}, Motion{{-5, 0}, {}});
  med.add_node(NodeId{2}, Motion{{5, 0}, {}});
  med.add_node(NodeId{3}, Motion{{0, 0}, {}});
  med.transmit(data_tx(NodeId{1}, 0, 0, 2));
  med.transmit(data_tx(NodeId{2}, 0, 2, 2));
  const auto out = med.resolve(0);
  EXPECT_TRUE(out.collisions.empty());
  EXPECT_EQ(out.destroyed, 0u);
  EXPECT_EQ(out.deliveries.size(), 4u);
}

TEST(radio, broadcast_channel_is_not_subject_to_capture) {
  RadioMedium med(ChannelModel{}, 1.0, 1);
  med.add_node(NodeId{1}, Motion{{-5, 0}, {}});
  med.add_node(NodeId{2}, Motion{{5, 0}, {}});
  med.add_node(NodeId{3}, Motion{{0, 0}, {}});
  med.transmit(ssb_tx(NodeId{1}, 0));
  med.transmit(ssb_tx(NodeId{2}, 0));
  const auto out = med.resolve(0);
  EXPECT_EQ(out.destroyed, 0u);
  EXPECT_EQ(out.deliveries.size(), 4u);
}

TEST(radio, resolve_rejects_wrong_slot) {
  RadioMedium med(ChannelModel{}, 1.0, 1);
  med.add_node(NodeId{1}, Motion{});
  med.transmit(ssb_tx(NodeId{1}, 5));
  EXPECT_THROW(med.resolve(4), SchedulingError);
}

TEST(radio, shadowing_is_seeded) {
  EXPECT_EQ(rsrp_series(7, 25), rsrp_series(7, 25));
  EXPECT_NE(rsrp_series(7, 25), rsrp_series(8, 25));
}

TEST(radio, shadowing_correlation_follows_decorrelation_distance) {
  // 0.2 m of movement between samples
  auto mean_step = [](const std::vector<double>& v) {
    double sum = 0;
    for (std::size_t i = 1; i < v.size(); ++i) sum += std::abs(v[i] - v[i - 1]);
    return sum / static_cast<double>(v.size() - 1);
  };
  EXPECT_LT(mean_step(rsrp_series(3, 1e6)), 0.01);
  EXPECT_LT(mean_step(rsrp_series(3, 25)), 1.0);
  EXPECT_GT(mean_step(rsrp_series(3, 0)), 2.0);
}

TEST(radio, event_queue_orders_by_slot_then_insertion) {
  EventQueue q;
  std::vector<int> seen;
  q.schedule(5, [&] { seen.push_back(2); });
  q.schedule(3, [&] { seen.push_back(1); });
  q.schedule(5, [&] { seen.push_back(3); });
  q.schedule(9, [&] { seen.push_back(4); });
  EXPECT_EQ(q.run_until(5), 3u);
  EXPECT_EQ(seen, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(q.current_slot(), 5);
  EXPECT_THROW(q.schedule(4, [] {}), SchedulingError);
  q.run_until(100);
  EXPECT_EQ(seen.back(), 4);
  EXPECT_EQ(q.pending(), 0u);
}

TEST(radio, event_queue_actions_may_schedule_more) {
  EventQueue q;
  q.enable_trace(true);
  int count = 0;
  std::function<void()> tick = [&] {
    if (++count < 4) q.schedule(q.current_slot() + 2, tick, "tick");
  };
  q.schedule(0, tick, "tick");
  q.run_until(100);
  EXPECT_EQ(count, 4);
  ASSERT_EQ(q.trace().size(), 4u);
  EXPECT_EQ(q.trace()[3].rfind("6:", 0), 0u);
}
