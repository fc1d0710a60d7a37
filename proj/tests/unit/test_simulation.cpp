#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sidelink/simulation.hpp"
#include "support/oracles.hpp"

using namespace sidelink;

namespace {

std::string catalog(const std::string& name) { return std::string(SIDELINK_SCENARIO_DIR) + "/catalog/" + name + ".yaml"; }

std::string read(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Bytes {
  std::string csv;
  std::string log;
};

Bytes bytes(const RunResult& r) {
  std::ostringstream c, l;
  r.metrics.write_csv(c);
  r.log.write(l);
  return {c.str(), l.str()};
}

Bytes run_text(const std::string& yaml, std::optional<std::uint64_t> seed = std::nullopt) {
  return bytes(run_scenario(parse_scenario(yaml), seed));
}

double total(const RunResult& r, std::string_view name) {
  const auto v = r.metrics.total(name);
  EXPECT_TRUE(v) << name;
  return v.value_or(0.0);
}

const std::vector<std::string> kCatalog = {
    "harq_spoofing_off",     "harq_spoofing_on",     "l2_tracking_off", "l2_tracking_on",
    "pc5_exploitation_off",  "pc5_exploitation_on",  "resource_blocking_off",
    "resource_blocking_on",  "sync_abuse_off",       "sync_abuse_on",
};

}  // namespace

TEST(simulation, same_seed_same_bytes) {
  for (const auto& name : kCatalog) {
    const auto s = load_scenario(catalog(name));
    const auto a = bytes(run_scenario(s));
    const auto b = bytes(run_scenario(s));
    EXPECT_EQ(a.csv, b.csv) << name;
    EXPECT_EQ(a.log, b.log) << name;
    EXPECT_FALSE(a.log.empty()) << name;
  }
}

TEST(simulation, seed_override_changes_run) {
  int differing = 0;
  for (const auto& name : kCatalog) {
    const auto s = load_scenario(catalog(name));
    const auto a = bytes(run_scenario(s));
    const auto same = bytes(run_scenario(s, s.seed));
    EXPECT_EQ(a.log, same.log) << name;
    differing += bytes(run_scenario(s, s.seed + 1000)).log != a.log;
  }
  EXPECT_GE(differing, 5);
}

TEST(simulation, simulation_runs_once) {
  Simulation sim(load_scenario(catalog("sync_abuse_off")));
  sim.run();
  EXPECT_ANY_THROW(sim.run());
}

// A disabled defense, whatever its knobs, leaves the run bit-identical.
TEST(simulation, disabled_defenses_change_nothing) {
  const std::vector<std::string> disabled = {
      "  signed_ssb: {enabled: false, tag_bits: 16}\n",
      "  harq_anomaly_check: {enabled: false, power_tolerance_db: 0.5, strict_window: true}\n",
      "  replay_guard: {enabled: false, timestamp_skew_slots: 0}\n",
      "  policy_enforcer: false\n",
      "  privacy_randomizer: {enabled: false, timer_ms: 7}\n",
      "  incident_log: false\n",
  };
  for (const auto& name : kCatalog) {
    if (name.ends_with("_on")) continue;
    const auto text = read(catalog(name));
    ASSERT_EQ(text.find("defenses:"), std::string::npos) << name;
    const auto base = run_text(text);
    std::string all = text + "defenses:\n";
    for (const auto& d : disabled) {
      const auto one = run_text(text + "defenses:\n" + d);
      EXPECT_EQ(one.log, base.log) << name << " with " << d;
      EXPECT_EQ(one.csv, base.csv) << name << " with " << d;
      all += d;
    }
    EXPECT_EQ(run_text(all).log, base.log) << name;
  }
}

TEST(simulation, signed_ssb_overhead_is_tag_bits_per_ssb) {
  const auto text = read(catalog("sync_abuse_off"));
  const auto plain = run_scenario(parse_scenario(text));
  const auto s16 = run_scenario(parse_scenario(text + "defenses:\n  signed_ssb: {enabled: true, tag_bits: 16}\n"));
  const auto s32 = run_scenario(parse_scenario(text + "defenses:\n  signed_ssb: {enabled: true, tag_bits: 32}\n"));
  EXPECT_EQ(total(plain, "airtimeOverheadBits"), 0.0);
  const double o16 = total(s16, "airtimeOverheadBits");
  const double o32 = total(s32, "airtimeOverheadBits");
  EXPECT_GT(o16, 0.0);
  EXPECT_EQ(std::fmod(o16, 16.0), 0.0);
  EXPECT_EQ(o32, 2.0 * o16);
  // no attacker, so signing only adds the tags
  EXPECT_EQ(total(s16, "airtimeBits") - total(plain, "airtimeBits"), o16);
  EXPECT_EQ(total(s32, "airtimeBits") - total(plain, "airtimeBits"), o32);
}

TEST(simulation, signed_ssb_leaves_no_sync_victims_across_seeds) {
  const auto on = load_scenario(catalog("sync_abuse_on"));
  ASSERT_TRUE(on.defenses.signed_ssb.enabled);
  ASSERT_EQ(on.defenses.signed_ssb.tag_bits, 32u);
  auto off = on;
  off.defenses = DefenseConfig{};
  int captured_without = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    EXPECT_EQ(total(run_scenario(on, seed), "syncVictims"), 0.0) << seed;
    captured_without += total(run_scenario(off, seed), "syncVictims") > 0.0;
  }
  EXPECT_EQ(captured_without, 20);
}

TEST(simulation, attacks_hurt_and_defenses_help) {
  auto rb = load_scenario(catalog("resource_blocking_off"));
  auto clean = rb;
  clean.attacks.clear();
  const auto with_attack = run_scenario(rb);
  const auto without = run_scenario(clean);
  EXPECT_LT(total(with_attack, "candidateSetRatio"), total(without, "candidateSetRatio"));
  EXPECT_GT(total(with_attack, "attackFrames"), 0.0);
  EXPECT_EQ(total(without, "attackFrames"), 0.0);

  auto pair = [](const std::string& n) {
    return std::pair{run_scenario(load_scenario(catalog(n + "_off"))), run_scenario(load_scenario(catalog(n + "_on")))};
  };
  {
    const auto [off, on] = pair("harq_spoofing");
    EXPECT_GT(total(off, "targetedTbsMaxed"), 0.0);
    EXPECT_LT(total(on, "targetedTbsMaxed"), total(off, "targetedTbsMaxed"));
    EXPECT_LT(total(on, "retransmissions"), total(off, "retransmissions"));
    EXPECT_GT(total(on, "spoofFlagged"), 0.0);
    EXPECT_EQ(total(off, "spoofFlagged"), 0.0);
  }
  {
    const auto [off, on] = pair("l2_tracking");
    EXPECT_LT(total(on, "trackingF1"), total(off, "trackingF1"));
  }
  {
    const auto [off, on] = pair("pc5_exploitation");
    EXPECT_GT(total(off, "replayAccepted"), 0.0);
    EXPECT_EQ(total(on, "replayAccepted"), 0.0);
    EXPECT_GT(total(on, "replayRejects"), total(off, "replayRejects"));
  }
  {
    const auto [off, on] = pair("sync_abuse");
    EXPECT_GT(total(off, "syncVictims"), 0.0);
    EXPECT_EQ(total(on, "syncVictims"), 0.0);
  }
}

TEST(simulation, compare_of_written_csvs) {
  const auto a = bytes(run_scenario(load_scenario(catalog("harq_spoofing_off"))));
  const auto b = bytes(run_scenario(load_scenario(catalog("harq_spoofing_on"))));
  const auto d = compare(parse_metrics_csv(a.csv), parse_metrics_csv(b.csv));
  for (const auto& x : d) {
    if (x.name == "retransmissions") EXPECT_LT(*x.absolute, 0.0);
    if (x.name == "spoofFlagged") EXPECT_GT(*x.absolute, 0.0);
  }
}

TEST(simulation, selections_match_brute_force_oracle) {
  auto full_block = read(catalog("resource_blocking_off"));
  const auto at = full_block.find("claim_fraction: 0.75");
  ASSERT_NE(at, std::string::npos);
  full_block.replace(at, 20, "claim_fraction: 1.0");
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"full_block", full_block},
      {"resource_blocking_off", read(catalog("resource_blocking_off"))},
      {"harq_spoofing_off", read(catalog("harq_spoofing_off"))},
      {"l2_tracking_off", read(catalog("l2_tracking_off"))},
  };
  for (const auto& [name, text] : runs) {
    const auto s = parse_scenario(text);
    Simulation sim(s);
    std::vector<SelectionRecord> seen;
    sim.set_selection_observer([&](const SelectionRecord& r) { seen.push_back(r); });
    const auto res = sim.run();
    ASSERT_FALSE(seen.empty()) << name;
    EXPECT_EQ(static_cast<double>(seen.size()), total(res, "selections")) << name;
    int raised = 0;
    for (const auto& r : seen) {
      const auto want = oracle::brute_force_candidates(s.pool, r.history, r.window, r.demand.subchannels);
      EXPECT_EQ(r.selection.candidates, want.count) << name << " slot " << r.now;
      EXPECT_EQ(r.selection.total, want.total) << name;
      EXPECT_EQ(r.selection.threshold_raises, want.raises) << name;
      EXPECT_GE(r.selection.slot, r.window.begin);
      EXPECT_LT(r.selection.slot, r.window.end);
      EXPECT_GE(r.window.begin, r.now);
      raised += r.selection.threshold_raises > 0;
    }
    if (name == "full_block") EXPECT_GT(raised, 0);
  }
}

TEST(simulation, log_lines_are_json_objects) {
  const auto r = run_scenario(load_scenario(catalog("pc5_exploitation_on")));
  std::istringstream in(bytes(r).log);
  std::string line;
  std::size_t n = 0;
  Slot last = 0;
  for (const auto& rec : r.log.records()) {
    EXPECT_GE(rec.slot, last);
    last = rec.slot;
  }
  while (std::getline(in, line)) {
    ++n;
    EXPECT_EQ(line.rfind("{\"slot\":", 0), 0u) << line;
    EXPECT_NE(line.find("\"event\":"), std::string::npos);
    EXPECT_EQ(line.back(), '}');
  }
  EXPECT_EQ(n, r.log.records().size());
  EXPECT_GT(r.log.count("pc5"), 0u);
}
