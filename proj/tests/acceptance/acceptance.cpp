// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sidelink/adversary.hpp"
#include "sidelink/frames.hpp"
#include "sidelink/pc5.hpp"
#include "sidelink/scenario.hpp"
#include "sidelink/simulation.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace sidelink;

namespace {

fs::path g_scenarios = SIDELINK_SCENARIO_DIR;

struct Check {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& s) { notes.push_back(s); }
};

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

Scenario load(const std::string& name) { return load_scenario((g_scenarios / "acceptance" / name).string()); }

double total(const RunResult& r, const char* metric) { return r.metrics.total(metric).value_or(NAN); }

// Drops every attack and the UEs that carried them.
Scenario without_attacks(Scenario s) {
  std::set<NodeId> attackers;
  for (const auto& a : s.attacks) attackers.insert(a.plan.node);
  s.attacks.clear();
  std::erase_if(s.ues, [&](const UeSpec& u) { return attackers.count(u.id) != 0; });
  return s;
}

std::size_t pc5_events(const RunResult& r, const std::string& kind) {
  std::size_t n = 0;
  for (const auto& rec : r.log.records()) {
    if (rec.kind != "pc5") continue;
    for (const auto& [k, v] : rec.fields) {
      if (k == "kind" && std::get_if<std::string>(&v) && std::get<std::string>(v) == kind) ++n;
    }
  }
  return n;
}

// ---------------------------------------------------------------------------

void frames(Check& c) {
  c.require(encode_mib_sl(MibSl{}).size() == 32, "MIB-SL is not 32 bits");
  c.require(encode_sci2a(Sci2A{}).size() == 35, "SCI 2-A is not 35 bits");

  std::mt19937_64 rng(1);
  auto u = [&](std::uint64_t hi) { return std::uniform_int_distribution<std::uint64_t>(0, hi)(rng); };
  constexpr int kCases = 1000;
  int bad_mib = 0, bad_ssb = 0, bad_sci1 = 0, bad_sci2 = 0, bad_pc5 = 0;
  for (int i = 0; i < kCases; ++i) {
    MibSl m{static_cast<std::uint16_t>(u(4095)), u(1) == 1, static_cast<std::uint16_t>(u(1023)),
            static_cast<std::uint8_t>(u(127)), static_cast<std::uint8_t>(u(3))};
    if (decode_mib_sl(encode_mib_sl(m)) != m) ++bad_mib;

    SsbFrame f;
    f.slss = slss_from_id(static_cast<int>(u(671)), u(1) == 1);
    f.mib = m;
    const unsigned tb[] = {0, 16, 32};
    f.tag_bits = tb[u(2)];
    if (f.tag_bits) f.tag = static_cast<std::uint32_t>(u((1ull << f.tag_bits) - 1));
    if (decode_ssb(encode_ssb(f), f.tag_bits) != f) ++bad_ssb;

    ResourcePool pool;
    pool.num_subchannels = static_cast<int>(1 + u(26));
    pool.sl_max_num_per_reserve = u(1) ? 3 : 2;
    FrequencyAllocation fa;
    fa.length = static_cast<int>(1 + u(static_cast<std::uint64_t>(pool.num_subchannels - 1)));
    fa.start_initial = static_cast<int>(u(static_cast<std::uint64_t>(pool.num_subchannels - fa.length)));
    fa.start_retx = pool.sl_max_num_per_reserve == 3
                        ? static_cast<int>(u(static_cast<std::uint64_t>(pool.num_subchannels - fa.length)))
                        : fa.start_initial;
    TimeAllocation ta;
    ta.first_gap = static_cast<int>(u(31));
    if (pool.sl_max_num_per_reserve == 3 && ta.first_gap > 0 && ta.first_gap < 31 && u(1)) {
      ta.second_gap = ta.first_gap + 1 + static_cast<int>(u(static_cast<std::uint64_t>(30 - ta.first_gap)));
    }
    Sci1A s1;
    s1.priority = static_cast<std::uint8_t>(u(7));
    s1.frequency_resource_assignment = encode_frequency_allocation(fa, pool);
    s1.time_resource_assignment = encode_time_allocation(ta, pool);
    s1.resource_reservation_period = static_cast<std::uint32_t>(u(pool.period_list_ms.size() - 1));
    s1.dmrs_pattern = static_cast<std::uint8_t>(u(static_cast<std::uint64_t>(pool.dmrs_pattern_count - 1)));
    s1.second_stage_format = static_cast<std::uint8_t>(u(3));
    s1.beta_offset = static_cast<std::uint8_t>(u(3));
    s1.dmrs_port_count = static_cast<std::uint8_t>(u(1));
    s1.mcs = static_cast<std::uint8_t>(u(31));
    const auto d1 = decode_sci1a(encode_sci1a(s1, pool), pool);
    if (d1 != s1 || decode_frequency_allocation(d1.frequency_resource_assignment, pool) != fa ||
        decode_time_allocation(d1.time_resource_assignment, pool) != ta) {
      ++bad_sci1;
    }

    Sci2A s2{static_cast<std::uint8_t>(u(15)),  u(1) == 1, static_cast<std::uint8_t>(u(3)),
             static_cast<std::uint8_t>(u(255)), static_cast<std::uint16_t>(u(65535)), u(1) == 1,
             static_cast<CastType>(u(2)),       u(1) == 1};
    if (decode_sci2a(encode_sci2a(s2)) != s2) ++bad_sci2;

    Pc5Pdu p;
    p.kind = all_pc5_kinds()[u(kPc5MessageKindCount - 1)];
    p.source = L2Id{static_cast<std::uint32_t>(u(kL2IdMask))};
    p.destination = L2Id{static_cast<std::uint32_t>(u(kL2IdMask))};
    p.counter = static_cast<std::uint32_t>(u(0xFFFFFFFFu));
    p.ciphered = u(1) == 1;
    p.body.resize(u(64));
    for (auto& b : p.body) b = static_cast<std::uint8_t>(u(255));
    if (u(1)) p.auth_tag = static_cast<std::uint32_t>(u(0xFFFFFFFFu));
    if (decode_pc5_pdu(encode_pc5_pdu(p)) != p) ++bad_pc5;
  }
  c.require(bad_mib == 0, fmt("%d MIB-SL round trips differ", bad_mib));
  c.require(bad_ssb == 0, fmt("%d S-SSB round trips differ", bad_ssb));
  c.require(bad_sci1 == 0, fmt("%d SCI 1-A round trips differ", bad_sci1));
  c.require(bad_sci2 == 0, fmt("%d SCI 2-A round trips differ", bad_sci2));
  c.require(bad_pc5 == 0, fmt("%d PC5 PDU round trips differ", bad_pc5));

  int rows = 0;
  for (const auto& row : oracle::kProtectionTable) {
    const auto p = protection_profile(row.kind);
    if (p.ciphering == row.ciphering && p.integrity == row.integrity && p.stage == row.stage) ++rows;
  }
  c.require(rows == 23, fmt("protection profile matches %d of 23 rows", rows));
  c.note(fmt("5 codecs x %d round trips, %d/23 protection rows", kCases, rows));
}

void slss(Check& c) {
  std::set<int> ids;
  std::map<int, CoverageClass> cls;
  for (int p = 0; p < kSPssCount; ++p) {
    for (int s = 0; s < kSSssCount; ++s) {
      const auto id = slss_from_sequences(p, s);
      ids.insert(id.slss_id);
      cls[id.slss_id] = id.coverage;
      c.require(slss_from_id(id.slss_id).s_pss == p && slss_from_id(id.slss_id).s_sss == s,
                fmt("id %d does not map back to (%d, %d)", id.slss_id, p, s));
    }
  }
  c.require(ids.size() == 672, fmt("%zu distinct ids", ids.size()));
  c.require(*ids.begin() == 0 && *ids.rbegin() == 671, "ids do not span 0..671");
  const std::pair<int, CoverageClass> expect[] = {{0, CoverageClass::GnssDirect},
                                                  {1, CoverageClass::InCoverage},
                                                  {335, CoverageClass::InCoverage},
                                                  {336, CoverageClass::OutOfCoverage},
                                                  {671, CoverageClass::OutOfCoverage}};
  for (const auto& [id, want] : expect) {
    c.require(cls.count(id) && cls[id] == want, fmt("coverage class of id %d", id));
  }
  c.note(fmt("%zu ids", ids.size()));
}

void sync_attack(Check& c) {
  auto s = load("sync.yaml");
  const auto open = run_scenario(s);
  const double captured = total(open, "syncVictims");
  c.require(captured >= 4, fmt("false injection captured %.0f/5 victims", captured));

  s.defenses.signed_ssb.enabled = true;
  s.defenses.signed_ssb.tag_bits = 32;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = run_scenario(s, seed);
    for (const auto& b : r.metrics.series) worst = std::max(worst, b.get("syncVictims").value_or(0));
  }
  c.require(worst == 0, fmt("signed S-SSB still lost %.0f victims in some bucket", worst));
  c.note(fmt("captured %.0f/5 unsigned, max %.0f over 20 signed seeds", captured, worst));
}

void resource_blocking(Check& c) {
  const auto attacked = load("resource_blocking.yaml");
  const auto base = without_attacks(attacked);
  const auto& plan = attacked.attacks.at(0).plan;
  const Slot rri = attacked.pool.rri_slots(1000);

  struct Seen {
    std::vector<SelectionRecord> recs;
  };
  auto run = [&](const Scenario& s, Seen& seen) {
    Simulation sim(s);
    sim.set_selection_observer([&](const SelectionRecord& r) { seen.recs.push_back(r); });
    return sim.run();
  };
  Seen sa, sb;
  const auto ra = run(attacked, sa);
  const auto rb = run(base, sb);

  std::size_t mismatches = 0, checked = 0;
  for (const auto* seen : {&sa, &sb}) {
    for (const auto& r : seen->recs) {
      const auto o = oracle::brute_force_candidates(attacked.pool, r.history, r.window, r.demand.subchannels);
      ++checked;
      if (o.count != r.selection.candidates || o.total != r.selection.total) ++mismatches;
    }
  }
  c.require(checked > 0 && mismatches == 0, fmt("%zu of %zu selections differ from the oracle", mismatches, checked));

  // The attack covers the victims' windows once its first announcements
  // project one RRI ahead.
  const SlotWindow effect{plan.active.begin + rri, plan.active.end};
  auto mean_ratio = [](const Seen& s, SlotWindow w) {
    double sum = 0;
    int n = 0;
    for (const auto& r : s.recs) {
      if (!w.contains(r.now)) continue;
      sum += r.selection.candidate_ratio();
      ++n;
    }
    return n ? sum / n : NAN;
  };
  const double ratio_a = mean_ratio(sa, effect);
  const double ratio_b = mean_ratio(sb, effect);
  c.require(ratio_a <= 0.30 * ratio_b, fmt("victim ratio %.3f vs baseline %.3f", ratio_a, ratio_b));

  const double col_a = total(ra, "collisionCount"), col_b = total(rb, "collisionCount");
  c.require(col_a > col_b, fmt("collisions %.0f vs baseline %.0f", col_a, col_b));

  Slot recovered = plan.active.end;
  for (const auto& r : sa.recs) {
    if (r.now >= plan.active.end && r.selection.candidate_ratio() < 0.9 * ratio_b) recovered = r.now + 1;
  }
  const bool any_after = std::any_of(sa.recs.begin(), sa.recs.end(),
                                     [&](const SelectionRecord& r) { return r.now >= plan.active.end + 2 * rri; });
  c.require(any_after, "no selections after the recovery deadline");
  c.require(recovered - plan.active.end <= 2 * rri,
            fmt("ratio recovered %lld slots after the attack stopped", static_cast<long long>(recovered - plan.active.end)));
  c.note(fmt("ratio %.3f vs %.3f, collisions %.0f vs %.0f, recovery %lld slots, %zu selections match oracle", ratio_a,
             ratio_b, col_a, col_b, static_cast<long long>(recovered - plan.active.end), checked));
}

void harq_spoofing(Check& c) {
  const auto nack = load("harq.yaml");
  const auto base = without_attacks(nack);
  const auto rb = run_scenario(base);
  const double base_gap = total(rb, "senderDelivered") - total(rb, "receiverDelivered");
  c.require(base_gap == 0, fmt("baseline delivered gap %.0f", base_gap));

  const auto rn = run_scenario(nack);
  const double targeted = total(rn, "targetedTbs"), maxed = total(rn, "targetedTbsMaxed");
  c.require(targeted > 0 && maxed >= 0.9 * targeted, fmt("false NACK maxed %.0f of %.0f TBs", maxed, targeted));

  auto ack = nack;
  ack.attacks[0].plan.kind = AttackKind::HarqSpoofAck;
  const auto ra = run_scenario(ack);
  const double gap = total(ra, "senderDelivered") - total(ra, "receiverDelivered");
  c.require(gap > 0, fmt("false ACK delivered gap %.0f", gap));

  auto late = nack;
  late.harq.feedback.window_slots = 0;
  late.attacks[0].plan.capability.timing_offset_slots = 1;
  const auto rl = run_scenario(late);
  const double inj = total(rl, "spoofInjected"), disc = total(rl, "feedbackDiscarded");
  c.require(inj > 0 && disc == inj, fmt("late spoofs: %.0f injected, %.0f discarded", inj, disc));
  for (const char* m : {"senderDelivered", "receiverDelivered", "retransmissions", "targetedTbsMaxed"}) {
    const double want = std::string(m) == "targetedTbsMaxed" ? 0.0 : total(rb, m);
    c.require(total(rl, m) == want, fmt("late spoofs changed %s: %.0f vs %.0f", m, total(rl, m), want));
  }

  auto guarded = nack;
  guarded.defenses.harq_anomaly.enabled = true;
  guarded.defenses.harq_anomaly.power_tolerance_db = 3.0;
  double spoofs = 0, flagged = 0, legit = 0, fp = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = run_scenario(guarded, seed);
    spoofs += total(r, "spoofInjected");
    flagged += total(r, "spoofFlagged");
    legit += total(r, "legitChecked");
    fp += total(r, "legitFlagged");
  }
  c.require(spoofs > 0 && flagged >= 0.95 * spoofs, fmt("anomaly check flagged %.0f of %.0f spoofs", flagged, spoofs));
  c.require(legit > 0 && fp < 0.10 * legit, fmt("false positives %.0f of %.0f", fp, legit));
  c.note(fmt("NACK maxed %.0f/%.0f, ACK gap %.0f (baseline %.0f), late %.0f/%.0f discarded, flagged %.1f%%, FP %.1f%%",
             maxed, targeted, gap, base_gap, disc, inj, 100 * flagged / spoofs, 100 * fp / legit));
}

// Two endpoints joined by an ideal channel.
struct Pair {
  Pc5Entity a, b;
  Slot now = 0;

  static Pc5Config config() {
    Pc5Config cfg;
    crypto::Key256 k{};
    k.fill(0x5A);
    cfg.long_term = k;
    return cfg;
  }
  Pair() : a(config(), L2Id{0x000111}, 1), b(config(), L2Id{0x000222}, 2) {}

  Pc5Entity& peer_of(const Pc5Pdu& p) { return p.destination == a.self() ? a : b; }

  // Delivers everything in flight; `intercept` may inspect each PDU first.
  void pump(Pc5Output out, const std::function<void(const Pc5Pdu&)>& intercept = {}) {
    std::deque<Pc5Pdu> q(out.outbound.begin(), out.outbound.end());
    while (!q.empty()) {
      const auto pdu = q.front();
      q.pop_front();
      ++now;
      if (intercept) intercept(pdu);
      for (auto& next : peer_of(pdu).receive(pdu, now).outbound) q.push_back(next);
    }
  }
};

void pc5(Check& c) {
  const auto neg = run_scenario(load("pc5_negotiation.yaml"));
  c.require(total(neg, "linksEstablished") == 0,
            fmt("(REQUIRED, NOT_NEEDED) established %.0f links", total(neg, "linksEstablished")));

  auto reject = load("pc5_forged_reject.yaml");
  const auto r_open = run_scenario(reject);
  reject.defenses.replay_guard.enabled = true;
  const auto r_guard = run_scenario(reject);
  const auto aborted_open = pc5_events(r_open, "aborted"), aborted_guard = pc5_events(r_guard, "aborted");
  c.require(aborted_open >= 1, fmt("forged reject aborted %zu links without the guard", aborted_open));
  c.require(aborted_guard == 0, fmt("forged reject aborted %zu links with the guard", aborted_guard));

  auto replay = load("pc5_replay.yaml");
  const auto p_open = run_scenario(replay);
  replay.defenses.replay_guard.enabled = true;
  const auto p_guard = run_scenario(replay);
  c.require(total(p_open, "replayAccepted") >= 1, "replayed request not accepted without the guard");
  c.require(total(p_guard, "replayAccepted") == 0, "replayed request accepted with the guard");
  c.require(total(p_guard, "replayRejects") >= 1, "guard reported no replay rejection");

  Pair link;
  link.pump(link.a.initiate(link.b.self(), link.now));
  const auto* la = link.a.link(link.b.self());
  c.require(la && la->phase == LinkPhase::Established, "tamper harness could not establish a link");

  std::mt19937_64 rng(7);
  int tampered = 0, discarded = 0;
  auto tamper = [&](const Pc5Pdu& pdu) {
    if (protection_profile(pdu.kind).stage != SecurityStage::AfterSecurity) return;
    for (int v = 0; v < 5; ++v) {
      auto t = pdu;
      switch (v) {
        case 0:
          if (t.body.empty()) continue;
          t.body[rng() % t.body.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
          break;
        case 1: *t.auth_tag ^= 1u << (rng() % 32); break;
        case 2: t.counter ^= 1u << (rng() % 8); break;
        case 3: t.ciphered = !t.ciphered; break;
        case 4: t.auth_tag.reset(); break;
      }
      ++tampered;
      const auto out = link.peer_of(t).receive(t, link.now);
      const bool dropped = out.outbound.empty() && !out.events.empty() &&
                           std::all_of(out.events.begin(), out.events.end(), [](const SecurityEvent& e) {
                             return e.kind == SecurityEventKind::Discard || e.kind == SecurityEventKind::Replay;
                           });
      if (dropped) ++discarded;
    }
  };
  for (int round = 0; round < 120; ++round) {
    link.pump(link.a.modify(link.b.self(), link.now), tamper);
    link.pump(link.b.rekey(link.a.self(), link.now), tamper);
    link.now += Pair::config().keepalive_slots;
    link.pump(link.a.tick(link.now), tamper);
  }
  link.pump(link.a.release(link.b.self(), link.now), tamper);
  c.require(tampered >= 1000, fmt("only %d tampered PDUs generated", tampered));
  c.require(discarded == tampered, fmt("%d of %d tampered PDUs discarded", discarded, tampered));
  c.note(fmt("aborted %zu/%zu, replay accepted %.0f/%.0f, tampered %d/%d discarded", aborted_open, aborted_guard,
             total(p_open, "replayAccepted"), total(p_guard, "replayAccepted"), discarded, tampered));
}

void tracking(Check& c) {
  auto s = load("tracking.yaml");
  const auto st = run_scenario(s);
  const double f_static = total(st, "trackingF1");
  c.require(f_static == 1.0, fmt("static ids F1 %.3f", f_static));

  s.identity.mode = IdRefreshMode::Weak;
  const auto wk = run_scenario(s);
  const double f_weak = total(wk, "trackingF1");
  c.require(f_weak >= 0.9, fmt("weak randomization F1 %.3f", f_weak));

  s.identity.mode = IdRefreshMode::Secure;
  s.identity.timer_ms = 500;
  const auto sec = run_scenario(s);
  const double f_secure = total(sec, "trackingF1");
  TrackerConfig cfg;
  cfg.seed = s.seed;
  const auto chance = chance_baseline(sec.observations, sec.l2_owner, cfg, 200);
  c.require(std::abs(f_secure - chance.mean) <= 2 * chance.stddev,
            fmt("secure F1 %.3f vs chance %.3f +/- %.3f", f_secure, chance.mean, chance.stddev));
  c.note(fmt("F1 static %.3f, weak %.3f, secure %.3f (chance %.3f +/- %.3f)", f_static, f_weak, f_secure, chance.mean,
             chance.stddev));
}

void determinism(Check& c) {
  int n = 0;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(g_scenarios / "catalog")) {
    if (e.path().extension() == ".yaml") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const auto s = load_scenario(f.string());
    std::string csv[2], log[2];
    for (int i = 0; i < 2; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto r = run_scenario(s);
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      c.require(dt < 10.0, fmt("%s took %.2f s", f.filename().string().c_str(), dt));
      std::ostringstream a, b;
      r.metrics.write_csv(a);
      r.log.write(b);
      csv[i] = a.str();
      log[i] = b.str();
    }
    c.require(csv[0] == csv[1], f.filename().string() + " CSV differs between runs");
    c.require(log[0] == log[1], f.filename().string() + " event log differs between runs");
    c.require(!log[0].empty(), f.filename().string() + " produced an empty event log");
    ++n;
  }
  c.require(n >= 10, fmt("only %d catalog scenarios", n));
  c.note(fmt("%d catalog scenarios", n));
}

struct Criterion {
  int id;
  const char* title;
  double budget_s;
  void (*fn)(Check&);
};

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_scenarios = argv[1];
  const Criterion all[] = {
      {1, "frame fidelity", 1.0, frames},
      {2, "SLSS bijection", 1.0, slss},
      {3, "sync attack/defense", 5.0, sync_attack},
      {4, "resource blocking", 5.0, resource_blocking},
      {5, "HARQ spoofing", 5.0, harq_spoofing},
      {6, "PC5 exploits", 5.0, pc5},
      {7, "tracking", 10.0, tracking},
      // every catalog scenario must finish in < 10 s; two runs each
      {8, "determinism", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& cr : all) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.fn(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.budget_s > 0 && dt >= cr.budget_s) c.failures.push_back(fmt("took %.2f s, budget %.0f s", dt, cr.budget_s));
    const bool ok = c.failures.empty();
    failed += ok ? 0 : 1;
    std::printf("%s %d %s (%.3f s)", ok ? "PASS" : "FAIL", cr.id, cr.title, dt);
    for (const auto& n : c.notes) std::printf(" | %s", n.c_str());
    std::printf("\n");
    for (const auto& f : c.failures) std::printf("    %s\n", f.c_str());
  }
  return failed ? 1 : 0;
}
