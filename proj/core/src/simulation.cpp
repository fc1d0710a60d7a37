#include "sidelink/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "sidelink/crypto.hpp"
#include "sidelink/defense.hpp"
#include "sidelink/harq.hpp"
#include "sidelink/pc5.hpp"
#include "sidelink/radio.hpp"

namespace sidelink {

namespace {

constexpr Slot kDrainSlots = 64;
constexpr std::uint32_t kBroadcastL2 = kL2IdMask;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::array<std::uint32_t, 2> w{};
  seq.generate(w.begin(), w.end());
  return (std::uint64_t{w[0]} << 32) | w[1];
}

crypto::Key256 scenario_key(std::uint64_t seed, std::string_view label) {
  std::array<std::uint8_t, 8> s{};
  for (int i = 0; i < 8; ++i) s[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(seed >> (8 * i));
  return crypto::prf(s, crypto::as_bytes(label));
}

Slot slots_for_ms(double ms, double slot_ms) { return static_cast<Slot>(std::ceil(ms / slot_ms - 1e-9)); }

struct Flow {
  TrafficFlow spec;
  std::unique_ptr<SpsEntity> sps;
  Slot next_arrival = 0;
  Slot period = 0;
};

struct ProcInfo {
  std::size_t flow = 0;
  SubchannelRange subchannels;
  std::uint64_t tb_id = 0;
  std::uint32_t bytes = 0;
  NodeId destination;
};

struct Ue {
  UeSpec spec;
  std::optional<SyncEntity> sync;
  std::unique_ptr<Pc5Entity> pc5;
  std::optional<L2Identity> identity;
  std::optional<HarqEntity> harq;
  std::size_t discarded_reported = 0;
  std::optional<HarqAnomalyDetector> detector;
  std::mt19937_64 rng;
  std::vector<Flow> flows;
  std::deque<ReceivedSci> history;
  std::set<std::pair<NodeId, std::uint64_t>> received;
  std::array<ProcInfo, kHarqProcessCount> procs{};
  std::optional<L2Id> previous_l2;
  Slot l2_changed = 0;
  std::size_t discards_seen = 0;

  L2Id l2() const { return pc5->self(); }
  bool owns(L2Id id, Slot now) const {
    return id == l2() || (previous_l2 && *previous_l2 == id && now - l2_changed <= 16);
  }
};

struct Accumulator {
  std::array<double, kMetricCount> v{};
  double ratio_sum = 0.0;

  void add(std::string_view name, double x) { v[metric_index(name)] += x; }
};

}  // namespace

struct Simulation::Impl {
  Scenario sc;
  SelectionObserver observer;
  RadioMedium medium;
  EventQueue queue;
  std::mt19937_64 rng;
  crypto::SecureRandom id_rng;
  crypto::Key256 ssb_key;
  crypto::Key256 credential;
  std::map<NodeId, Ue> ues;
  std::map<NodeId, Attacker> attackers;
  std::optional<GnodebScheduler> gnb;
  std::set<std::uint32_t> taken;
  std::set<std::pair<NodeId, std::uint64_t>> targeted;
  std::map<NodeId, std::size_t> actions_seen;
  std::uint64_t next_tb = 1;
  RunResult result;
  Accumulator acc;
  bool ran = false;

  explicit Impl(Scenario s)
      : sc(std::move(s)),
        medium(sc.channel, sc.pool.slot_duration_ms, sc.seed),
        queue(derive_seed(sc.seed, 0xE0, 0)),
        rng(derive_seed(sc.seed, 0x51, 0)),
        id_rng(derive_seed(sc.seed, 0x1D, 0), "l2-ids"),
        ssb_key(scenario_key(sc.seed, "ssb-signing-key")),
        credential(scenario_key(sc.seed, "pc5-long-term-credential")) {
    sc.validate(sc.name);
    build();
  }

  EventLog& log() { return result.log; }

  bool legit(NodeId id) const { return ues.count(id) != 0; }

  L2Id fresh_l2() {
    while (true) {
      const std::uint32_t v = id_rng.next_u32() & kL2IdMask;
      if (v != 0 && v != kBroadcastL2 && !taken.count(v)) return L2Id{v};
    }
  }

  void claim(L2Id id, NodeId owner) {
    taken.insert(id.value);
    result.l2_assigned.push_back(id.value);
    result.l2_owner.emplace(id.value, owner);
  }

  void build() {
    for (const auto& u : sc.ues) {
      if (u.l2_id) taken.insert(*u.l2_id);
    }
    const bool privacy = sc.defenses.privacy_randomizer.enabled;
    const auto mode = privacy ? IdRefreshMode::Secure : sc.identity.mode;
    const Slot id_period =
        slots_for_ms(privacy ? sc.defenses.privacy_randomizer.timer_ms : sc.identity.timer_ms, sc.pool.slot_duration_ms);

    for (const auto& u : sc.ues) {
      if (u.role == UeRole::GnodeB) {
        if (!gnb) gnb.emplace(sc.pool);
        continue;
      }
      medium.add_node(u.id, u.motion);
      if (sc.is_attacker(u.id)) continue;

      Ue ue;
      ue.spec = u;
      ue.rng.seed(derive_seed(sc.seed, 0xAE, u.id.value));
      if (sc.sync.enabled) {
        ue.sync.emplace(sc.sync.config, u.role == UeRole::GnssVisible ? SyncSource::Gnss : SyncSource::InternalClock,
                        false);
      }
      Pc5Config pc;
      pc.policy = u.policy.value_or(sc.pc5.default_policy);
      if (sc.defenses.policy_enforcer) pc.policy = enforce_policy(pc.policy);
      pc.authorized = u.authorized;
      if (u.credential) pc.long_term = credential;
      pc.keepalive_slots = static_cast<int>(slots_for_ms(sc.pc5.keepalive_ms, sc.pool.slot_duration_ms));
      pc.max_missed_keepalives = sc.pc5.max_missed_keepalives;
      pc.establishment_timeout_slots = sc.pc5.establishment_timeout_slots;
      const L2Id initial = u.l2_id ? L2Id{*u.l2_id} : fresh_l2();
      claim(initial, u.id);
      std::optional<DefenseConfig::ReplayGuard> guard;
      if (sc.defenses.replay_guard.enabled) guard = sc.defenses.replay_guard;
      ue.pc5 = std::make_unique<Pc5Entity>(pc, initial, derive_seed(sc.seed, 0x9C5, u.id.value), guard);

      if (mode != IdRefreshMode::Static) {
        Slot first = id_period;
        if (sc.identity.alignment == TimerAlignment::Staggered) {
          first = std::uniform_int_distribution<Slot>(1, id_period)(rng);
        }
        ue.identity.emplace(initial, 0, mode, id_period, first);
      }
      ue.harq.emplace(sc.harq.feedback, sc.harq.max_retransmissions);
      if (sc.defenses.harq_anomaly.enabled) ue.detector.emplace(sc.defenses.harq_anomaly);
      ues.emplace(u.id, std::move(ue));
    }
    if (gnb) {
      for (const auto& u : sc.ues) {
        if (u.mode1 && !sc.is_attacker(u.id)) gnb->register_ue(u.id);
      }
    }
    for (const auto& f : sc.traffic) {
      auto& ue = ues.at(f.source);
      Flow fl;
      fl.spec = f;
      fl.period = sc.pool.rri_slots(f.period_ms);
      fl.next_arrival = f.start_slot;
      if (!ue.spec.mode1) fl.sps = std::make_unique<SpsEntity>(sc.pool, f.period_ms, Demand{f.subchannels});
      ue.flows.push_back(std::move(fl));
    }
    for (const auto& a : sc.attacks) {
      attackers.emplace(a.plan.node,
                        Attacker(a.plan, sc.pool, sc.harq.feedback, sc.sync.config.ssb_period_slots, sc.seed));
    }
  }

  // -------------------------------------------------------------------------
  // Transmission helpers
  // -------------------------------------------------------------------------

  void transmit(Transmission t) {
    if (legit(t.sender)) {
      acc.add("airtimeBits", static_cast<double>(t.payload_bits()));
      if (const auto* d = std::get_if<DataPayload>(&t.payload)) {
        result.l2_owner.emplace(d->mac_source.value, t.sender);
      }
    } else {
      acc.add("attackFrames", 1);
    }
    medium.transmit(std::move(t));
  }

  void later(Slot at, Transmission t) {
    queue.schedule(at, [this, t = std::move(t)]() mutable { transmit(std::move(t)); }, "tx");
  }

  std::optional<Transmission> control(NodeId node, double power, Slot slot, const Selection& sel, int rri,
                                      std::uint8_t priority) {
    if (!sc.pool.has_period(rri)) return std::nullopt;
    Transmission c;
    c.sender = node;
    c.tx_power_dbm = power;
    c.slot = slot;
    c.channel = PhyChannel::Pscch;
    c.subchannels = sel.subchannels;
    c.payload = SciPayload{encode_sci1a(announce(sel, rri, priority, sc.pool), sc.pool)};
    return c;
  }

  void send_pc5(NodeId node, const Pc5Pdu& pdu, Slot at) {
    queue.schedule(
        at,
        [this, node, pdu, at] {
          auto& ue = ues.at(node);
          const std::vector<ReceivedSci> hist(ue.history.begin(), ue.history.end());
          Selection sel;
          try {
            sel = select_resources(sc.pool, hist, SlotWindow{at, at + 1}, Demand{1}, ue.rng);
          } catch (const ResourceError&) {
            sel.subchannels = SubchannelRange{0, 1};
            sel.slot = at;
          }
          if (auto c = control(node, ue.spec.tx_power_dbm, at, sel, 0, 0)) transmit(std::move(*c));
          Transmission t;
          t.sender = node;
          t.tx_power_dbm = ue.spec.tx_power_dbm;
          t.slot = at;
          t.channel = PhyChannel::Pssch;
          t.subchannels = sel.subchannels;
          DataPayload d;
          Sci2A s2;
          s2.cast_type = CastType::Unicast;
          s2.source_id = static_cast<std::uint8_t>(pdu.source.value & 0xFF);
          s2.destination_id = static_cast<std::uint16_t>(pdu.destination.value & 0xFFFF);
          d.sci2a = encode_sci2a(s2);
          d.mac_source = pdu.source;
          d.mac_destination = pdu.destination;
          d.tb_bytes = static_cast<std::uint32_t>(pdu.body.size());
          d.pc5 = encode_pc5_pdu(pdu);
          t.payload = std::move(d);
          transmit(std::move(t));
        },
        "pc5");
  }

  void handle_pc5_output(NodeId node, Pc5Output out, Slot now) {
    for (const auto& pdu : out.outbound) send_pc5(node, pdu, now + sc.pc5.processing_slots);
    for (const auto& e : out.events) {
      log().add(now, node, "pc5")
          .with("kind", std::string(to_string(e.kind)))
          .with("message", std::string(to_string(e.message)))
          .with("peer", static_cast<std::int64_t>(e.peer.value))
          .with("reason", e.reason);
      switch (e.kind) {
        case SecurityEventKind::Established:
          if (e.message == Pc5MessageKind::EstablishmentAccept) acc.add("linksEstablished", 1);
          break;
        case SecurityEventKind::Aborted:
        case SecurityEventKind::Timeout:
        case SecurityEventKind::Mismatch:
        case SecurityEventKind::Reject:
          acc.add("linkFailures", 1);
          break;
        case SecurityEventKind::GuardReject:
        case SecurityEventKind::Replay:
          acc.add("replayRejects", 1);
          break;
        case SecurityEventKind::DuplicateSession:
          acc.add("replayAccepted", 1);
          break;
        case SecurityEventKind::Discard:
          acc.add("pc5Discards", 1);
          break;
        default:
          break;
      }
    }
  }

  void defense_event(Slot now, NodeId node, std::string defense, std::string reason) {
    if (!sc.defenses.incident_log) return;
    log().add(now, node, "defense").with("defense", std::move(defense)).with("reason", std::move(reason));
  }

  // -------------------------------------------------------------------------
  // Traffic and HARQ
  // -------------------------------------------------------------------------

  void send_tb(NodeId node, std::size_t flow_index, Slot slot, Selection sel, bool announce_rri) {
    auto& ue = ues.at(node);
    auto& flow = ue.flows[flow_index];
    const auto& f = flow.spec;
    const std::uint64_t tb_id = next_tb++;
    const bool unicast = f.destination.has_value();
    const L2Id dst = unicast ? ues.at(*f.destination).l2() : L2Id{kBroadcastL2};

    Sci2A s2;
    s2.source_id = static_cast<std::uint8_t>(ue.l2().value & 0xFF);
    s2.destination_id = static_cast<std::uint16_t>(dst.value & 0xFFFF);
    s2.cast_type = unicast ? CastType::Unicast : CastType::Broadcast;
    if (unicast && f.harq_feedback) {
      const auto p = ue.harq->begin(HarqTb{tb_id, dst, f.size_bytes}, slot);
      if (!p) {
        log().add(slot, node, "harq_busy").with("tb", static_cast<std::int64_t>(tb_id));
        return;
      }
      const auto& proc = ue.harq->process(*p);
      s2.harq_process = *p;
      s2.ndi = proc.ndi();
      s2.redundancy_version = proc.rv();
      s2.harq_feedback_enabled = true;
      ue.procs[*p] = ProcInfo{flow_index, sel.subchannels, tb_id, f.size_bytes, *f.destination};
    }
    if (auto c = control(node, ue.spec.tx_power_dbm, slot, sel, announce_rri ? f.period_ms : 0, f.priority)) {
      transmit(std::move(*c));
    }
    Transmission t;
    t.sender = node;
    t.tx_power_dbm = ue.spec.tx_power_dbm;
    t.slot = slot;
    t.channel = PhyChannel::Pssch;
    t.subchannels = sel.subchannels;
    t.payload = DataPayload{encode_sci2a(s2), ue.l2(), dst, tb_id, f.size_bytes, std::nullopt};
    transmit(std::move(t));
  }

  void retransmit(NodeId node, std::uint8_t process, Slot slot) {
    auto& ue = ues.at(node);
    const auto& info = ue.procs[process];
    const auto& proc = ue.harq->process(process);
    const auto& f = ue.flows[info.flow].spec;
    const L2Id dst = ues.at(info.destination).l2();
    Sci2A s2;
    s2.harq_process = process;
    s2.ndi = proc.ndi();
    s2.redundancy_version = proc.rv();
    s2.source_id = static_cast<std::uint8_t>(ue.l2().value & 0xFF);
    s2.destination_id = static_cast<std::uint16_t>(dst.value & 0xFFFF);
    s2.harq_feedback_enabled = true;
    s2.cast_type = CastType::Unicast;
    ue.harq->retransmitted(process, slot);
    Selection sel;
    sel.subchannels = info.subchannels;
    sel.slot = slot;
    if (auto c = control(node, ue.spec.tx_power_dbm, slot, sel, 0, f.priority)) later(slot, std::move(*c));
    Transmission t;
    t.sender = node;
    t.tx_power_dbm = ue.spec.tx_power_dbm;
    t.slot = slot;
    t.channel = PhyChannel::Pssch;
    t.subchannels = info.subchannels;
    t.payload = DataPayload{encode_sci2a(s2), ue.l2(), dst, info.tb_id, info.bytes, std::nullopt};
    later(slot, std::move(t));
  }

  void traffic(Ue& ue, Slot now) {
    for (std::size_t i = 0; i < ue.flows.size(); ++i) {
      auto& fl = ue.flows[i];
      if (now != fl.next_arrival) continue;
      fl.next_arrival += fl.period;
      if (now >= sc.duration_slots || (fl.spec.stop_slot && now >= *fl.spec.stop_slot)) continue;
      const Demand demand{fl.spec.subchannels};
      const SlotWindow window{now + 1, now + 1 + sc.pool.slots_per_selection_window};
      const NodeId node = ue.spec.id;
      if (ue.spec.mode1) {
        try {
          const auto sel = gnb->grant(GrantRequest{node, demand, window});
          queue.schedule(sel.slot, [this, node, i, sel] { send_tb(node, i, sel.slot, sel, false); }, "tb");
        } catch (const ResourceError& e) {
          log().add(now, node, "grant_failed").with("reason", std::string(e.what()));
        }
        continue;
      }
      const auto g = fl.sps->next_transmission(now, ue.rng);
      if (g.reselected) {
        acc.add("selections", 1);
        acc.ratio_sum += g.selection.candidate_ratio();
        log().add(now, node, "selection")
            .with("flow", static_cast<std::int64_t>(i))
            .with("subchannel", static_cast<std::int64_t>(g.selection.subchannels.start))
            .with("slot", g.selection.slot)
            .with("candidates", static_cast<std::int64_t>(g.selection.candidates))
            .with("total", static_cast<std::int64_t>(g.selection.total))
            .with("raises", static_cast<std::int64_t>(g.selection.threshold_raises));
        if (observer) {
          observer(SelectionRecord{node, now, std::vector<ReceivedSci>(fl.sps->history().begin(), fl.sps->history().end()),
                                   window, demand, g.selection});
        }
      }
      const auto sel = g.selection;
      queue.schedule(sel.slot, [this, node, i, sel] { send_tb(node, i, sel.slot, sel, true); }, "tb");
    }
  }

  // Power profiles follow the unicast link, not the peer's current Layer-2
  // id, so they survive identifier refreshes.
  static L2Id link_key(const Ue& ue, std::uint8_t process) {
    return L2Id{static_cast<std::uint32_t>(ue.procs[process].flow)};
  }

  void close_harq(Ue& ue, Slot now) {
    const NodeId node = ue.spec.id;
    for (const auto& o : ue.harq->close_windows(now)) {
      if (ue.detector) {
        ue.detector->settle(link_key(ue, o.process),
                            o.chosen ? std::optional<double>(o.chosen->rsrp_dbm) : std::nullopt);
      }
      const char* what = "ignored";
      switch (o.action.kind) {
        case HarqAction::Kind::Complete:
          what = "complete";
          acc.add("senderDelivered", 1);
          break;
        case HarqAction::Kind::Retransmit:
          what = "retransmit";
          acc.add("retransmissions", 1);
          retransmit(node, o.process, now + 1);
          break;
        case HarqAction::Kind::Fail:
          what = "fail";
          break;
        case HarqAction::Kind::Ignored:
          break;
      }
      log().add(now, node, "harq")
          .with("process", static_cast<std::int64_t>(o.process))
          .with("tb", static_cast<std::int64_t>(o.tb.tb_id))
          .with("outcome", std::string(what))
          .with("attempts", static_cast<std::int64_t>(o.attempts));
      const bool finished =
          o.action.kind == HarqAction::Kind::Complete || o.action.kind == HarqAction::Kind::Fail;
      if (finished && targeted.count({node, o.tb.tb_id})) {
        acc.add("targetedTbs", 1);
        if (o.attempts >= sc.harq.max_retransmissions + 1) acc.add("targetedTbsMaxed", 1);
      }
    }
    // Counts both arrivals with no open window and late entries dropped at close.
    const auto discarded = ue.harq->discarded_out_of_window + ue.harq->unknown_process;
    acc.add("feedbackDiscarded", static_cast<double>(discarded - ue.discarded_reported));
    ue.discarded_reported = discarded;
  }

  // -------------------------------------------------------------------------
  // Reception
  // -------------------------------------------------------------------------

  void receive(const Transmission& tx, const Reception& rx, Slot now) {
    if (auto it = attackers.find(rx.receiver); it != attackers.end()) {
      for (auto& t : it->second.on_receive(tx, rx, now)) later(t.slot, std::move(t));
      return;
    }
    auto uit = ues.find(rx.receiver);
    if (uit == ues.end()) return;
    auto& ue = uit->second;
    const NodeId node = ue.spec.id;

    if (const auto* p = std::get_if<SsbPayload>(&tx.payload)) {
      if (!ue.sync) return;
      const unsigned tag_bits = sc.defenses.signed_ssb.enabled ? sc.defenses.signed_ssb.tag_bits : 0;
      SsbFrame f;
      try {
        f = decode_ssb(p->bits, tag_bits);
      } catch (const FrameError& e) {
        if (tag_bits) defense_event(now, node, "signed_ssb", std::string("malformed: ") + e.what());
        return;
      }
      if (tag_bits && !verify_ssb(f, ssb_key, tag_bits)) {
        defense_event(now, node, "signed_ssb", "tag mismatch for slss " + std::to_string(f.slss.slss_id));
        return;
      }
      ue.sync->on_ssb(SyncCandidate{f.slss, rx.rsrp_dbm, f.mib, now, tx.sender});
      return;
    }
    if (const auto* p = std::get_if<SciPayload>(&tx.payload)) {
      ReceivedSci r{p->sci1a, rx.rsrp_dbm, now, tx.sender};
      for (auto& fl : ue.flows) {
        if (fl.sps) fl.sps->on_sci(r);
      }
      ue.history.push_back(std::move(r));
      while (!ue.history.empty() && ue.history.front().slot < now - sc.pool.sensing_window_slots) {
        ue.history.pop_front();
      }
      return;
    }
    if (const auto* p = std::get_if<FeedbackPayload>(&tx.payload)) {
      if (!ue.owns(p->destination, now)) return;
      const bool spoof = !legit(tx.sender);
      if (spoof) acc.add("spoofInjected", 1);
      Feedback fb{p->ack ? FeedbackKind::Ack : FeedbackKind::Nack, p->harq_process, p->claimed_source, now,
                  rx.rsrp_dbm};
      if (ue.detector && p->harq_process < kHarqProcessCount) {
        const auto& proc = ue.harq->process(p->harq_process);
        const auto expected = ue.harq->expected_slot(p->harq_process);
        if (proc.busy() && expected) {
          const L2Id key = link_key(ue, p->harq_process);
          const auto v = ue.detector->check(key, fb, *expected, sc.harq.feedback.window_slots);
          if (fb.slot >= *expected && fb.slot <= *expected + sc.harq.feedback.window_slots) {
            ue.detector->observe(key, fb.rsrp_dbm);
          }
          if (!spoof) acc.add("legitChecked", 1);
          if (!v.accept) {
            acc.add(spoof ? "spoofFlagged" : "legitFlagged", 1);
            defense_event(now, node, "harq_anomaly_check", v.reason);
            return;
          }
        }
      }
      ue.harq->on_feedback(fb);
      return;
    }
    const auto* d = std::get_if<DataPayload>(&tx.payload);
    if (!d) return;
    const bool addressed = ue.owns(d->mac_destination, now);
    if (d->pc5) {
      if (!addressed) return;
      Pc5Pdu pdu;
      try {
        pdu = decode_pc5_pdu(*d->pc5);
      } catch (const FrameError& e) {
        log().add(now, node, "pc5").with("kind", std::string("discard")).with("reason", std::string(e.what()));
        acc.add("pc5Discards", 1);
        return;
      }
      handle_pc5_output(node, ue.pc5->receive(pdu, now), now);
      return;
    }
    Sci2A s2;
    try {
      s2 = decode_sci2a(d->sci2a);
    } catch (const FrameError&) {
      return;
    }
    bool crc_ok = true;
    if (sc.bler > 0.0) crc_ok = std::uniform_real_distribution<double>(0.0, 1.0)(ue.rng) >= sc.bler;
    if (const auto fb = on_tb_received(s2, tx.slot, crc_ok, addressed, ue.l2(), sc.harq.feedback)) {
      Transmission t;
      t.sender = node;
      t.tx_power_dbm = ue.spec.tx_power_dbm;
      t.slot = fb->slot;
      t.channel = PhyChannel::Psfch;
      t.payload = FeedbackPayload{fb->kind == FeedbackKind::Ack, fb->harq_process, ue.l2(), d->mac_source};
      later(fb->slot, std::move(t));
    }
    if (crc_ok && addressed && s2.cast_type == CastType::Unicast && s2.harq_feedback_enabled) {
      if (ue.received.insert({tx.sender, d->tb_id}).second) acc.add("receiverDelivered", 1);
    }
  }

  // -------------------------------------------------------------------------
  // Main loop
  // -------------------------------------------------------------------------

  void flush_bucket(Slot start, Slot end) {
    MetricsBucket b;
    b.slot_start = start;
    b.slot_end = end;
    for (std::size_t i = 0; i < kMetricCount; ++i) b.values[i] = acc.v[i];
    const double sel = acc.v[metric_index("selections")];
    b.values[metric_index("candidateSetRatio")] =
        sel > 0 ? std::optional<double>(acc.ratio_sum / sel) : std::nullopt;
    if (sc.sync.enabled) {
      int victims = 0;
      for (const auto& [id, ue] : ues) {
        const auto& ref = ue.sync->state().reference;
        if (ref && attackers.count(ref->emitter)) ++victims;
      }
      b.values[metric_index("syncVictims")] = victims;
    } else {
      b.values[metric_index("syncVictims")] = std::nullopt;
    }
    b.values[metric_index("trackingF1")] = tracking_f1();
    result.metrics.series.push_back(b);
    acc = Accumulator{};
  }

  std::optional<double> tracking_f1() {
    bool any = false;
    std::vector<Observation> obs;
    for (const auto& [id, a] : attackers) {
      if (a.plan().kind != AttackKind::L2Tracking) continue;
      any = true;
      obs.insert(obs.end(), a.observations().begin(), a.observations().end());
    }
    if (!any) return std::nullopt;
    if (obs.empty()) return 0.0;
    std::stable_sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) { return a.slot < b.slot; });
    TrackerConfig cfg;
    cfg.seed = sc.seed;
    return score_linkage(run_tracker(obs, cfg), result.l2_owner).f1;
  }

  void flush_actions(Slot now) {
    for (auto& [id, a] : attackers) {
      auto& seen = actions_seen[id];
      const auto& acts = a.actions();
      for (; seen < acts.size(); ++seen) {
        const auto& act = acts[seen];
        auto& rec = log().add(now, id, "attack")
                        .with("kind", std::string(to_string(a.plan().kind)))
                        .with("frame", act.frame)
                        .with("at", act.slot)
                        .with("tx_power_dbm", act.tx_power_dbm);
        if (act.tb_id) {
          rec.with("tb", static_cast<std::int64_t>(*act.tb_id));
          targeted.insert({act.tb_sender, *act.tb_id});
        }
      }
    }
  }

  void refresh_identity(Ue& ue, Slot now) {
    if (!ue.identity || !ue.identity->due(now)) return;
    const L2Id old = ue.l2();
    const L2Id next = ue.identity->refresh(now, id_rng, taken);
    claim(next, ue.spec.id);
    auto out = ue.pc5->update_identifier(next, now);
    if (ue.l2() != old) {
      ue.previous_l2 = old;
      ue.l2_changed = now;
    }
    log().add(now, ue.spec.id, "l2_refresh")
        .with("old", static_cast<std::int64_t>(old.value))
        .with("new", static_cast<std::int64_t>(next.value));
    handle_pc5_output(ue.spec.id, std::move(out), now);
  }

  void link_plans(Slot now) {
    for (const auto& l : sc.links) {
      auto& init = ues.at(l.initiator);
      const L2Id peer = ues.at(l.responder).l2();
      if (now == l.start_slot) handle_pc5_output(l.initiator, init.pc5->initiate(peer, now), now);
      if (l.rekey_slot && now == *l.rekey_slot) handle_pc5_output(l.initiator, init.pc5->rekey(peer, now), now);
      if (l.release_slot && now == *l.release_slot) {
        handle_pc5_output(l.initiator, init.pc5->release(peer, now), now);
      }
    }
  }

  bool harq_busy() const {
    for (const auto& [id, ue] : ues) {
      for (int p = 0; p < kHarqProcessCount; ++p) {
        if (ue.harq->process(static_cast<std::uint8_t>(p)).busy()) return true;
      }
    }
    return false;
  }

  RunResult run() {
    if (ran) throw std::logic_error("a Simulation runs once");
    ran = true;
    const int period = sc.sync.config.ssb_period_slots;
    if (sc.sync.enabled) {
      for (auto& [id, ue] : ues) ue.sync->evaluate(ue.rng, std::nullopt);
    }
    SimClock clock;
    clock.slot_duration_ms = sc.pool.slot_duration_ms;
    Slot bucket_start = 0;
    Slot s = 0;
    for (;; ++s) {
      if (s >= sc.duration_slots && (s >= sc.duration_slots + kDrainSlots || !harq_busy())) break;
      if (s > bucket_start && s % sc.bucket_slots == 0 && s <= sc.duration_slots) {
        flush_bucket(bucket_start, s);
        bucket_start = s;
      }
      clock.advance_to(s);
      queue.run_until(s);

      for (auto& [id, ue] : ues) {
        refresh_identity(ue, s);
        traffic(ue, s);
        if (ue.sync && s % period == 0 && ue.sync->state().is_sync_ref) {
          auto f = ue.sync->make_ssb(clock.direct_frame_number(), clock.slot_in_frame());
          if (sc.defenses.signed_ssb.enabled) {
            f = sign_ssb(f, ssb_key, sc.defenses.signed_ssb.tag_bits);
            acc.add("airtimeOverheadBits", sc.defenses.signed_ssb.tag_bits);
          }
          Transmission t;
          t.sender = id;
          t.tx_power_dbm = ue.spec.tx_power_dbm;
          t.slot = s;
          t.channel = PhyChannel::Psbch;
          t.payload = SsbPayload{encode_ssb(f)};
          transmit(std::move(t));
        }
        handle_pc5_output(id, ue.pc5->tick(s), s);
      }
      link_plans(s);
      for (auto& [id, a] : attackers) {
        for (auto& t : a.on_slot(s, clock.direct_frame_number(), clock.slot_in_frame())) {
          if (t.slot == s) {
            transmit(std::move(t));
          } else {
            later(t.slot, std::move(t));
          }
        }
      }

      auto outcome = medium.resolve(s);
      acc.add("collisionCount", static_cast<double>(outcome.collisions.size()));
      for (const auto& [a, b] : outcome.collisions) {
        log().add(s, std::nullopt, "collision")
            .with("a", static_cast<std::int64_t>(a.value))
            .with("b", static_cast<std::int64_t>(b.value));
      }
      for (const auto& d : outcome.deliveries) receive(outcome.transmissions[d.tx_index], d.rx, s);
      flush_actions(s);

      for (auto& [id, ue] : ues) close_harq(ue, s);

      if (sc.sync.enabled && s % period == period - 1) {
        for (auto& [id, ue] : ues) {
          const auto ev = ue.sync->evaluate(ue.rng, std::nullopt);
          if (!ev.switched) continue;
          acc.add("syncSwitches", 1);
          const auto& ref = ue.sync->state().reference;
          auto& rec = log().add(s, id, "sync_switch")
                          .with("source", std::string(to_string(ue.sync->state().source)));
          if (ref) {
            rec.with("emitter", static_cast<std::int64_t>(ref->emitter.value))
                .with("slss", static_cast<std::int64_t>(ref->slss.slss_id))
                .with("rsrp_dbm", ref->rsrp_dbm);
          }
        }
      }
    }
    flush_bucket(bucket_start, s);
    result.end_slot = s;
    for (const auto& [id, ue] : ues) {
      if (ue.sync) result.final_sync.emplace(id, ue.sync->state());
    }
    for (const auto& [id, a] : attackers) {
      result.observations.insert(result.observations.end(), a.observations().begin(), a.observations().end());
      result.attack_actions.insert(result.attack_actions.end(), a.actions().begin(), a.actions().end());
    }
    return std::move(result);
  }
};

Simulation::Simulation(Scenario scenario) : impl_(std::make_unique<Impl>(std::move(scenario))) {}
Simulation::~Simulation() = default;

void Simulation::set_selection_observer(SelectionObserver obs) { impl_->observer = std::move(obs); }

RunResult Simulation::run() { return impl_->run(); }

RunResult run_scenario(const Scenario& s, std::optional<std::uint64_t> seed) {
  Scenario copy = s;
  if (seed) copy.seed = *seed;
  Simulation sim(std::move(copy));
  return sim.run();
}

}  // namespace sidelink
