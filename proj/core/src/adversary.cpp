#include "sidelink/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "sidelink/pc5_security.hpp"

namespace sidelink {

namespace {

struct KindInfo {
  AttackKind kind;
  std::string_view name;
  std::string_view description;
};

constexpr KindInfo kKinds[] = {
    {AttackKind::SyncImpersonation, "sync_impersonation",
     "clone an observed SyncRef identity and out-power it on its S-SSB period"},
    {AttackKind::FalseSyncInjection, "false_sync_injection",
     "advertise a fabricated in-coverage SLSS id (default 0) with I_C = 1"},
    {AttackKind::ResourceBlocking, "resource_blocking",
     "announce SCI 1-A reservations over a fraction of the pool with the maximum RRI"},
    {AttackKind::HarqSpoofAck, "harq_spoof_ack", "answer observed unicast TBs with forged ACKs on PSFCH"},
    {AttackKind::HarqSpoofNack, "harq_spoof_nack", "answer observed unicast TBs with forged NACKs on PSFCH"},
    {AttackKind::Pc5ForgedRequestFlood, "pc5_forged_request_flood",
     "flood a responder with establishment requests from random Layer-2 ids"},
    {AttackKind::Pc5ForgedReject, "pc5_forged_reject",
     "answer observed establishment requests with a forged Establishment Reject"},
    {AttackKind::Pc5AuthDisrupt, "pc5_auth_disrupt",
     "inject forged Authentication Reject / Failure into observed authentications"},
    {AttackKind::Pc5Replay, "pc5_replay", "capture PC5-S PDUs and replay them verbatim later"},
    {AttackKind::Pc5FalseSecModeReject, "pc5_false_sec_mode_reject",
     "answer observed Security Mode Commands with a forged Security Mode Reject"},
    {AttackKind::L2Tracking, "l2_tracking",
     "passively log MAC-header Layer-2 ids and link them across refreshes"},
};

std::uint64_t mix(std::uint64_t seed, std::uint64_t node) {
  std::seed_seq seq{seed, node, std::uint64_t{0xA77AC4}};
  std::uint64_t out = 0;
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  out = (std::uint64_t{words[0]} << 32) | words[1];
  return out;
}

}  // namespace

std::string_view to_string(AttackKind k) {
  for (const auto& i : kKinds) {
    if (i.kind == k) return i.name;
  }
  return "?";
}

std::optional<AttackKind> attack_kind_from_string(std::string_view s) {
  for (const auto& i : kKinds) {
    if (i.name == s) return i.kind;
  }
  return std::nullopt;
}

const std::vector<AttackKind>& all_attack_kinds() {
  static const std::vector<AttackKind> all = [] {
    std::vector<AttackKind> v;
    for (const auto& i : kKinds) v.push_back(i.kind);
    return v;
  }();
  return all;
}

std::string_view describe(AttackKind k) {
  for (const auto& i : kKinds) {
    if (i.kind == k) return i.description;
  }
  return "";
}

void AttackPlan::validate(const ResourcePool& pool) const {
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument(std::string(to_string(kind)) + ": " + what);
  };
  if (active.end < active.begin) fail("active window ends before it starts");
  if (capability.timing_jitter_slots < 0) fail("timing_jitter_slots must be >= 0");
  switch (kind) {
    case AttackKind::FalseSyncInjection:
      if (params.slss_id < 0 || params.slss_id >= kSSssCount) fail("slss_id must lie in 0..335");
      break;
    case AttackKind::ResourceBlocking: {
      if (!(params.claim_fraction > 0.0 && params.claim_fraction <= 1.0)) fail("claim_fraction must lie in (0, 1]");
      const int len = static_cast<int>(std::lround(params.claim_fraction * pool.num_subchannels));
      if (len < 1) fail("claim_fraction covers no subchannel");
      if (params.claim_start_subchannel < 0 || params.claim_start_subchannel + len > pool.num_subchannels) {
        fail("claimed subchannels exceed the pool");
      }
      if (params.pool_discovery_slots < 0) fail("pool_discovery_slots must be >= 0");
      break;
    }
    case AttackKind::Pc5ForgedRequestFlood:
      if (params.flood_per_slot < 1) fail("flood_per_slot must be >= 1");
      break;
    case AttackKind::Pc5Replay:
      if (params.replay_delay_slots < 1) fail("replay_delay_slots must be >= 1");
      break;
    default:
      break;
  }
  if (params.reaction_slots < 1) fail("reaction_slots must be >= 1");
}

Attacker::Attacker(AttackPlan plan, ResourcePool pool, FeedbackConfig feedback, int ssb_period_slots,
                   std::uint64_t seed)
    : plan_(plan),
      pool_(std::move(pool)),
      feedback_(feedback),
      ssb_period_(ssb_period_slots),
      rng_(mix(seed, plan.node.value)),
      secure_(mix(seed, plan.node.value), "attacker") {
  plan_.validate(pool_);
}

Transmission Attacker::base(Slot slot, PhyChannel ch) const {
  Transmission t;
  t.sender = plan_.node;
  t.tx_power_dbm = plan_.capability.tx_power_dbm;
  t.slot = slot;
  t.channel = ch;
  return t;
}

Slot Attacker::react_slot(Slot nominal, Slot now) {
  Slot s = nominal + plan_.capability.timing_offset_slots;
  if (plan_.capability.timing_jitter_slots > 0) {
    std::uniform_int_distribution<int> j(-plan_.capability.timing_jitter_slots, plan_.capability.timing_jitter_slots);
    s += j(rng_);
  }
  return std::max(s, now + 1);
}

std::vector<Transmission> Attacker::forge_pc5(const Pc5Pdu& pdu, Slot at, const std::string& label) {
  auto t = base(at, PhyChannel::Pssch);
  DataPayload d;
  Sci2A sci;
  sci.cast_type = CastType::Unicast;
  sci.source_id = static_cast<std::uint8_t>(pdu.source.value & 0xFF);
  sci.destination_id = static_cast<std::uint16_t>(pdu.destination.value & 0xFFFF);
  d.sci2a = encode_sci2a(sci);
  d.mac_source = pdu.source;
  d.mac_destination = pdu.destination;
  d.tb_bytes = static_cast<std::uint32_t>(pdu.body.size());
  d.pc5 = encode_pc5_pdu(pdu);
  t.payload = d;
  std::uniform_int_distribution<int> sc(0, pool_.num_subchannels - 1);
  t.subchannels = SubchannelRange{sc(rng_), 1};
  actions_.push_back({at, label, t.tx_power_dbm, "injected", std::nullopt, {}});
  return {t};
}

std::vector<Transmission> Attacker::on_slot(Slot now, int direct_frame_number, int slot_in_frame) {
  std::vector<Transmission> out;
  if (!active(now)) return out;
  auto ssb = [&](SlssIdentity slss) {
    SsbFrame f;
    f.slss = slss;
    f.mib.in_coverage = true;
    f.mib.direct_frame_number = static_cast<std::uint16_t>(direct_frame_number);
    f.mib.slot_index = static_cast<std::uint8_t>(slot_in_frame);
    if (heard_tag_bits_ > 0) {
      // Without the key the best an attacker can do is guess.
      f.tag_bits = heard_tag_bits_;
      f.tag = secure_.next_u32() & (heard_tag_bits_ == 32 ? 0xFFFFFFFFu : ((1u << heard_tag_bits_) - 1));
    }
    auto t = base(now, PhyChannel::Psbch);
    t.payload = SsbPayload{encode_ssb(f)};
    actions_.push_back({now, "S-SSB slss=" + std::to_string(slss.slss_id), t.tx_power_dbm, "injected", std::nullopt, {}});
    out.push_back(std::move(t));
  };

  switch (plan_.kind) {
    case AttackKind::SyncImpersonation:
      if (heard_slss_ && heard_phase_ && now % ssb_period_ == *heard_phase_) ssb(*heard_slss_);
      break;
    case AttackKind::FalseSyncInjection:
      if (now % ssb_period_ == heard_phase_.value_or(0)) ssb(slss_from_id(plan_.params.slss_id, true));
      break;
    case AttackKind::ResourceBlocking: {
      Slot start = plan_.active.begin;
      if (!plan_.capability.knows_pool_config) {
        if (!first_sci_heard_) break;
        start = std::max(start, *first_sci_heard_) + plan_.params.pool_discovery_slots;
      }
      if (now < start) break;
      const int len = static_cast<int>(std::lround(plan_.params.claim_fraction * pool_.num_subchannels));
      Selection sel;
      sel.subchannels = SubchannelRange{plan_.params.claim_start_subchannel, len};
      sel.slot = now;
      const int rri = *std::max_element(pool_.period_list_ms.begin(), pool_.period_list_ms.end());
      auto t = base(now, PhyChannel::Pscch);
      t.payload = SciPayload{encode_sci1a(announce(sel, rri, 0, pool_), pool_)};
      t.subchannels = sel.subchannels;
      actions_.push_back({now, "SCI1A claim", t.tx_power_dbm, "injected", std::nullopt, {}});
      out.push_back(std::move(t));
      break;
    }
    case AttackKind::Pc5ForgedRequestFlood: {
      if (!flood_target_) break;
      for (int i = 0; i < plan_.params.flood_per_slot; ++i) {
        Pc5Pdu pdu;
        pdu.kind = Pc5MessageKind::EstablishmentRequest;
        pdu.source = L2Id{(secure_.next_u32() & kL2IdMask) | 1u};
        pdu.destination = *flood_target_;
        Pc5Fields f;
        f.nonce = secure_.bytes<16>();
        f.policy = SecurityPolicy{};
        f.session_byte = static_cast<std::uint8_t>(secure_.next_u32());
        f.timestamp = now;
        pdu.body = encode_fields(f);
        auto tx = forge_pc5(pdu, now, "forged EstablishmentRequest");
        out.insert(out.end(), tx.begin(), tx.end());
      }
      break;
    }
    case AttackKind::Pc5Replay: {
      for (auto it = replays_.begin(); it != replays_.end();) {
        if (it->due > now) {
          ++it;
          continue;
        }
        auto t = base(now, PhyChannel::Pssch);
        t.payload = it->payload;
        std::uniform_int_distribution<int> sc(0, pool_.num_subchannels - 1);
        t.subchannels = SubchannelRange{sc(rng_), 1};
        actions_.push_back({now, "replayed " + it->label, t.tx_power_dbm, "injected", std::nullopt, {}});
        out.push_back(std::move(t));
        it = replays_.erase(it);
      }
      break;
    }
    default:
      break;
  }
  return out;
}

std::vector<Transmission> Attacker::on_receive(const Transmission& tx, const Reception& rx, Slot now) {
  std::vector<Transmission> out;
  const auto* data = std::get_if<DataPayload>(&tx.payload);
  if (plan_.kind == AttackKind::L2Tracking) {
    if (data && active(now)) observations_.push_back({now, data->mac_source, std::round(rx.rsrp_dbm)});
    return out;
  }
  if (!active(now)) return out;

  switch (tx.channel) {
    case PhyChannel::Psbch: {
      const auto* p = std::get_if<SsbPayload>(&tx.payload);
      if (!p || p->bits.size() < kSsbHeaderBits + kMibSlBits) break;
      const auto tag_bits = static_cast<unsigned>(p->bits.size() - kSsbHeaderBits - kMibSlBits);
      try {
        const auto f = decode_ssb(p->bits, tag_bits);
        heard_tag_bits_ = tag_bits;
        if (!heard_slss_ || f.slss.slss_id < heard_slss_->slss_id ||
            (f.slss.slss_id == heard_slss_->slss_id && f.slss.priority_indicator)) {
          heard_slss_ = f.slss;
        }
        if (!heard_phase_) heard_phase_ = static_cast<int>(tx.slot % ssb_period_);
      } catch (const FrameError&) {
      }
      break;
    }
    case PhyChannel::Pscch:
      if (!first_sci_heard_) first_sci_heard_ = now;
      break;
    case PhyChannel::Pssch: {
      if (!data) break;
      if (plan_.kind == AttackKind::HarqSpoofAck || plan_.kind == AttackKind::HarqSpoofNack) {
        if (!plan_.capability.knows_harq_params) break;
        Sci2A sci;
        try {
          sci = decode_sci2a(data->sci2a);
        } catch (const FrameError&) {
          break;
        }
        if (!sci.harq_feedback_enabled || sci.cast_type != CastType::Unicast) break;
        const Slot at = react_slot(tx.slot + feedback_.delay_slots, now);
        auto t = base(at, PhyChannel::Psfch);
        t.payload = FeedbackPayload{plan_.kind == AttackKind::HarqSpoofAck, sci.harq_process, data->mac_destination,
                                    data->mac_source};
        actions_.push_back({at, plan_.kind == AttackKind::HarqSpoofAck ? "PSFCH ACK" : "PSFCH NACK",
                            t.tx_power_dbm, "injected", data->tb_id, tx.sender});
        out.push_back(std::move(t));
        break;
      }
      if (!data->pc5) break;
      Pc5Pdu pdu;
      try {
        pdu = decode_pc5_pdu(*data->pc5);
      } catch (const FrameError&) {
        break;
      }
      const Slot at = react_slot(now + plan_.params.reaction_slots, now);
      auto forged = [&](Pc5MessageKind kind, L2Id from, L2Id to, RejectCause cause) {
        Pc5Pdu f;
        f.kind = kind;
        f.source = from;
        f.destination = to;
        Pc5Fields fields;
        fields.cause = cause;
        fields.timestamp = at;
        f.body = encode_fields(fields);
        auto tx = forge_pc5(f, at, "forged " + std::string(to_string(kind)));
        out.insert(out.end(), tx.begin(), tx.end());
      };
      switch (plan_.kind) {
        case AttackKind::Pc5ForgedReject:
          if (pdu.kind == Pc5MessageKind::EstablishmentRequest) {
            forged(Pc5MessageKind::EstablishmentReject, pdu.destination, pdu.source, RejectCause::Unspecified);
          }
          break;
        case AttackKind::Pc5AuthDisrupt:
          if (pdu.kind == Pc5MessageKind::AuthenticationRequest) {
            forged(Pc5MessageKind::AuthenticationReject, pdu.source, pdu.destination,
                   RejectCause::AuthenticationFailed);
            forged(Pc5MessageKind::AuthenticationFailure, pdu.destination, pdu.source,
                   RejectCause::AuthenticationFailed);
          }
          break;
        case AttackKind::Pc5FalseSecModeReject:
          if (pdu.kind == Pc5MessageKind::SecurityModeCommand) {
            forged(Pc5MessageKind::SecurityModeReject, pdu.destination, pdu.source, RejectCause::IntegrityFailure);
          }
          break;
        case AttackKind::Pc5Replay: {
          const auto stage = protection_profile(pdu.kind).stage;
          if (pdu.kind == Pc5MessageKind::EstablishmentRequest || stage == SecurityStage::AfterSecurity) {
            replays_.push_back({now + plan_.params.replay_delay_slots, *data, std::string(to_string(pdu.kind))});
          }
          break;
        }
        case AttackKind::Pc5ForgedRequestFlood:
          if (pdu.kind == Pc5MessageKind::EstablishmentRequest && !flood_target_) flood_target_ = pdu.destination;
          break;
        default:
          break;
      }
      break;
    }
    case PhyChannel::Psfch:
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tracker
// ---------------------------------------------------------------------------

namespace {

struct IdInfo {
  Slot first = 0;
  Slot last = 0;
  std::vector<double> rsrp;

  double head() const {
    const std::size_t n = std::min<std::size_t>(5, rsrp.size());
    return std::accumulate(rsrp.begin(), rsrp.begin() + static_cast<long>(n), 0.0) / static_cast<double>(n);
  }
  double tail() const {
    const std::size_t n = std::min<std::size_t>(5, rsrp.size());
    return std::accumulate(rsrp.end() - static_cast<long>(n), rsrp.end(), 0.0) / static_cast<double>(n);
  }
};

int find(std::map<std::uint32_t, std::uint32_t>& parent, std::uint32_t x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return static_cast<int>(x);
}

}  // namespace

Linkage run_tracker(const std::vector<Observation>& obs, const TrackerConfig& cfg) {
  std::map<std::uint32_t, IdInfo> ids;
  for (const auto& o : obs) {
    auto [it, inserted] = ids.try_emplace(o.id.value);
    if (inserted) it->second.first = o.slot;
    it->second.first = std::min(it->second.first, o.slot);
    it->second.last = std::max(it->second.last, o.slot);
    it->second.rsrp.push_back(o.rsrp_dbm);
  }
  std::vector<std::uint32_t> order;
  for (const auto& [id, info] : ids) order.push_back(id);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return ids[a].first < ids[b].first; });

  std::mt19937_64 rng(cfg.seed);
  std::map<std::uint32_t, std::uint32_t> parent;
  for (auto id : order) parent[id] = id;
  std::set<std::uint32_t> linked_forward;

  for (auto n : order) {
    const auto& ni = ids[n];
    std::vector<std::uint32_t> cands;
    for (auto o : order) {
      if (o == n || linked_forward.count(o)) continue;
      const auto& oi = ids[o];
      if (oi.last < ni.first && ni.first - oi.last <= cfg.linkage_window_slots) cands.push_back(o);
    }
    if (cands.empty()) continue;

    std::vector<std::uint32_t> best;
    if (cfg.random_pairing) {
      best = cands;
    } else {
      std::uint32_t best_delta = cfg.weak_delta_max + 1;
      for (auto o : cands) {
        const std::uint32_t delta = (n - o) & kL2IdMask;
        if (delta == 0 || delta > cfg.weak_delta_max) continue;
        if (delta < best_delta) {
          best_delta = delta;
          best = {o};
        }
      }
      if (best.empty()) {
        double best_diff = cfg.rsrp_similarity_db + 1e-9;
        for (auto o : cands) {
          const double diff = std::abs(ni.head() - ids[o].tail());
          if (diff > cfg.rsrp_similarity_db) continue;
          if (diff < best_diff - 1e-9) {
            best_diff = diff;
            best = {o};
          } else if (std::abs(diff - best_diff) <= 1e-9) {
            best.push_back(o);
          }
        }
      }
    }
    if (best.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, best.size() - 1);
    const auto o = best[pick(rng)];
    linked_forward.insert(o);
    parent[static_cast<std::uint32_t>(find(parent, n))] = static_cast<std::uint32_t>(find(parent, o));
  }

  Linkage out;
  std::map<int, int> labels;
  for (auto id : order) {
    const int root = find(parent, id);
    auto [it, inserted] = labels.try_emplace(root, static_cast<int>(labels.size()));
    out[id] = it->second;
  }
  return out;
}

LinkageScore score_linkage(const Linkage& hypothesis, const std::map<std::uint32_t, NodeId>& truth) {
  LinkageScore s;
  if (hypothesis.empty()) return s;
  auto owner = [&](std::uint32_t id) -> std::int64_t {
    const auto it = truth.find(id);
    return it == truth.end() ? -static_cast<std::int64_t>(id) - 1 : static_cast<std::int64_t>(it->second.value);
  };
  std::map<int, std::vector<std::uint32_t>> clusters;
  std::map<std::int64_t, std::size_t> truth_size;
  for (const auto& [id, c] : hypothesis) {
    clusters[c].push_back(id);
    ++truth_size[owner(id)];
  }
  double p = 0.0;
  double r = 0.0;
  for (const auto& [id, c] : hypothesis) {
    const auto& members = clusters[c];
    const auto me = owner(id);
    const auto same = static_cast<double>(std::count_if(members.begin(), members.end(),
                                                        [&](std::uint32_t m) { return owner(m) == me; }));
    p += same / static_cast<double>(members.size());
    r += same / static_cast<double>(truth_size[me]);
  }
  const auto n = static_cast<double>(hypothesis.size());
  s.precision = p / n;
  s.recall = r / n;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

ChanceBaseline chance_baseline(const std::vector<Observation>& obs, const std::map<std::uint32_t, NodeId>& truth,
                               TrackerConfig cfg, int trials) {
  if (trials < 2) throw std::invalid_argument("chance baseline needs at least 2 trials");
  cfg.random_pairing = true;
  std::vector<double> f1;
  for (int t = 0; t < trials; ++t) {
    cfg.seed = 0x5EED0000u + static_cast<std::uint64_t>(t);
    f1.push_back(score_linkage(run_tracker(obs, cfg), truth).f1);
  }
  ChanceBaseline b;
  b.trials = trials;
  b.mean = std::accumulate(f1.begin(), f1.end(), 0.0) / trials;
  double ss = 0.0;
  for (double v : f1) ss += (v - b.mean) * (v - b.mean);
  b.stddev = std::sqrt(ss / (trials - 1));
  return b;
}

}  // namespace sidelink
