#include "sidelink/scenario.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace sidelink {

ScenarioError::ScenarioError(std::string source, int line, const std::string& what)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + what),
      source_(std::move(source)),
      line_(line) {}

std::string_view to_string(UeRole r) {
  switch (r) {
    case UeRole::Legit: return "legit";
    case UeRole::GnodeB: return "gnodeb";
    case UeRole::GnssVisible: return "gnss_visible";
  }
  return "?";
}

const UeSpec* Scenario::ue(NodeId id) const {
  for (const auto& u : ues) {
    if (u.id == id) return &u;
  }
  return nullptr;
}

bool Scenario::is_attacker(NodeId id) const {
  for (const auto& a : attacks) {
    if (a.plan.node == id) return true;
  }
  return false;
}

void Scenario::validate(const std::string& source) const {
  auto fail = [&](int line, const std::string& what) { throw ScenarioError(source, line, what); };
  auto guard = [&](int line, auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      fail(line, e.what());
    }
  };

  if (duration_slots < 1) fail(0, "duration_slots must be >= 1");
  if (bucket_slots < 1) fail(0, "bucket_slots must be >= 1");
  if (!(bler >= 0.0 && bler < 1.0)) fail(0, "channel.bler must lie in [0, 1)");
  guard(0, [&] { channel.validate(); });
  guard(0, [&] { pool.validate(); });
  guard(0, [&] { sync.config.validate(); });
  guard(0, [&] { harq.feedback.validate(); });
  guard(0, [&] { defenses.validate(); });
  if (harq.max_retransmissions < 0 || harq.max_retransmissions > 32) {
    fail(0, "harq.max_retransmissions must lie in 0..32");
  }
  if (pc5.keepalive_ms < 1 || pc5.max_missed_keepalives < 1 || pc5.establishment_timeout_slots < 1 ||
      pc5.processing_slots < 1) {
    fail(0, "pc5 timers must be >= 1");
  }
  if (identity.mode != IdRefreshMode::Static && identity.timer_ms < 1) fail(0, "identity.timer_ms must be >= 1");
  if (ues.empty()) fail(0, "scenario needs at least one UE");

  std::set<NodeId> ids;
  std::set<std::uint32_t> l2;
  bool has_gnodeb = false;
  for (const auto& u : ues) {
    if (!ids.insert(u.id).second) fail(u.line, "duplicate UE id " + to_string(u.id));
    if (u.l2_id) {
      if (*u.l2_id == 0 || *u.l2_id > kL2IdMask) fail(u.line, "l2_id must lie in 1..2^24-1");
      if (!l2.insert(*u.l2_id).second) fail(u.line, "duplicate l2_id " + std::to_string(*u.l2_id));
    }
    if (u.role == UeRole::GnodeB) has_gnodeb = true;
  }
  auto legit = [&](NodeId id, int line, const std::string& what) {
    const auto* u = ue(id);
    if (!u) fail(line, what + " references unknown UE " + to_string(id));
    if (u->role == UeRole::GnodeB) fail(line, what + " references gNodeB " + to_string(id));
    if (is_attacker(id)) fail(line, what + " references attacker UE " + to_string(id));
  };
  for (const auto& u : ues) {
    if (u.mode1 && !has_gnodeb) fail(u.line, "UE " + to_string(u.id) + " uses mode1 but no gnodeb is defined");
  }

  std::set<NodeId> attackers;
  for (const auto& a : attacks) {
    const auto* u = ue(a.plan.node);
    if (!u) fail(a.line, "attack references unknown UE " + to_string(a.plan.node));
    if (u->role == UeRole::GnodeB) fail(a.line, "attack node cannot be a gNodeB");
    if (!attackers.insert(a.plan.node).second) fail(a.line, "UE " + to_string(a.plan.node) + " runs two attacks");
    guard(a.line, [&] { a.plan.validate(pool); });
  }
  for (const auto& f : traffic) {
    legit(f.source, f.line, "traffic source");
    if (f.destination) {
      legit(*f.destination, f.line, "traffic destination");
      if (*f.destination == f.source) fail(f.line, "traffic source and destination are the same UE");
    }
    if (f.period_ms <= 0 || !pool.has_period(f.period_ms)) {
      fail(f.line, "period_ms " + std::to_string(f.period_ms) + " is not a nonzero entry of pool.period_list_ms");
    }
    if (f.subchannels < 1 || f.subchannels > pool.num_subchannels) fail(f.line, "subchannels exceeds the pool");
    if (f.start_slot < 0) fail(f.line, "start_slot must be >= 0");
    if (f.stop_slot && *f.stop_slot < f.start_slot) fail(f.line, "stop_slot precedes start_slot");
    if (f.priority > 7) fail(f.line, "priority must lie in 0..7");
  }
  for (const auto& l : links) {
    legit(l.initiator, l.line, "link initiator");
    legit(l.responder, l.line, "link responder");
    if (l.initiator == l.responder) fail(l.line, "link initiator and responder are the same UE");
    if (l.start_slot < 0) fail(l.line, "start_slot must be >= 0");
  }
}

// ---------------------------------------------------------------------------
// YAML
// ---------------------------------------------------------------------------

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& what) const {
    throw ScenarioError(source_, line_of(n), what);
  }
  static int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

  void map(const YAML::Node& n, const std::string& ctx) const {
    if (!n.IsMap()) fail(n, ctx + " must be a mapping");
  }

  void keys(const YAML::Node& n, const std::string& ctx, std::initializer_list<std::string_view> allowed) const {
    map(n, ctx);
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        fail(kv.first, "unknown key '" + key + "' in " + ctx);
      }
    }
  }

  template <typename T>
  T as(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, what + ": cannot parse '" + n.Scalar() + "'");
    }
  }

  template <typename T>
  void opt(const YAML::Node& parent, const char* key, T& out, const std::string& ctx) const {
    const auto n = parent[key];
    if (n) out = as<T>(n, ctx + "." + key);
  }

  template <typename T>
  void opt(const YAML::Node& parent, const char* key, std::optional<T>& out, const std::string& ctx) const {
    const auto n = parent[key];
    if (n) out = as<T>(n, ctx + "." + key);
  }

  Vec2 vec2(const YAML::Node& n, const std::string& what) const {
    if (!n.IsSequence() || n.size() != 2) fail(n, what + " must be [x, y]");
    return {as<double>(n[0], what), as<double>(n[1], what)};
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
};

SecurityPolicy read_policy(const Reader& r, const YAML::Node& n, const std::string& ctx, SecurityPolicy p) {
  r.keys(n, ctx, {"ciphering", "integrity", "allow_null_cipher", "authentication_mandatory"});
  auto req = [&](const char* key, Requirement& out) {
    if (const auto v = n[key]) {
      const auto s = r.as<std::string>(v, ctx + "." + key);
      const auto parsed = requirement_from_string(s);
      if (!parsed) r.fail(v, ctx + "." + key + ": expected REQUIRED, PREFERRED or NOT_NEEDED, got '" + s + "'");
      out = *parsed;
    }
  };
  req("ciphering", p.ciphering);
  req("integrity", p.integrity);
  r.opt(n, "allow_null_cipher", p.allow_null_cipher, ctx);
  r.opt(n, "authentication_mandatory", p.authentication_mandatory, ctx);
  return p;
}

NodeId node_id(const Reader& r, const YAML::Node& n, const std::string& what) {
  const auto v = r.as<long long>(n, what);
  if (v < 0 || v > 0xFFFFFFFFLL) r.fail(n, what + " out of range");
  return NodeId{static_cast<std::uint32_t>(v)};
}

void read_channel(const Reader& r, const YAML::Node& n, Scenario& s) {
  const std::string ctx = "channel";
  r.keys(n, ctx, {"reference_loss_db", "path_loss_exponent", "noise_floor_dbm", "shadowing_sigma_db",
                  "shadowing_decorrelation_m", "capture_threshold_db", "bler"});
  r.opt(n, "reference_loss_db", s.channel.reference_loss_db, ctx);
  r.opt(n, "path_loss_exponent", s.channel.path_loss_exponent, ctx);
  r.opt(n, "noise_floor_dbm", s.channel.noise_floor_dbm, ctx);
  r.opt(n, "shadowing_sigma_db", s.channel.shadowing_sigma_db, ctx);
  r.opt(n, "shadowing_decorrelation_m", s.channel.shadowing_decorrelation_m, ctx);
  r.opt(n, "capture_threshold_db", s.channel.capture_threshold_db, ctx);
  r.opt(n, "bler", s.bler, ctx);
}

void read_pool(const Reader& r, const YAML::Node& n, Scenario& s) {
  const std::string ctx = "pool";
  r.keys(n, ctx, {"num_subchannels", "slots_per_selection_window", "period_list_ms", "sl_max_num_per_reserve",
                  "sensing_window_slots", "rsrp_exclusion_threshold_dbm", "min_candidate_ratio",
                  "threshold_step_db", "miss_refresh_limit", "reselection_min", "reselection_max",
                  "dmrs_pattern_count", "additional_mcs_tables", "psfch_period", "slot_ms"});
  auto& p = s.pool;
  r.opt(n, "num_subchannels", p.num_subchannels, ctx);
  r.opt(n, "slots_per_selection_window", p.slots_per_selection_window, ctx);
  if (const auto l = n["period_list_ms"]) {
    if (!l.IsSequence()) r.fail(l, "pool.period_list_ms must be a list");
    p.period_list_ms.clear();
    for (const auto& v : l) p.period_list_ms.push_back(r.as<int>(v, "pool.period_list_ms"));
  }
  r.opt(n, "sl_max_num_per_reserve", p.sl_max_num_per_reserve, ctx);
  r.opt(n, "sensing_window_slots", p.sensing_window_slots, ctx);
  r.opt(n, "rsrp_exclusion_threshold_dbm", p.rsrp_exclusion_threshold_dbm, ctx);
  r.opt(n, "min_candidate_ratio", p.min_candidate_ratio, ctx);
  r.opt(n, "threshold_step_db", p.threshold_step_db, ctx);
  r.opt(n, "miss_refresh_limit", p.miss_refresh_limit, ctx);
  r.opt(n, "reselection_min", p.reselection_min, ctx);
  r.opt(n, "reselection_max", p.reselection_max, ctx);
  r.opt(n, "dmrs_pattern_count", p.dmrs_pattern_count, ctx);
  r.opt(n, "additional_mcs_tables", p.additional_mcs_tables, ctx);
  r.opt(n, "psfch_period", p.psfch_period, ctx);
  r.opt(n, "slot_ms", p.slot_duration_ms, ctx);
}

void read_sync(const Reader& r, const YAML::Node& n, Scenario& s) {
  const std::string ctx = "sync";
  r.keys(n, ctx, {"enabled", "min_hyst_db", "diff_hyst_db", "sync_tx_thresh_ooc_dbm",
                  "selection_rsrp_threshold_dbm", "ssb_period_slots"});
  auto& c = s.sync.config;
  r.opt(n, "enabled", s.sync.enabled, ctx);
  r.opt(n, "min_hyst_db", c.min_hyst_db, ctx);
  r.opt(n, "diff_hyst_db", c.diff_hyst_db, ctx);
  r.opt(n, "sync_tx_thresh_ooc_dbm", c.sync_tx_thresh_ooc_dbm, ctx);
  r.opt(n, "selection_rsrp_threshold_dbm", c.selection_rsrp_threshold_dbm, ctx);
  r.opt(n, "ssb_period_slots", c.ssb_period_slots, ctx);
}

void read_harq(const Reader& r, const YAML::Node& n, Scenario& s) {
  const std::string ctx = "harq";
  r.keys(n, ctx, {"feedback_delay_slots", "feedback_window_slots", "max_retransmissions"});
  r.opt(n, "feedback_delay_slots", s.harq.feedback.delay_slots, ctx);
  r.opt(n, "feedback_window_slots", s.harq.feedback.window_slots, ctx);
  r.opt(n, "max_retransmissions", s.harq.max_retransmissions, ctx);
}

void read_pc5(const Reader& r, const YAML::Node& n, Scenario& s) {
  const std::string ctx = "pc5";
  r.keys(n, ctx, {"policy", "keepalive_ms", "max_missed_keepalives", "establishment_timeout_slots",
                  "processing_slots"});
  if (const auto p = n["policy"]) s.pc5.default_policy = read_policy(r, p, "pc5.policy", s.pc5.default_policy);
  r.opt(n, "keepalive_ms", s.pc5.keepalive_ms, ctx);
  r.opt(n, "max_missed_keepalives", s.pc5.max_missed_keepalives, ctx);
  r.opt(n, "establishment_timeout_slots", s.pc5.establishment_timeout_slots, ctx);
  r.opt(n, "processing_slots", s.pc5.processing_slots, ctx);
}

void read_identity(const Reader& r, const YAML::Node& n, Scenario& s) {
  const std::string ctx = "identity";
  r.keys(n, ctx, {"mode", "timer_ms", "alignment"});
  if (const auto m = n["mode"]) {
    const auto str = r.as<std::string>(m, "identity.mode");
    const auto mode = id_refresh_mode_from_string(str);
    if (!mode) r.fail(m, "identity.mode: expected static, weak or secure, got '" + str + "'");
    s.identity.mode = *mode;
  }
  r.opt(n, "timer_ms", s.identity.timer_ms, ctx);
  if (const auto a = n["alignment"]) {
    const auto str = r.as<std::string>(a, "identity.alignment");
    if (str == "aligned") {
      s.identity.alignment = TimerAlignment::Aligned;
    } else if (str == "staggered") {
      s.identity.alignment = TimerAlignment::Staggered;
    } else {
      r.fail(a, "identity.alignment: expected aligned or staggered, got '" + str + "'");
    }
  }
}

UeSpec read_ue(const Reader& r, const YAML::Node& n, std::size_t index) {
  const std::string ctx = "ues[" + std::to_string(index) + "]";
  r.keys(n, ctx, {"id", "position", "velocity", "role", "tx_power_dbm", "policy", "authorized", "credential",
                  "allocation", "l2_id"});
  UeSpec u;
  u.line = Reader::line_of(n);
  if (!n["id"]) r.fail(n, ctx + " needs an id");
  u.id = node_id(r, n["id"], ctx + ".id");
  if (!n["position"]) r.fail(n, ctx + " needs a position");
  u.motion.origin = r.vec2(n["position"], ctx + ".position");
  if (const auto v = n["velocity"]) u.motion.velocity_mps = r.vec2(v, ctx + ".velocity");
  if (const auto role = n["role"]) {
    const auto s = r.as<std::string>(role, ctx + ".role");
    if (s == "legit") {
      u.role = UeRole::Legit;
    } else if (s == "gnodeb") {
      u.role = UeRole::GnodeB;
    } else if (s == "gnss_visible") {
      u.role = UeRole::GnssVisible;
    } else {
      r.fail(role, ctx + ".role: expected legit, gnodeb or gnss_visible, got '" + s + "'");
    }
  }
  r.opt(n, "tx_power_dbm", u.tx_power_dbm, ctx);
  if (const auto p = n["policy"]) u.policy = read_policy(r, p, ctx + ".policy", SecurityPolicy{});
  r.opt(n, "authorized", u.authorized, ctx);
  r.opt(n, "credential", u.credential, ctx);
  if (const auto a = n["allocation"]) {
    const auto s = r.as<std::string>(a, ctx + ".allocation");
    if (s != "mode1" && s != "mode2") r.fail(a, ctx + ".allocation: expected mode1 or mode2, got '" + s + "'");
    u.mode1 = s == "mode1";
  }
  r.opt(n, "l2_id", u.l2_id, ctx);
  return u;
}

TrafficFlow read_flow(const Reader& r, const YAML::Node& n, std::size_t index) {
  const std::string ctx = "traffic[" + std::to_string(index) + "]";
  r.keys(n, ctx, {"source", "destination", "period_ms", "size_bytes", "start_slot", "stop_slot", "subchannels",
                  "harq_feedback", "priority"});
  TrafficFlow f;
  f.line = Reader::line_of(n);
  if (!n["source"]) r.fail(n, ctx + " needs a source");
  f.source = node_id(r, n["source"], ctx + ".source");
  if (const auto d = n["destination"]) {
    if (d.IsScalar() && d.Scalar() == "broadcast") {
      f.destination.reset();
    } else {
      f.destination = node_id(r, d, ctx + ".destination");
    }
  }
  r.opt(n, "period_ms", f.period_ms, ctx);
  r.opt(n, "size_bytes", f.size_bytes, ctx);
  r.opt(n, "start_slot", f.start_slot, ctx);
  r.opt(n, "stop_slot", f.stop_slot, ctx);
  r.opt(n, "subchannels", f.subchannels, ctx);
  r.opt(n, "harq_feedback", f.harq_feedback, ctx);
  int priority = f.priority;
  r.opt(n, "priority", priority, ctx);
  if (priority < 0 || priority > 7) r.fail(n["priority"], ctx + ".priority must lie in 0..7");
  f.priority = static_cast<std::uint8_t>(priority);
  return f;
}

LinkPlan read_link(const Reader& r, const YAML::Node& n, std::size_t index) {
  const std::string ctx = "links[" + std::to_string(index) + "]";
  r.keys(n, ctx, {"initiator", "responder", "start_slot", "release_slot", "rekey_slot"});
  LinkPlan l;
  l.line = Reader::line_of(n);
  if (!n["initiator"] || !n["responder"]) r.fail(n, ctx + " needs initiator and responder");
  l.initiator = node_id(r, n["initiator"], ctx + ".initiator");
  l.responder = node_id(r, n["responder"], ctx + ".responder");
  r.opt(n, "start_slot", l.start_slot, ctx);
  r.opt(n, "release_slot", l.release_slot, ctx);
  r.opt(n, "rekey_slot", l.rekey_slot, ctx);
  return l;
}

AttackSpec read_attack(const Reader& r, const YAML::Node& n, std::size_t index, const Scenario& s) {
  const std::string ctx = "attacks[" + std::to_string(index) + "]";
  r.keys(n, ctx, {"kind", "node", "tx_power_dbm", "timing_jitter_slots", "timing_offset_slots",
                  "knows_pool_config", "knows_harq_params", "active", "params"});
  AttackSpec a;
  a.line = Reader::line_of(n);
  auto& p = a.plan;
  if (!n["kind"]) r.fail(n, ctx + " needs a kind");
  const auto kind = r.as<std::string>(n["kind"], ctx + ".kind");
  const auto parsed = attack_kind_from_string(kind);
  if (!parsed) r.fail(n["kind"], ctx + ".kind: unknown attack '" + kind + "'");
  p.kind = *parsed;
  if (!n["node"]) r.fail(n, ctx + " needs a node");
  p.node = node_id(r, n["node"], ctx + ".node");
  const auto* ue = s.ue(p.node);
  if (!ue) r.fail(n["node"], ctx + ".node references unknown UE " + to_string(p.node));
  p.capability.motion = ue->motion;
  p.capability.tx_power_dbm = ue->tx_power_dbm;
  r.opt(n, "tx_power_dbm", p.capability.tx_power_dbm, ctx);
  r.opt(n, "timing_jitter_slots", p.capability.timing_jitter_slots, ctx);
  r.opt(n, "timing_offset_slots", p.capability.timing_offset_slots, ctx);
  r.opt(n, "knows_pool_config", p.capability.knows_pool_config, ctx);
  r.opt(n, "knows_harq_params", p.capability.knows_harq_params, ctx);
  p.active = SlotWindow{0, s.duration_slots};
  if (const auto w = n["active"]) {
    if (!w.IsSequence() || w.size() != 2) r.fail(w, ctx + ".active must be [begin, end]");
    p.active.begin = r.as<Slot>(w[0], ctx + ".active");
    p.active.end = r.as<Slot>(w[1], ctx + ".active");
    if (p.active.end < p.active.begin) r.fail(w, ctx + ".active ends before it begins");
  }
  if (const auto q = n["params"]) {
    const std::string pc = ctx + ".params";
    r.keys(q, pc, {"slss_id", "claim_fraction", "claim_start_subchannel", "pool_discovery_slots",
                   "flood_per_slot", "replay_delay_slots", "reaction_slots"});
    r.opt(q, "slss_id", p.params.slss_id, pc);
    r.opt(q, "claim_fraction", p.params.claim_fraction, pc);
    r.opt(q, "claim_start_subchannel", p.params.claim_start_subchannel, pc);
    r.opt(q, "pool_discovery_slots", p.params.pool_discovery_slots, pc);
    r.opt(q, "flood_per_slot", p.params.flood_per_slot, pc);
    r.opt(q, "replay_delay_slots", p.params.replay_delay_slots, pc);
    r.opt(q, "reaction_slots", p.params.reaction_slots, pc);
  }
  try {
    p.validate(s.pool);
  } catch (const std::invalid_argument& e) {
    r.fail(n, e.what());
  }
  return a;
}

void read_defenses(const Reader& r, const YAML::Node& n, Scenario& s) {
  r.keys(n, "defenses", {"signed_ssb", "harq_anomaly_check", "replay_guard", "policy_enforcer",
                         "privacy_randomizer", "incident_log"});
  auto& d = s.defenses;
  if (const auto x = n["signed_ssb"]) {
    r.keys(x, "defenses.signed_ssb", {"enabled", "tag_bits"});
    r.opt(x, "enabled", d.signed_ssb.enabled, "defenses.signed_ssb");
    r.opt(x, "tag_bits", d.signed_ssb.tag_bits, "defenses.signed_ssb");
    if (d.signed_ssb.tag_bits != 16 && d.signed_ssb.tag_bits != 32) {
      r.fail(x["tag_bits"], "defenses.signed_ssb.tag_bits must be 16 or 32");
    }
  }
  if (const auto x = n["harq_anomaly_check"]) {
    const std::string ctx = "defenses.harq_anomaly_check";
    r.keys(x, ctx, {"enabled", "power_tolerance_db", "strict_window", "min_history", "ewma_alpha", "track_band_db"});
    r.opt(x, "enabled", d.harq_anomaly.enabled, ctx);
    r.opt(x, "power_tolerance_db", d.harq_anomaly.power_tolerance_db, ctx);
    r.opt(x, "strict_window", d.harq_anomaly.strict_window, ctx);
    r.opt(x, "min_history", d.harq_anomaly.min_history, ctx);
    r.opt(x, "ewma_alpha", d.harq_anomaly.ewma_alpha, ctx);
    r.opt(x, "track_band_db", d.harq_anomaly.track_band_db, ctx);
  }
  if (const auto x = n["replay_guard"]) {
    const std::string ctx = "defenses.replay_guard";
    r.keys(x, ctx, {"enabled", "timestamp_skew_slots", "hold_slots"});
    r.opt(x, "enabled", d.replay_guard.enabled, ctx);
    r.opt(x, "timestamp_skew_slots", d.replay_guard.timestamp_skew_slots, ctx);
    r.opt(x, "hold_slots", d.replay_guard.hold_slots, ctx);
  }
  r.opt(n, "policy_enforcer", d.policy_enforcer, "defenses");
  if (const auto x = n["privacy_randomizer"]) {
    const std::string ctx = "defenses.privacy_randomizer";
    r.keys(x, ctx, {"enabled", "timer_ms"});
    r.opt(x, "enabled", d.privacy_randomizer.enabled, ctx);
    r.opt(x, "timer_ms", d.privacy_randomizer.timer_ms, ctx);
  }
  r.opt(n, "incident_log", d.incident_log, "defenses");
}

template <typename Fn>
void each(const Reader& r, const YAML::Node& root, const char* key, Fn&& fn) {
  const auto n = root[key];
  if (!n) return;
  if (!n.IsSequence()) r.fail(n, std::string(key) + " must be a list");
  for (std::size_t i = 0; i < n.size(); ++i) fn(n[i], i);
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError(source, e.mark.line >= 0 ? e.mark.line + 1 : 0, e.msg);
  }
  Reader r(source);
  if (!root || root.IsNull()) throw ScenarioError(source, 0, "empty scenario");
  r.keys(root, "scenario", {"name", "seed", "duration_slots", "bucket_slots", "channel", "pool", "sync", "harq",
                            "pc5", "identity", "ues", "traffic", "links", "attacks", "defenses"});
  Scenario s;
  if (!root["name"]) r.fail(root, "scenario needs a name");
  s.name = r.as<std::string>(root["name"], "name");
  r.opt(root, "seed", s.seed, "scenario");
  r.opt(root, "duration_slots", s.duration_slots, "scenario");
  r.opt(root, "bucket_slots", s.bucket_slots, "scenario");
  if (const auto n = root["channel"]) read_channel(r, n, s);
  if (const auto n = root["pool"]) read_pool(r, n, s);
  if (const auto n = root["sync"]) read_sync(r, n, s);
  if (const auto n = root["harq"]) read_harq(r, n, s);
  if (const auto n = root["pc5"]) read_pc5(r, n, s);
  if (const auto n = root["identity"]) read_identity(r, n, s);

  if (!root["ues"]) r.fail(root, "scenario needs a ues list");
  std::map<NodeId, int> seen;
  each(r, root, "ues", [&](const YAML::Node& n, std::size_t i) {
    auto u = read_ue(r, n, i);
    if (const auto it = seen.find(u.id); it != seen.end()) {
      r.fail(n, "duplicate UE id " + to_string(u.id) + " (first defined on line " + std::to_string(it->second) +
                    ")");
    }
    seen.emplace(u.id, u.line);
    s.ues.push_back(std::move(u));
  });
  each(r, root, "traffic", [&](const YAML::Node& n, std::size_t i) { s.traffic.push_back(read_flow(r, n, i)); });
  each(r, root, "links", [&](const YAML::Node& n, std::size_t i) { s.links.push_back(read_link(r, n, i)); });
  if (const auto n = root["defenses"]) read_defenses(r, n, s);
  each(r, root, "attacks", [&](const YAML::Node& n, std::size_t i) {
    s.attacks.push_back(read_attack(r, n, i, s));
  });
  s.validate(source);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path, 0, "cannot open scenario file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace sidelink
