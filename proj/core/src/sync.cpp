#include "sidelink/sync.hpp"

#include <algorithm>
#include <stdexcept>

namespace sidelink {

void SyncConfig::validate() const {
  if (min_hyst_db < 0.0 || diff_hyst_db < 0.0) throw std::invalid_argument("hysteresis values must be >= 0");
  if (ssb_period_slots < 1) throw std::invalid_argument("ssb_period_slots must be >= 1");
}

std::string_view to_string(SyncSource s) {
  switch (s) {
    case SyncSource::Gnss: return "gnss";
    case SyncSource::GnodeB: return "gnodeb";
    case SyncSource::SyncRefUe: return "syncref-ue";
    case SyncSource::InternalClock: return "internal-clock";
  }
  return "?";
}

int sync_tier(const SlssIdentity& slss) {
  const int direct = slss.priority_indicator ? 0 : 1;
  switch (slss.coverage) {
    case CoverageClass::GnssDirect: return 0 + direct;
    case CoverageClass::InCoverage: return 2 + direct;
    case CoverageClass::OutOfCoverage: return 4 + direct;
  }
  return 6;
}

std::vector<SyncCandidate> rank_candidates(std::vector<SyncCandidate> cands, const SyncConfig& cfg) {
  std::erase_if(cands, [&](const SyncCandidate& c) { return c.rsrp_dbm < cfg.selection_rsrp_threshold_dbm; });
  std::stable_sort(cands.begin(), cands.end(), [](const SyncCandidate& a, const SyncCandidate& b) {
    const int ta = sync_tier(a.slss);
    const int tb = sync_tier(b.slss);
    if (ta != tb) return ta < tb;
    if (a.rsrp_dbm != b.rsrp_dbm) return a.rsrp_dbm > b.rsrp_dbm;
    return a.slss.slss_id < b.slss.slss_id;
  });
  return cands;
}

SyncDecision select_sync_ref(const SyncState& state, const std::vector<SyncCandidate>& cands,
                             const SyncConfig& cfg) {
  if (state.source == SyncSource::Gnss || state.source == SyncSource::GnodeB) return {};

  const auto ranked = rank_candidates(cands, cfg);
  if (ranked.empty()) return {SyncDecision::Kind::InternalClock, std::nullopt};

  if (state.source == SyncSource::SyncRefUe && state.reference) {
    const auto current = std::find_if(ranked.begin(), ranked.end(), [&](const SyncCandidate& c) {
      return c.emitter == state.reference->emitter;
    });
    if (current != ranked.end()) {
      const auto& best = ranked.front();
      if (best.emitter == current->emitter) return {SyncDecision::Kind::Keep, *current};
      if (sync_tier(best.slss) < sync_tier(current->slss)) return {SyncDecision::Kind::Switch, best};
      if (best.rsrp_dbm >= current->rsrp_dbm + cfg.diff_hyst_db) return {SyncDecision::Kind::Switch, best};
      return {SyncDecision::Kind::Keep, *current};
    }
  }

  // First-time selection, or the current reference is no longer usable.
  for (const auto& c : ranked) {
    if (c.rsrp_dbm >= cfg.selection_rsrp_threshold_dbm + cfg.min_hyst_db) {
      return {SyncDecision::Kind::Switch, c};
    }
  }
  return {SyncDecision::Kind::InternalClock, std::nullopt};
}

bool should_transmit_ssb(const SyncState& state, std::optional<double> measured_primary_rsrp,
                         const SyncConfig& cfg) {
  if (state.network_configured) return true;
  if (!measured_primary_rsrp) return true;
  return *measured_primary_rsrp < cfg.sync_tx_thresh_ooc_dbm;
}

namespace {

SlssIdentity draw_in_range(int lo, int hi, bool ic, std::mt19937_64& rng, const std::set<int>& heard) {
  std::vector<int> free;
  for (int id = lo; id <= hi; ++id) {
    if (!heard.count(id)) free.push_back(id);
  }
  if (free.empty()) {
    for (int id = lo; id <= hi; ++id) free.push_back(id);
  }
  std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
  return slss_from_id(free[pick(rng)], ic);
}

}  // namespace

SlssIdentity derive_own_slss(const SyncState& state, std::mt19937_64& rng, const std::set<int>& heard) {
  switch (state.source) {
    case SyncSource::Gnss:
      return slss_from_id(0, true);
    case SyncSource::GnodeB:
      return draw_in_range(1, kSSssCount - 1, true, rng, heard);
    case SyncSource::SyncRefUe: {
      if (!state.reference) break;
      switch (state.reference->slss.coverage) {
        case CoverageClass::GnssDirect: return slss_from_id(0, false);
        case CoverageClass::InCoverage: return draw_in_range(1, kSSssCount - 1, false, rng, heard);
        case CoverageClass::OutOfCoverage: break;
      }
      break;
    }
    case SyncSource::InternalClock:
      break;
  }
  return draw_in_range(kSSssCount, kSlssIdCount - 1, false, rng, heard);
}

SyncEntity::SyncEntity(SyncConfig cfg, SyncSource primary, bool network_configured) : cfg_(cfg) {
  cfg_.validate();
  if (primary == SyncSource::SyncRefUe) throw std::invalid_argument("a SyncRef UE is not a primary source");
  state_.source = primary;
  state_.network_configured = network_configured;
}

void SyncEntity::on_ssb(const SyncCandidate& cand) {
  for (auto& c : buffer_) {
    if (c.emitter == cand.emitter) {
      c = cand;
      return;
    }
  }
  buffer_.push_back(cand);
}

SyncEntity::Evaluation SyncEntity::evaluate(std::mt19937_64& rng, std::optional<double> primary_rsrp) {
  Evaluation ev;
  std::set<int> heard;
  for (const auto& c : buffer_) heard.insert(c.slss.slss_id);

  const auto before_source = state_.source;
  const auto before_ref = state_.reference;
  const bool first = !initialised_;
  initialised_ = true;

  ev.decision = select_sync_ref(state_, buffer_, cfg_);
  switch (ev.decision.kind) {
    case SyncDecision::Kind::Keep:
      if (state_.reference && ev.decision.target) state_.reference->rsrp_dbm = ev.decision.target->rsrp_dbm;
      break;
    case SyncDecision::Kind::Switch: {
      const auto& t = *ev.decision.target;
      state_.source = SyncSource::SyncRefUe;
      state_.reference = SyncReference{t.slss, t.emitter, t.rsrp_dbm};
      break;
    }
    case SyncDecision::Kind::InternalClock:
      state_.source = SyncSource::InternalClock;
      state_.reference.reset();
      break;
  }
  ev.switched = (before_ref.has_value() != state_.reference.has_value()) ||
                (before_ref && state_.reference && before_ref->emitter != state_.reference->emitter);

  const bool identity_changed = first || before_source != state_.source || ev.switched ||
                                (before_ref && state_.reference &&
                                 (before_ref->slss.coverage != state_.reference->slss.coverage));
  if (identity_changed) state_.own_slss = derive_own_slss(state_, rng, heard);

  std::optional<double> measured = primary_rsrp;
  if (state_.source == SyncSource::SyncRefUe) measured = state_.reference->rsrp_dbm;
  if (state_.source == SyncSource::InternalClock) measured.reset();
  ev.transmit = should_transmit_ssb(state_, measured, cfg_);
  state_.is_sync_ref = ev.transmit;
  buffer_.clear();
  return ev;
}

SsbFrame SyncEntity::make_ssb(int direct_frame_number, int slot_in_frame) const {
  SsbFrame f;
  f.slss = state_.own_slss;
  f.mib.in_coverage = state_.source == SyncSource::Gnss || state_.source == SyncSource::GnodeB ||
                      (state_.reference && state_.reference->slss.coverage != CoverageClass::OutOfCoverage);
  f.mib.direct_frame_number = static_cast<std::uint16_t>(direct_frame_number);
  f.mib.slot_index = static_cast<std::uint8_t>(slot_in_frame);
  return f;
}

}  // namespace sidelink
