#pragma once

#include <optional>
#include <random>
#include <set>
#include <string_view>
#include <vector>

#include "sidelink/frames.hpp"
#include "sidelink/types.hpp"

namespace sidelink {

struct SyncConfig {
  double min_hyst_db = 0.0;          // sl-SyncRefMinHyst
  double diff_hyst_db = 3.0;         // sl-SyncRefDiffHyst
  double sync_tx_thresh_ooc_dbm = -95.0;  // syncTxThreshOoC
  double selection_rsrp_threshold_dbm = -110.0;
  int ssb_period_slots = 160;

  void validate() const;
};

enum class SyncSource { Gnss, GnodeB, SyncRefUe, InternalClock };

std::string_view to_string(SyncSource s);

/// Priority rank of an advertised identity; lower is preferred.
///   0: SLSS id 0, I_C = 1    1: SLSS id 0, I_C = 0
///   2: in coverage, I_C = 1  3: in coverage, I_C = 0
///   4: out of coverage, I_C = 1  5: out of coverage, I_C = 0
int sync_tier(const SlssIdentity& slss);

/// A received S-SSB. `emitter` stands for the physical timing source the
/// receiver measured; it lets the receiver tell two signals with the same
/// SLSS id apart but carries no authenticated identity.
struct SyncCandidate {
  SlssIdentity slss;
  double rsrp_dbm = 0.0;
  MibSl mib;
  Slot received_slot = 0;
  NodeId emitter;
};

struct SyncReference {
  SlssIdentity slss;
  NodeId emitter;
  double rsrp_dbm = 0.0;
};

struct SyncState {
  SyncSource source = SyncSource::InternalClock;
  std::optional<SyncReference> reference;  // set iff source == SyncRefUe
  SlssIdentity own_slss = slss_from_id(kSSssCount);
  bool is_sync_ref = false;
  bool network_configured = false;

  int tier() const { return sync_tier(own_slss); }
};

/// Drops candidates below the selection threshold and orders the rest by
/// tier, then RSRP (descending), then lowest SLSS id. Stable otherwise.
std::vector<SyncCandidate> rank_candidates(std::vector<SyncCandidate> cands, const SyncConfig& cfg);

struct SyncDecision {
  enum class Kind { Keep, Switch, InternalClock };
  Kind kind = Kind::Keep;
  std::optional<SyncCandidate> target;
};

/// UEs with a primary source (GNSS or gNodeB) always keep it. Otherwise a UE
/// following a SyncRef switches only to a strictly better tier or to a same-tier
/// candidate at least diff_hyst stronger; a UE without a reference needs
/// rsrp >= threshold + min_hyst.
SyncDecision select_sync_ref(const SyncState& state, const std::vector<SyncCandidate>& cands,
                             const SyncConfig& cfg);

/// Network-configured SyncRefs always transmit; others transmit iff the
/// measured primary RSRP is strictly below syncTxThreshOoC (or absent).
bool should_transmit_ssb(const SyncState& state, std::optional<double> measured_primary_rsrp,
                         const SyncConfig& cfg);

/// Own SLSS identity for the current source. Ids in 1..335 / 336..671 are
/// drawn uniformly from `rng`, avoiding ids in `heard` where possible.
SlssIdentity derive_own_slss(const SyncState& state, std::mt19937_64& rng, const std::set<int>& heard = {});

/// Per-UE synchronization procedure: buffers candidates heard during one
/// evaluation period and applies the selection rules at its end.
class SyncEntity {
 public:
  SyncEntity(SyncConfig cfg, SyncSource primary, bool network_configured);

  const SyncState& state() const { return state_; }
  const SyncConfig& config() const { return cfg_; }

  void on_ssb(const SyncCandidate& cand);

  struct Evaluation {
    SyncDecision decision;
    bool switched = false;  // reference emitter changed
    bool transmit = false;
  };

  /// Runs selection over buffered candidates, refreshes the own identity and
  /// decides whether to act as SyncRef for the next period.
  Evaluation evaluate(std::mt19937_64& rng, std::optional<double> primary_rsrp);

  /// S-SSB contents advertised by this UE at `clock_slot`.
  SsbFrame make_ssb(int direct_frame_number, int slot_in_frame) const;

 private:
  SyncConfig cfg_;
  SyncState state_;
  std::vector<SyncCandidate> buffer_;
  bool initialised_ = false;
};

}  // namespace sidelink
