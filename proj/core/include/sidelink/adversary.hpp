#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sidelink/crypto.hpp"
#include "sidelink/frames.hpp"
#include "sidelink/harq.hpp"
#include "sidelink/radio.hpp"
#include "sidelink/resource_pool.hpp"
#include "sidelink/resources.hpp"
#include "sidelink/types.hpp"

namespace sidelink {

enum class AttackKind {
  SyncImpersonation,
  FalseSyncInjection,
  ResourceBlocking,
  HarqSpoofAck,
  HarqSpoofNack,
  Pc5ForgedRequestFlood,
  Pc5ForgedReject,
  Pc5AuthDisrupt,
  Pc5Replay,
  Pc5FalseSecModeReject,
  L2Tracking,
};

std::string_view to_string(AttackKind k);
std::optional<AttackKind> attack_kind_from_string(std::string_view s);
const std::vector<AttackKind>& all_attack_kinds();
/// One-line description for listings.
std::string_view describe(AttackKind k);

struct AttackerCapability {
  double tx_power_dbm = 33.0;
  int timing_jitter_slots = 0;  // injections land within +/- this bound
  int timing_offset_slots = 0;  // systematic lateness (negative = early)
  bool knows_pool_config = true;
  bool knows_harq_params = true;
  Motion motion;
};

struct AttackParams {
  // false sync injection
  int slss_id = 0;
  // resource blocking
  double claim_fraction = 0.75;
  int claim_start_subchannel = 0;
  int pool_discovery_slots = 100;
  // PC5
  int flood_per_slot = 1;
  int replay_delay_slots = 50;
  int reaction_slots = 1;
};

struct AttackPlan {
  AttackKind kind = AttackKind::L2Tracking;
  NodeId node;
  SlotWindow active{0, 0};
  AttackerCapability capability;
  AttackParams params;

  /// Throws std::invalid_argument naming the offending parameter.
  void validate(const ResourcePool& pool) const;
};

struct AttackAction {
  Slot slot = 0;
  std::string frame;
  double tx_power_dbm = 0.0;
  std::string outcome;
  /// Simulation-side bookkeeping of the TB a HARQ spoof answered; never used
  /// by the attack logic itself.
  std::optional<std::uint64_t> tb_id;
  NodeId tb_sender;
};

struct Observation {
  Slot slot = 0;
  L2Id id;
  double rsrp_dbm = 0.0;
};

/// An attacker UE. It only sees what the medium delivers to it and only acts
/// through the transmissions it returns.
class Attacker {
 public:
  Attacker(AttackPlan plan, ResourcePool pool, FeedbackConfig feedback, int ssb_period_slots, std::uint64_t seed);

  NodeId node() const { return plan_.node; }
  const AttackPlan& plan() const { return plan_; }
  bool active(Slot s) const { return plan_.active.contains(s); }

  /// Transmissions originated at `now` (their slot is >= now).
  std::vector<Transmission> on_slot(Slot now, int direct_frame_number, int slot_in_frame);
  /// Reactions to a delivered transmission (their slot is > now).
  std::vector<Transmission> on_receive(const Transmission& tx, const Reception& rx, Slot now);

  const std::vector<AttackAction>& actions() const { return actions_; }
  const std::vector<Observation>& observations() const { return observations_; }

 private:
  Transmission base(Slot slot, PhyChannel ch) const;
  Slot react_slot(Slot nominal, Slot now);
  std::vector<Transmission> forge_pc5(const Pc5Pdu& pdu, Slot at, const std::string& label);

  AttackPlan plan_;
  ResourcePool pool_;
  FeedbackConfig feedback_;
  int ssb_period_;
  std::mt19937_64 rng_;
  crypto::SecureRandom secure_;

  // sync
  std::optional<SlssIdentity> heard_slss_;
  std::optional<int> heard_phase_;
  unsigned heard_tag_bits_ = 0;
  // blocking
  std::optional<Slot> first_sci_heard_;
  // PC5
  std::optional<L2Id> flood_target_;
  struct Captured {
    Slot due = 0;
    DataPayload payload;
    std::string label;
  };
  std::vector<Captured> replays_;

  std::vector<AttackAction> actions_;
  std::vector<Observation> observations_;
};

// ---------------------------------------------------------------------------
// Passive Layer-2 tracker
// ---------------------------------------------------------------------------

struct TrackerConfig {
  Slot linkage_window_slots = 50;
  double rsrp_similarity_db = 3.0;
  /// New ids within this distance above a vanished id count as predictable.
  std::uint32_t weak_delta_max = 4;
  /// Ignore power and predictability: pair uniformly among temporal
  /// candidates. Used for the chance baseline.
  bool random_pairing = false;
  std::uint64_t seed = 1;
};

/// Hypothesis: observed id -> cluster label.
using Linkage = std::map<std::uint32_t, int>;

/// Links each newly appearing id to one that vanished at most Δ slots earlier,
/// preferring id+small-delta matches, then the closest mean RSRP within the
/// similarity bound. Ties are broken uniformly with the tracker's own seed;
/// every old id is linked at most once.
Linkage run_tracker(const std::vector<Observation>& obs, const TrackerConfig& cfg);

struct LinkageScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// B-cubed precision/recall over the observed ids. `truth` maps every
/// observed id to the UE that owned it.
LinkageScore score_linkage(const Linkage& hypothesis, const std::map<std::uint32_t, NodeId>& truth);

struct ChanceBaseline {
  double mean = 0.0;
  double stddev = 0.0;
  int trials = 0;
};

/// F1 distribution of random pairing under the same temporal constraints.
ChanceBaseline chance_baseline(const std::vector<Observation>& obs, const std::map<std::uint32_t, NodeId>& truth,
                               TrackerConfig cfg, int trials);

}  // namespace sidelink
