#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "sidelink/frames.hpp"
#include "sidelink/radio.hpp"
#include "sidelink/resource_pool.hpp"
#include "sidelink/types.hpp"

namespace sidelink {

class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Cell {
  int subchannel = 0;
  Slot slot = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Half-open slot interval [begin, end).
struct SlotWindow {
  Slot begin = 0;
  Slot end = 0;
  bool contains(Slot s) const { return s >= begin && s < end; }
  Slot length() const { return end - begin; }
};

/// An SCI 1-A as received: raw bits plus measurement context.
struct ReceivedSci {
  BitString bits;
  double rsrp_dbm = 0.0;
  Slot slot = 0;
  NodeId emitter;
};

/// One decoded SCI 1-A announcement.
struct Reservation {
  NodeId source;
  FrequencyAllocation frequency;
  TimeAllocation time;
  Slot start_slot = 0;
  int rri_ms = 0;
  std::uint8_t priority = 0;
  double observed_rsrp_dbm = 0.0;
  Slot expiry_slot = 0;  // last slot the announcement is believed to cover

  /// Every (subchannel range, slot) the announcement claims, repeating each
  /// RRI for `miss_refresh_limit` further periods.
  std::vector<std::pair<SubchannelRange, Slot>> occurrences(const ResourcePool& pool) const;
};

class OccupancyMap {
 public:
  void add(const Reservation& r, const ResourcePool& pool, SlotWindow horizon);

  bool occupied(int subchannel, Slot slot) const;
  const std::vector<Reservation>* at(int subchannel, Slot slot) const;
  std::size_t cell_count() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }
  const std::map<Cell, std::vector<Reservation>>& cells() const { return cells_; }

  std::size_t skipped = 0;  // undecodable SCIs

 private:
  std::map<Cell, std::vector<Reservation>> cells_;
};

Reservation reservation_from_sci(const Sci1A& sci, const ResourcePool& pool, Slot slot, double rsrp,
                                 NodeId emitter);

/// Projects every decodable SCI heard within the sensing window before
/// `horizon.begin` whose RSRP reaches the exclusion threshold onto `horizon`.
OccupancyMap sense(const std::vector<ReceivedSci>& received, const ResourcePool& pool, SlotWindow horizon,
                   std::optional<double> exclusion_threshold_dbm = std::nullopt);

struct Demand {
  int subchannels = 1;
};

/// Positions (start subchannel, slot) where `demand` fits without touching an
/// occupied cell.
std::vector<Cell> candidate_set(const ResourcePool& pool, const OccupancyMap& occ, SlotWindow window,
                                Demand demand);

struct Selection {
  SubchannelRange subchannels;
  Slot slot = 0;
  std::size_t candidates = 0;
  std::size_t total = 0;
  double exclusion_threshold_dbm = 0.0;
  int threshold_raises = 0;

  double candidate_ratio() const { return total ? static_cast<double>(candidates) / static_cast<double>(total) : 0.0; }
};

/// Sensing-based selection: while the candidate ratio stays below the pool's
/// minimum, the exclusion threshold is raised by threshold_step_db and the
/// history re-sensed. The chosen position is uniform over the final set.
Selection select_resources(const ResourcePool& pool, const std::vector<ReceivedSci>& received,
                           SlotWindow window, Demand demand, std::mt19937_64& rng);

/// SCI 1-A announcing `selection` with the given RRI and priority.
Sci1A announce(const Selection& selection, int rri_ms, std::uint8_t priority, const ResourcePool& pool,
               TimeAllocation retx = {});

// ---------------------------------------------------------------------------
// Mode 1
// ---------------------------------------------------------------------------

struct GrantRequest {
  NodeId ue;
  Demand demand;
  SlotWindow window;
};

/// Minimal gNodeB scheduler: first-fit over an authoritative grid.
class GnodebScheduler {
 public:
  explicit GnodebScheduler(ResourcePool pool) : pool_(std::move(pool)) {}

  void register_ue(NodeId ue) { registered_.insert(ue); }
  bool registered(NodeId ue) const { return registered_.count(ue) != 0; }

  /// Throws ResourceError for unregistered UEs or when nothing fits.
  Selection grant(const GrantRequest& request);

 private:
  ResourcePool pool_;
  std::set<NodeId> registered_;
  std::set<Cell> granted_;
};

// ---------------------------------------------------------------------------
// Semi-persistent scheduling state for one UE
// ---------------------------------------------------------------------------

class SpsEntity {
 public:
  SpsEntity(ResourcePool pool, int rri_ms, Demand demand);

  void on_sci(const ReceivedSci& sci);

  struct Grant {
    Selection selection;
    bool reselected = false;
    bool last_before_reselection = false;
  };

  /// Resource for a TB generated at `now`. Reselects when no reservation is
  /// held or the reselection counter is exhausted.
  Grant next_transmission(Slot now, std::mt19937_64& rng);

  const std::deque<ReceivedSci>& history() const { return history_; }
  int rri_ms() const { return rri_ms_; }

 private:
  void prune(Slot now);

  ResourcePool pool_;
  int rri_ms_;
  Demand demand_;
  std::deque<ReceivedSci> history_;
  std::optional<Selection> reservation_;
  int counter_ = 0;
};

}  // namespace sidelink
