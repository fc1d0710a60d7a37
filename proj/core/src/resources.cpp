#include "sidelink/resources.hpp"

#include <algorithm>
#include <string>

namespace sidelink {

std::vector<std::pair<SubchannelRange, Slot>> Reservation::occurrences(const ResourcePool& pool) const {
  std::vector<std::pair<SubchannelRange, Slot>> out;
  const Slot period = pool.rri_slots(rri_ms);
  const int repeats = period > 0 ? pool.miss_refresh_limit : 0;
  const SubchannelRange initial{frequency.start_initial, frequency.length};
  const SubchannelRange retx{frequency.start_retx, frequency.length};
  for (int k = 0; k <= repeats; ++k) {
    const Slot base = start_slot + k * period;
    out.emplace_back(initial, base);
    if (time.first_gap > 0) out.emplace_back(retx, base + time.first_gap);
    if (time.second_gap > 0) out.emplace_back(retx, base + time.second_gap);
  }
  return out;
}

void OccupancyMap::add(const Reservation& r, const ResourcePool& pool, SlotWindow horizon) {
  for (const auto& [range, slot] : r.occurrences(pool)) {
    if (!horizon.contains(slot)) continue;
    for (int sc = range.start; sc < range.start + range.length; ++sc) cells_[Cell{sc, slot}].push_back(r);
  }
}

bool OccupancyMap::occupied(int subchannel, Slot slot) const { return cells_.count(Cell{subchannel, slot}) != 0; }

const std::vector<Reservation>* OccupancyMap::at(int subchannel, Slot slot) const {
  const auto it = cells_.find(Cell{subchannel, slot});
  return it == cells_.end() ? nullptr : &it->second;
}

Reservation reservation_from_sci(const Sci1A& sci, const ResourcePool& pool, Slot slot, double rsrp,
                                 NodeId emitter) {
  Reservation r;
  r.source = emitter;
  r.frequency = decode_frequency_allocation(sci.frequency_resource_assignment, pool);
  r.time = decode_time_allocation(sci.time_resource_assignment, pool);
  r.start_slot = slot;
  r.rri_ms = pool.period_list_ms.at(sci.resource_reservation_period);
  r.priority = sci.priority;
  r.observed_rsrp_dbm = rsrp;
  const Slot period = pool.rri_slots(r.rri_ms);
  const int last_gap = std::max(r.time.first_gap, r.time.second_gap);
  r.expiry_slot = slot + last_gap + (period > 0 ? pool.miss_refresh_limit * period : 0);
  return r;
}

OccupancyMap sense(const std::vector<ReceivedSci>& received, const ResourcePool& pool, SlotWindow horizon,
                   std::optional<double> exclusion_threshold_dbm) {
  const double threshold = exclusion_threshold_dbm.value_or(pool.rsrp_exclusion_threshold_dbm);
  const Slot oldest = horizon.begin - pool.sensing_window_slots;
  OccupancyMap occ;
  for (const auto& rx : received) {
    if (rx.slot < oldest) continue;
    if (rx.rsrp_dbm < threshold) continue;
    try {
      const auto sci = decode_sci1a(rx.bits, pool);
      occ.add(reservation_from_sci(sci, pool, rx.slot, rx.rsrp_dbm, rx.emitter), pool, horizon);
    } catch (const FrameError&) {
      ++occ.skipped;
    }
  }
  return occ;
}

std::vector<Cell> candidate_set(const ResourcePool& pool, const OccupancyMap& occ, SlotWindow window,
                                Demand demand) {
  if (demand.subchannels < 1 || demand.subchannels > pool.num_subchannels) {
    throw ResourceError("demand of " + std::to_string(demand.subchannels) + " subchannels cannot fit a " +
                        std::to_string(pool.num_subchannels) + "-subchannel pool");
  }
  std::vector<Cell> out;
  for (Slot s = window.begin; s < window.end; ++s) {
    for (int start = 0; start + demand.subchannels <= pool.num_subchannels; ++start) {
      bool free = true;
      for (int sc = start; sc < start + demand.subchannels && free; ++sc) free = !occ.occupied(sc, s);
      if (free) out.push_back(Cell{start, s});
    }
  }
  return out;
}

Selection select_resources(const ResourcePool& pool, const std::vector<ReceivedSci>& received,
                           SlotWindow window, Demand demand, std::mt19937_64& rng) {
  if (window.length() <= 0) throw ResourceError("empty selection window");
  Selection sel;
  sel.total = static_cast<std::size_t>((pool.num_subchannels - demand.subchannels + 1) * window.length());
  double threshold = pool.rsrp_exclusion_threshold_dbm;
  std::vector<Cell> cands;
  // Every raise drops at least the weakest remaining reservation once the
  // threshold passes it, so the loop ends; the cap guards degenerate configs.
  constexpr int kMaxRaises = 200;
  for (;;) {
    const auto occ = sense(received, pool, window, threshold);
    cands = candidate_set(pool, occ, window, demand);
    const double ratio = static_cast<double>(cands.size()) / static_cast<double>(sel.total);
    if (ratio >= pool.min_candidate_ratio || occ.empty() || sel.threshold_raises >= kMaxRaises) break;
    threshold += pool.threshold_step_db;
    ++sel.threshold_raises;
  }
  if (cands.empty()) throw ResourceError("no candidate resources in selection window");
  std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
  const Cell chosen = cands[pick(rng)];
  sel.subchannels = SubchannelRange{chosen.subchannel, demand.subchannels};
  sel.slot = chosen.slot;
  sel.candidates = cands.size();
  sel.exclusion_threshold_dbm = threshold;
  return sel;
}

Sci1A announce(const Selection& selection, int rri_ms, std::uint8_t priority, const ResourcePool& pool,
               TimeAllocation retx) {
  if (!pool.has_period(rri_ms)) {
    throw ResourceError("RRI " + std::to_string(rri_ms) + " ms is not in the pool period list");
  }
  if (priority > 7) throw ResourceError("priority must fit in 3 bits");
  Sci1A sci;
  sci.priority = priority;
  FrequencyAllocation fa{selection.subchannels.length, selection.subchannels.start, selection.subchannels.start};
  sci.frequency_resource_assignment = encode_frequency_allocation(fa, pool);
  sci.time_resource_assignment = encode_time_allocation(retx, pool);
  sci.resource_reservation_period = static_cast<std::uint32_t>(pool.period_index(rri_ms));
  return sci;
}

Selection GnodebScheduler::grant(const GrantRequest& request) {
  if (!registered(request.ue)) throw ResourceError("UE " + to_string(request.ue) + " is not registered");
  const int len = request.demand.subchannels;
  if (len < 1 || len > pool_.num_subchannels) throw ResourceError("demand does not fit the pool");
  for (Slot s = request.window.begin; s < request.window.end; ++s) {
    for (int start = 0; start + len <= pool_.num_subchannels; ++start) {
      bool free = true;
      for (int sc = start; sc < start + len && free; ++sc) free = !granted_.count(Cell{sc, s});
      if (!free) continue;
      for (int sc = start; sc < start + len; ++sc) granted_.insert(Cell{sc, s});
      Selection sel;
      sel.subchannels = SubchannelRange{start, len};
      sel.slot = s;
      sel.total = static_cast<std::size_t>((pool_.num_subchannels - len + 1) * request.window.length());
      return sel;
    }
  }
  throw ResourceError("resource pool exhausted");
}

SpsEntity::SpsEntity(ResourcePool pool, int rri_ms, Demand demand)
    : pool_(std::move(pool)), rri_ms_(rri_ms), demand_(demand) {
  pool_.validate();
  if (!pool_.has_period(rri_ms_)) throw ResourceError("traffic RRI not in pool period list");
}

void SpsEntity::on_sci(const ReceivedSci& sci) { history_.push_back(sci); }

void SpsEntity::prune(Slot now) {
  while (!history_.empty() && history_.front().slot < now - pool_.sensing_window_slots) history_.pop_front();
}

SpsEntity::Grant SpsEntity::next_transmission(Slot now, std::mt19937_64& rng) {
  prune(now + 1);
  Grant g;
  const Slot period = pool_.rri_slots(rri_ms_);
  if (reservation_ && counter_ > 0 && period > 0) {
    const Slot earliest = now + 1;
    Slot slot = reservation_->slot;
    if (slot < earliest) slot += ((earliest - slot + period - 1) / period) * period;
    if (slot < earliest + pool_.slots_per_selection_window) {
      reservation_->slot = slot;
      g.selection = *reservation_;
      g.last_before_reselection = --counter_ == 0;
      return g;
    }
  }
  const std::vector<ReceivedSci> hist(history_.begin(), history_.end());
  const SlotWindow window{now + 1, now + 1 + pool_.slots_per_selection_window};
  reservation_ = select_resources(pool_, hist, window, demand_, rng);
  std::uniform_int_distribution<int> counter(pool_.reselection_min, pool_.reselection_max);
  counter_ = counter(rng);
  g.selection = *reservation_;
  g.reselected = true;
  g.last_before_reselection = --counter_ == 0;
  return g;
}

}  // namespace sidelink
