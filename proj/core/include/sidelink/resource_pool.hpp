#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sidelink/types.hpp"

namespace sidelink {

/// Mode-2 resource pool: a subchannel x slot grid plus the configuration that
/// shapes SCI 1-A field widths and the sensing procedure.
struct ResourcePool {
  int num_subchannels = 4;
  int slots_per_selection_window = 10;
  std::vector<int> period_list_ms{0, 100, 200, 500, 1000};
  int sl_max_num_per_reserve = 2;
  int sensing_window_slots = 1100;
  double rsrp_exclusion_threshold_dbm = -110.0;

  double min_candidate_ratio = 0.2;
  double threshold_step_db = 3.0;
  int miss_refresh_limit = 2;
  int reselection_min = 5;
  int reselection_max = 15;

  // SCI 1-A format knobs.
  int dmrs_pattern_count = 3;
  int additional_mcs_tables = 0;
  int psfch_period = 0;

  double slot_duration_ms = 1.0;

  int total_cells() const { return num_subchannels * slots_per_selection_window; }
  Slot rri_slots(int rri_ms) const;
  bool has_period(int rri_ms) const;
  int period_index(int rri_ms) const;

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

}  // namespace sidelink
