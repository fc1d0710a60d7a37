#include "sidelink/resource_pool.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sidelink {

Slot ResourcePool::rri_slots(int rri_ms) const {
  return static_cast<Slot>(std::llround(rri_ms / slot_duration_ms));
}

bool ResourcePool::has_period(int rri_ms) const {
  return std::find(period_list_ms.begin(), period_list_ms.end(), rri_ms) != period_list_ms.end();
}

int ResourcePool::period_index(int rri_ms) const {
  const auto it = std::find(period_list_ms.begin(), period_list_ms.end(), rri_ms);
  if (it == period_list_ms.end()) {
    throw std::invalid_argument("RRI " + std::to_string(rri_ms) + " ms is not in the pool period list");
  }
  return static_cast<int>(it - period_list_ms.begin());
}

void ResourcePool::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("resource pool: " + what); };
  if (num_subchannels < 1) fail("num_subchannels must be >= 1");
  if (slots_per_selection_window < 1) fail("slots_per_selection_window must be >= 1");
  if (period_list_ms.empty()) fail("period list must not be empty");
  if (!has_period(1000)) fail("period list must include 1000 ms");
  for (int p : period_list_ms) {
    if (p < 0 || p > 1000) fail("periods must lie in 0..1000 ms");
  }
  if (sl_max_num_per_reserve != 2 && sl_max_num_per_reserve != 3) fail("sl_max_num_per_reserve must be 2 or 3");
  if (sensing_window_slots < 1) fail("sensing_window_slots must be >= 1");
  if (min_candidate_ratio < 0.0 || min_candidate_ratio > 1.0) fail("min_candidate_ratio must lie in [0, 1]");
  if (threshold_step_db <= 0.0) fail("threshold_step_db must be positive");
  if (miss_refresh_limit < 1) fail("miss_refresh_limit must be >= 1");
  if (reselection_min < 1 || reselection_max < reselection_min) fail("reselection counter bounds invalid");
  if (dmrs_pattern_count < 1 || dmrs_pattern_count > 3) fail("dmrs_pattern_count must be 1..3");
  if (additional_mcs_tables < 0 || additional_mcs_tables > 2) fail("additional_mcs_tables must be 0..2");
  if (psfch_period != 0 && psfch_period != 1 && psfch_period != 2 && psfch_period != 4) {
    fail("psfch_period must be 0, 1, 2 or 4");
  }
  if (slot_duration_ms <= 0.0) fail("slot_duration_ms must be positive");
}

}  // namespace sidelink
