#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "sidelink/adversary.hpp"
#include "sidelink/event_log.hpp"
#include "sidelink/metrics.hpp"
#include "sidelink/resources.hpp"
#include "sidelink/scenario.hpp"
#include "sidelink/sync.hpp"

namespace sidelink {

/// One Mode-2 reselection, with everything an independent oracle needs to
/// recompute the candidate set.
struct SelectionRecord {
  NodeId node;
  Slot now = 0;
  std::vector<ReceivedSci> history;
  SlotWindow window;
  Demand demand;
  Selection selection;
};

using SelectionObserver = std::function<void(const SelectionRecord&)>;

struct RunResult {
  MetricsReport metrics;
  EventLog log;
  Slot end_slot = 0;

  // Ground truth and internals, for tests and reports.
  std::vector<Observation> observations;       // merged over tracking attackers
  std::map<std::uint32_t, NodeId> l2_owner;    // every Layer-2 id ever used on air
  std::vector<std::uint32_t> l2_assigned;      // ids in assignment order
  std::map<NodeId, SyncState> final_sync;
  std::vector<AttackAction> attack_actions;
};

class Simulation {
 public:
  explicit Simulation(Scenario scenario);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  void set_selection_observer(SelectionObserver obs);
  /// Runs to completion. A Simulation runs once.
  RunResult run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Convenience wrapper; `seed` overrides the scenario seed.
RunResult run_scenario(const Scenario& s, std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace sidelink
