#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sidelink/adversary.hpp"
#include "sidelink/defense.hpp"
#include "sidelink/harq.hpp"
#include "sidelink/pc5.hpp"
#include "sidelink/pc5_security.hpp"
#include "sidelink/radio.hpp"
#include "sidelink/resource_pool.hpp"
#include "sidelink/sync.hpp"

namespace sidelink {

/// Load or validation failure. `line` is 1-based, 0 when unknown.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string source, int line, const std::string& what);

  const std::string& source() const { return source_; }
  int line() const { return line_; }

 private:
  std::string source_;
  int line_;
};

enum class UeRole { Legit, GnodeB, GnssVisible };

std::string_view to_string(UeRole r);

struct UeSpec {
  NodeId id;
  Motion motion;
  UeRole role = UeRole::Legit;
  double tx_power_dbm = 23.0;
  std::optional<SecurityPolicy> policy;  // falls back to the scenario default
  bool authorized = true;
  bool credential = true;
  bool mode1 = false;
  std::optional<std::uint32_t> l2_id;
  int line = 0;
};

struct TrafficFlow {
  NodeId source;
  std::optional<NodeId> destination;  // nullopt = broadcast
  int period_ms = 100;
  std::uint32_t size_bytes = 300;
  Slot start_slot = 0;
  std::optional<Slot> stop_slot;
  int subchannels = 1;
  bool harq_feedback = true;
  std::uint8_t priority = 0;
  int line = 0;
};

struct AttackSpec {
  AttackPlan plan;
  int line = 0;
};

struct LinkPlan {
  NodeId initiator;
  NodeId responder;
  Slot start_slot = 0;
  std::optional<Slot> release_slot;
  std::optional<Slot> rekey_slot;
  int line = 0;
};

enum class TimerAlignment { Aligned, Staggered };

struct IdentityConfig {
  IdRefreshMode mode = IdRefreshMode::Static;
  int timer_ms = 500;
  TimerAlignment alignment = TimerAlignment::Staggered;
};

struct Pc5Settings {
  SecurityPolicy default_policy;
  int keepalive_ms = 2000;
  int max_missed_keepalives = 2;
  int establishment_timeout_slots = 100;
  int processing_slots = 2;
};

struct HarqSettings {
  FeedbackConfig feedback;
  int max_retransmissions = 3;
};

struct SyncSettings {
  bool enabled = true;
  SyncConfig config;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  Slot duration_slots = 1000;
  Slot bucket_slots = 100;
  ChannelModel channel;
  /// Probability that a surviving PSSCH reception still fails its CRC.
  double bler = 0.0;
  ResourcePool pool;
  SyncSettings sync;
  HarqSettings harq;
  Pc5Settings pc5;
  IdentityConfig identity;
  std::vector<UeSpec> ues;
  std::vector<TrafficFlow> traffic;
  std::vector<LinkPlan> links;
  std::vector<AttackSpec> attacks;
  DefenseConfig defenses;

  const UeSpec* ue(NodeId id) const;
  bool is_attacker(NodeId id) const;
  /// Throws ScenarioError naming the first violated invariant.
  void validate(const std::string& source = "<scenario>") const;
};

/// Parses YAML text. Unknown keys, wrong types and violated invariants raise
/// ScenarioError with the offending line.
Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>");
Scenario load_scenario(const std::string& path);

}  // namespace sidelink
