#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "sidelink/bits.hpp"
#include "sidelink/types.hpp"

namespace sidelink {

class SchedulingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Time
// ---------------------------------------------------------------------------

struct SimClock {
  Slot current = 0;
  double slot_duration_ms = 1.0;
  int slots_per_frame = 10;

  /// Direct frame number, wrapping at 1024 like MIB-SL.directFrameNumber.
  int direct_frame_number() const { return static_cast<int>((current / slots_per_frame) % 1024); }
  int slot_in_frame() const { return static_cast<int>(current % slots_per_frame); }
  double now_ms() const { return static_cast<double>(current) * slot_duration_ms; }
  Slot slots_for_ms(double ms) const;

  void advance_to(Slot slot);
};

// ---------------------------------------------------------------------------
// Geometry and propagation
// ---------------------------------------------------------------------------

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

double distance(Vec2 a, Vec2 b);

/// Static position or constant-velocity linear motion.
struct Motion {
  Vec2 origin;
  Vec2 velocity_mps;

  Vec2 position_at(double time_ms) const;
};

struct ChannelModel {
  double reference_loss_db = 40.0;  // loss at 1 m
  double path_loss_exponent = 2.0;
  double noise_floor_dbm = -110.0;
  double shadowing_sigma_db = 0.0;
  /// Distance over which per-link shadowing decorrelates. 0 draws independent
  /// shadowing for every transmission.
  double shadowing_decorrelation_m = 25.0;
  double capture_threshold_db = 3.0;

  void validate() const;
};

/// Log-distance path loss: tx - ref - 10 * n * log10(d). Throws
/// std::invalid_argument for d <= 0.
double rsrp_at(double tx_power_dbm, double distance_m, const ChannelModel& model);

// ---------------------------------------------------------------------------
// Transmissions
// ---------------------------------------------------------------------------

enum class PhyChannel { Psbch, Pscch, Pssch, Psfch };

std::string_view to_string(PhyChannel c);

struct SubchannelRange {
  int start = 0;
  int length = 1;

  bool overlaps(const SubchannelRange& o) const {
    return start < o.start + o.length && o.start < start + length;
  }
  friend bool operator==(const SubchannelRange&, const SubchannelRange&) = default;
};

/// S-SSB on the PSBCH.
struct SsbPayload {
  BitString bits;
};

/// SCI 1-A on the PSCCH.
struct SciPayload {
  BitString sci1a;
};

/// PSSCH: SCI 2-A, the plaintext MAC header Layer-2 ids and the transport
/// block. PC5-S signalling rides inside the transport block.
struct DataPayload {
  BitString sci2a;
  L2Id mac_source;
  L2Id mac_destination;
  std::uint64_t tb_id = 0;
  std::uint32_t tb_bytes = 0;
  std::optional<BitString> pc5;
};

/// One PSFCH feedback bit plus the implicit resource mapping (process and the
/// pair of Layer-2 ids it answers for).
struct FeedbackPayload {
  bool ack = false;
  std::uint8_t harq_process = 0;
  L2Id claimed_source;  // the receiver the feedback claims to come from
  L2Id destination;     // the TB transmitter
};

using Payload = std::variant<SsbPayload, SciPayload, DataPayload, FeedbackPayload>;

struct Transmission {
  NodeId sender;
  double tx_power_dbm = 23.0;
  Slot slot = 0;
  PhyChannel channel = PhyChannel::Psbch;
  Payload payload;
  std::optional<SubchannelRange> subchannels;

  std::size_t payload_bits() const;
  /// Throws std::invalid_argument when channel and payload kind disagree.
  void validate() const;
};

struct Reception {
  NodeId receiver;
  double rsrp_dbm = 0.0;
};

// ---------------------------------------------------------------------------
// Medium
// ---------------------------------------------------------------------------

/// Owns node motion, per-link shadowing state and the per-slot transmission
/// buffer. Collisions follow the capture rule: on PSCCH/PSSCH a reception
/// survives only if it exceeds every overlapping same-slot signal at that
/// receiver by at least the capture threshold.
class RadioMedium {
 public:
  RadioMedium(ChannelModel model, double slot_duration_ms, std::uint64_t seed);

  void add_node(NodeId id, Motion motion);
  bool has_node(NodeId id) const { return nodes_.count(id) != 0; }
  Vec2 position(NodeId id, Slot slot) const;
  const ChannelModel& model() const { return model_; }

  /// Every node other than the sender whose received power clears the noise
  /// floor, ordered by node id.
  std::vector<Reception> deliver(const Transmission& t);

  /// Mean received power between two nodes at a slot (no shadowing).
  double mean_rsrp(NodeId from, NodeId to, double tx_power_dbm, Slot slot) const;

  void transmit(Transmission t);

  struct Delivery {
    std::size_t tx_index = 0;
    Reception rx;
  };
  struct SlotOutcome {
    std::vector<Transmission> transmissions;
    std::vector<Delivery> deliveries;  // surviving receptions only
    /// Pairs of distinct senders whose PSCCH/PSSCH overlapped in this slot.
    std::vector<std::pair<NodeId, NodeId>> collisions;
    std::size_t destroyed = 0;
  };

  /// Resolves everything transmitted in `slot` and clears the buffer.
  SlotOutcome resolve(Slot slot);

  const std::vector<NodeId>& node_ids() const { return order_; }

 private:
  struct LinkShadow {
    double value = 0.0;
    Vec2 pos_a;
    Vec2 pos_b;
    bool initialised = false;
    std::mt19937_64 rng;
  };

  double shadowing(NodeId a, NodeId b, Slot slot);

  ChannelModel model_;
  double slot_duration_ms_;
  std::uint64_t seed_;
  std::map<NodeId, Motion> nodes_;
  std::vector<NodeId> order_;
  std::map<std::pair<NodeId, NodeId>, LinkShadow> shadows_;
  std::vector<Transmission> pending_;
};

// ---------------------------------------------------------------------------
// Event queue
// ---------------------------------------------------------------------------

/// Discrete-event queue ordered by (slot, insertion sequence). Events at the
/// same slot run in insertion order.
class EventQueue {
 public:
  using Action = std::function<void()>;

  explicit EventQueue(std::uint64_t seed = 0) : rng_(seed) {}

  Slot current_slot() const { return current_; }
  std::size_t pending() const { return heap_.size(); }

  /// Throws SchedulingError when `slot` lies before the current slot.
  void schedule(Slot slot, Action action, std::string label = {});

  /// Processes every event with slot <= `slot` and advances the clock to it.
  std::size_t run_until(Slot slot);

  /// Labels of processed events as "slot:seq:label", when tracing is on.
  void enable_trace(bool on) { trace_enabled_ = on; }
  const std::vector<std::string>& trace() const { return trace_; }

  std::mt19937_64& rng() { return rng_; }

 private:
  struct Entry {
    Slot slot;
    std::uint64_t seq;
    std::string label;
    Action action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.slot != b.slot ? a.slot > b.slot : a.seq > b.seq;
    }
  };

  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  Slot current_ = 0;
  std::uint64_t next_seq_ = 0;
  bool trace_enabled_ = false;
  std::vector<std::string> trace_;
  std::mt19937_64 rng_;
};

}  // namespace sidelink
