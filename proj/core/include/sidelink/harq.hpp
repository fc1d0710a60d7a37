#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "sidelink/frames.hpp"
#include "sidelink/types.hpp"

namespace sidelink {

inline constexpr int kHarqProcessCount = 16;
inline constexpr std::array<std::uint8_t, 4> kRvCycle{0, 2, 3, 1};

struct FeedbackConfig {
  int delay_slots = 2;   // TB slot -> expected PSFCH slot
  int window_slots = 0;  // accepted lateness, 0 = exact slot

  void validate() const;
};

enum class FeedbackKind { Ack, Nack };

std::string_view to_string(FeedbackKind k);

struct Feedback {
  FeedbackKind kind = FeedbackKind::Ack;
  std::uint8_t harq_process = 0;
  L2Id claimed_source;
  Slot slot = 0;
  double rsrp_dbm = 0.0;
};

/// Receiver side. Feedback only goes out when the TB is addressed to us and
/// SCI 2-A enables it; it is due at tb_slot + delay.
std::optional<Feedback> on_tb_received(const Sci2A& sci, Slot tb_slot, bool crc_ok, bool addressed, L2Id self,
                                       const FeedbackConfig& cfg);

struct Arbitration {
  std::optional<Feedback> chosen;
  std::size_t discarded = 0;  // outside [expected, expected + window]
};

/// Keeps in-window candidates and picks the strongest; ties go to the
/// earliest slot, then ACK.
Arbitration arbitrate_feedback(const std::vector<Feedback>& candidates, Slot expected_slot,
                               const FeedbackConfig& cfg);

enum class HarqState { Idle, AwaitingFeedback, Done, Failed };

std::string_view to_string(HarqState s);

struct HarqTb {
  std::uint64_t tb_id = 0;
  L2Id destination;
  std::uint32_t bytes = 0;
};

struct HarqAction {
  enum class Kind { Complete, Retransmit, Fail, Ignored };
  Kind kind = Kind::Ignored;
  std::uint8_t rv = 0;
};

/// One stop-and-wait process. `attempts` counts transmissions of the current
/// TB, so it never exceeds max_retransmissions + 1.
class HarqProcess {
 public:
  explicit HarqProcess(std::uint8_t id = 0, int max_retransmissions = 3);

  /// Starts a new TB: toggles NDI, resets RV. Throws std::logic_error while a
  /// TB is still awaiting feedback.
  void start(HarqTb tb);

  /// Applies the arbitrated feedback; nullopt means nothing was chosen, which
  /// counts as NACK.
  HarqAction on_feedback(const std::optional<Feedback>& fb);

  std::uint8_t id() const { return id_; }
  bool ndi() const { return ndi_; }
  std::uint8_t rv() const { return kRvCycle[rv_index_]; }
  int attempts() const { return attempts_; }
  int max_retransmissions() const { return max_retx_; }
  HarqState state() const { return state_; }
  const HarqTb& tb() const { return tb_; }
  bool busy() const { return state_ == HarqState::AwaitingFeedback; }

 private:
  std::uint8_t id_;
  int max_retx_;
  bool ndi_ = false;
  std::size_t rv_index_ = 0;
  int attempts_ = 0;
  HarqState state_ = HarqState::Idle;
  HarqTb tb_;
};

/// Transmitter-side set of 16 processes with per-process feedback windows.
class HarqEntity {
 public:
  HarqEntity(FeedbackConfig cfg, int max_retransmissions);

  /// Claims the lowest free process for `tb` sent at `tb_slot`. nullopt when
  /// all 16 are busy.
  std::optional<std::uint8_t> begin(HarqTb tb, Slot tb_slot);

  /// Records a retransmission sent at `slot` for a process told to retransmit.
  void retransmitted(std::uint8_t process, Slot slot);

  /// Buffers feedback heard on our PSFCH resources.
  void on_feedback(const Feedback& fb);

  struct Outcome {
    std::uint8_t process = 0;
    HarqAction action;
    HarqTb tb;
    int attempts = 0;
    std::optional<Feedback> chosen;
  };

  /// Closes every window ending at or before `now` and applies arbitration.
  std::vector<Outcome> close_windows(Slot now);

  const HarqProcess& process(std::uint8_t id) const { return procs_.at(id); }
  const FeedbackConfig& config() const { return cfg_; }
  std::optional<Slot> expected_slot(std::uint8_t id) const { return expected_.at(id); }

  std::size_t discarded_out_of_window = 0;
  std::size_t unknown_process = 0;

 private:
  FeedbackConfig cfg_;
  std::array<HarqProcess, kHarqProcessCount> procs_;
  std::array<std::optional<Slot>, kHarqProcessCount> expected_{};
  std::array<std::vector<Feedback>, kHarqProcessCount> heard_;
  std::array<bool, kHarqProcessCount> used_{};
};

}  // namespace sidelink
