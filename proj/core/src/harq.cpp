#include "sidelink/harq.hpp"

#include <algorithm>

namespace sidelink {

void FeedbackConfig::validate() const {
  if (delay_slots < 1) throw std::invalid_argument("feedback delay must be >= 1 slot");
  if (window_slots < 0) throw std::invalid_argument("feedback window must be >= 0");
}

std::string_view to_string(FeedbackKind k) { return k == FeedbackKind::Ack ? "ACK" : "NACK"; }

std::string_view to_string(HarqState s) {
  switch (s) {
    case HarqState::Idle: return "idle";
    case HarqState::AwaitingFeedback: return "awaiting-feedback";
    case HarqState::Done: return "done";
    case HarqState::Failed: return "failed";
  }
  return "?";
}

std::optional<Feedback> on_tb_received(const Sci2A& sci, Slot tb_slot, bool crc_ok, bool addressed, L2Id self,
                                       const FeedbackConfig& cfg) {
  if (!addressed || !sci.harq_feedback_enabled) return std::nullopt;
  Feedback fb;
  fb.kind = crc_ok ? FeedbackKind::Ack : FeedbackKind::Nack;
  fb.harq_process = sci.harq_process;
  fb.claimed_source = self;
  fb.slot = tb_slot + cfg.delay_slots;
  return fb;
}

Arbitration arbitrate_feedback(const std::vector<Feedback>& candidates, Slot expected_slot,
                               const FeedbackConfig& cfg) {
  Arbitration out;
  for (const auto& fb : candidates) {
    if (fb.slot < expected_slot || fb.slot > expected_slot + cfg.window_slots) {
      ++out.discarded;
      continue;
    }
    if (!out.chosen) {
      out.chosen = fb;
      continue;
    }
    const auto& best = *out.chosen;
    bool better = fb.rsrp_dbm > best.rsrp_dbm;
    if (fb.rsrp_dbm == best.rsrp_dbm) {
      better = fb.slot < best.slot ||
               (fb.slot == best.slot && fb.kind == FeedbackKind::Ack && best.kind == FeedbackKind::Nack);
    }
    if (better) out.chosen = fb;
  }
  return out;
}

HarqProcess::HarqProcess(std::uint8_t id, int max_retransmissions) : id_(id), max_retx_(max_retransmissions) {
  if (id >= kHarqProcessCount) throw std::invalid_argument("HARQ process id must fit in 4 bits");
  if (max_retransmissions < 0) throw std::invalid_argument("max retransmissions must be >= 0");
}

void HarqProcess::start(HarqTb tb) {
  if (busy()) throw std::logic_error("HARQ process " + std::to_string(id_) + " is still awaiting feedback");
  tb_ = tb;
  ndi_ = !ndi_;
  rv_index_ = 0;
  attempts_ = 1;
  state_ = HarqState::AwaitingFeedback;
}

HarqAction HarqProcess::on_feedback(const std::optional<Feedback>& fb) {
  if (!busy()) return {HarqAction::Kind::Ignored, rv()};
  if (fb && fb->kind == FeedbackKind::Ack) {
    state_ = HarqState::Done;
    return {HarqAction::Kind::Complete, rv()};
  }
  if (attempts_ >= max_retx_ + 1) {
    state_ = HarqState::Failed;
    return {HarqAction::Kind::Fail, rv()};
  }
  ++attempts_;
  rv_index_ = (rv_index_ + 1) % kRvCycle.size();
  return {HarqAction::Kind::Retransmit, rv()};
}

HarqEntity::HarqEntity(FeedbackConfig cfg, int max_retransmissions) : cfg_(cfg) {
  cfg_.validate();
  for (int i = 0; i < kHarqProcessCount; ++i) procs_[i] = HarqProcess(static_cast<std::uint8_t>(i), max_retransmissions);
}

std::optional<std::uint8_t> HarqEntity::begin(HarqTb tb, Slot tb_slot) {
  for (auto& p : procs_) {
    if (p.busy()) continue;
    p.start(tb);
    used_[p.id()] = true;
    expected_[p.id()] = tb_slot + cfg_.delay_slots;
    heard_[p.id()].clear();
    return p.id();
  }
  return std::nullopt;
}

void HarqEntity::retransmitted(std::uint8_t process, Slot slot) {
  expected_.at(process) = slot + cfg_.delay_slots;
  heard_.at(process).clear();
}

void HarqEntity::on_feedback(const Feedback& fb) {
  const auto id = fb.harq_process;
  if (id >= kHarqProcessCount || !used_[id]) {
    ++unknown_process;
    return;
  }
  if (!expected_[id]) {
    ++discarded_out_of_window;
    return;
  }
  heard_[id].push_back(fb);
}

std::vector<HarqEntity::Outcome> HarqEntity::close_windows(Slot now) {
  std::vector<Outcome> out;
  for (auto& p : procs_) {
    auto& exp = expected_[p.id()];
    if (!exp || *exp + cfg_.window_slots > now) continue;
    auto arb = arbitrate_feedback(heard_[p.id()], *exp, cfg_);
    discarded_out_of_window += arb.discarded;
    heard_[p.id()].clear();
    exp.reset();
    Outcome o;
    o.process = p.id();
    o.action = p.on_feedback(arb.chosen);
    o.tb = p.tb();
    o.attempts = p.attempts();
    o.chosen = arb.chosen;
    out.push_back(o);
  }
  return out;
}

}  // namespace sidelink
