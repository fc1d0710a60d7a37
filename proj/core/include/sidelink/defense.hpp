#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>
#include <string>
#include <utility>

#include "sidelink/crypto.hpp"
#include "sidelink/frames.hpp"
#include "sidelink/harq.hpp"
#include "sidelink/pc5_security.hpp"

namespace sidelink {

struct DefenseConfig {
  struct SignedSsb {
    bool enabled = false;
    unsigned tag_bits = 32;
  } signed_ssb;
  struct HarqAnomaly {
    bool enabled = false;
    double power_tolerance_db = 3.0;
    bool strict_window = true;
    int min_history = 3;
    double ewma_alpha = 0.2;
    /// Once trained, the profile follows the in-window sample closest to it,
    /// flagged or not, as long as that sample is within this band.
    double track_band_db = 6.0;
  } harq_anomaly;
  struct ReplayGuard {
    bool enabled = false;
    int timestamp_skew_slots = 10;
    /// Pre-security terminating messages wait this long for a conflicting,
    /// verified continuation before they take effect.
    int hold_slots = 5;
  } replay_guard;
  bool policy_enforcer = false;
  struct PrivacyRandomizer {
    bool enabled = false;
    int timer_ms = 500;
  } privacy_randomizer;
  bool incident_log = false;

  /// Throws std::invalid_argument (e.g. tag_bits outside {16, 32}).
  void validate() const;
};

// ---------------------------------------------------------------------------
// Signed S-SSB
// ---------------------------------------------------------------------------

std::uint32_t ssb_tag(const SsbFrame& f, const crypto::Key256& key, unsigned tag_bits);
SsbFrame sign_ssb(SsbFrame f, const crypto::Key256& key, unsigned tag_bits);
bool verify_ssb(const SsbFrame& f, const crypto::Key256& key, unsigned tag_bits);

// ---------------------------------------------------------------------------
// HARQ feedback anomaly check
// ---------------------------------------------------------------------------

struct Verdict {
  bool accept = true;
  std::string reason;
};

/// Per expected feedback source, learns the received power of accepted
/// feedback (plain mean over the first min_history samples, then EWMA) and
/// flags feedback that strays beyond the tolerance or, with strict_window,
/// arrives off the expected slot.
class HarqAnomalyDetector {
 public:
  explicit HarqAnomalyDetector(DefenseConfig::HarqAnomaly cfg) : cfg_(cfg) {}

  Verdict check(L2Id expected_source, const Feedback& fb, Slot expected_slot, int window_slots) const;
  void learn(L2Id expected_source, double rsrp_dbm);
  /// Remembers a feedback power heard for `key` in the current window.
  void observe(L2Id key, double rsrp_dbm);
  /// Closes the window for `key`. While training, learns `chosen`; afterwards
  /// learns the observed sample nearest the profile if it lies in the band.
  void settle(L2Id key, std::optional<double> chosen);

  std::optional<double> profile_mean(L2Id source) const;
  int samples(L2Id source) const;

 private:
  struct Profile {
    double mean = 0.0;
    int n = 0;
    std::vector<double> pending;
  };
  DefenseConfig::HarqAnomaly cfg_;
  std::map<L2Id, Profile> profiles_;
};

// ---------------------------------------------------------------------------
// Replay guard
// ---------------------------------------------------------------------------

/// Freshness checks for pre-security PC5-S messages: timestamp within skew,
/// (source, nonce) never seen before, and no second Establishment Request
/// for a link that is still alive.
class ReplayGuard {
 public:
  explicit ReplayGuard(DefenseConfig::ReplayGuard cfg) : cfg_(cfg) {}

  Verdict check(const Pc5Pdu& pdu, const Pc5Fields& fields, Slot now, bool live_link_with_source);
  const DefenseConfig::ReplayGuard& config() const { return cfg_; }

 private:
  DefenseConfig::ReplayGuard cfg_;
  std::set<std::pair<std::uint32_t, crypto::Nonce128>> seen_;
};

// ---------------------------------------------------------------------------
// Policy enforcer
// ---------------------------------------------------------------------------

/// Disables null ciphers, makes authentication mandatory and upgrades
/// NOT_NEEDED to REQUIRED. Idempotent.
SecurityPolicy enforce_policy(SecurityPolicy p);

}  // namespace sidelink
