#include "sidelink/defense.hpp"

#include <cmath>
#include <stdexcept>

namespace sidelink {

void DefenseConfig::validate() const {
  if (signed_ssb.tag_bits != 16 && signed_ssb.tag_bits != 32) {
    throw std::invalid_argument("signed_ssb.tag_bits must be 16 or 32, got " + std::to_string(signed_ssb.tag_bits));
  }
  if (harq_anomaly.power_tolerance_db <= 0.0) throw std::invalid_argument("power tolerance must be positive");
  if (harq_anomaly.min_history < 1) throw std::invalid_argument("anomaly min_history must be >= 1");
  if (harq_anomaly.ewma_alpha <= 0.0 || harq_anomaly.ewma_alpha > 1.0) {
    throw std::invalid_argument("anomaly ewma_alpha must lie in (0, 1]");
  }
  if (harq_anomaly.track_band_db < 0.0) throw std::invalid_argument("anomaly track_band_db must be >= 0");
  if (replay_guard.timestamp_skew_slots < 0 || replay_guard.hold_slots < 0) {
    throw std::invalid_argument("replay guard windows must be >= 0");
  }
  if (privacy_randomizer.timer_ms < 1) throw std::invalid_argument("privacy timer must be >= 1 ms");
}

std::uint32_t ssb_tag(const SsbFrame& f, const crypto::Key256& key, unsigned tag_bits) {
  const auto portion = ssb_signed_portion(f);
  return crypto::prf_tag(key, portion.bytes(), tag_bits);
}

SsbFrame sign_ssb(SsbFrame f, const crypto::Key256& key, unsigned tag_bits) {
  f.tag_bits = tag_bits;
  f.tag = ssb_tag(f, key, tag_bits);
  return f;
}

bool verify_ssb(const SsbFrame& f, const crypto::Key256& key, unsigned tag_bits) {
  if (!f.tag || f.tag_bits != tag_bits) return false;
  return *f.tag == ssb_tag(f, key, tag_bits);
}

Verdict HarqAnomalyDetector::check(L2Id expected_source, const Feedback& fb, Slot expected_slot,
                                   int window_slots) const {
  if (cfg_.strict_window && (fb.slot < expected_slot || fb.slot > expected_slot + window_slots)) {
    return {false, "outside feedback window"};
  }
  const auto it = profiles_.find(expected_source);
  if (it == profiles_.end() || it->second.n < cfg_.min_history) return {true, "learning"};
  const double dev = fb.rsrp_dbm - it->second.mean;
  if (std::abs(dev) > cfg_.power_tolerance_db) {
    return {false, "power deviates " + std::to_string(dev) + " dB from profile"};
  }
  return {};
}

void HarqAnomalyDetector::learn(L2Id expected_source, double rsrp_dbm) {
  auto& p = profiles_[expected_source];
  ++p.n;
  if (p.n <= cfg_.min_history) {
    p.mean += (rsrp_dbm - p.mean) / p.n;
  } else {
    p.mean += cfg_.ewma_alpha * (rsrp_dbm - p.mean);
  }
}

void HarqAnomalyDetector::observe(L2Id key, double rsrp_dbm) { profiles_[key].pending.push_back(rsrp_dbm); }

void HarqAnomalyDetector::settle(L2Id key, std::optional<double> chosen) {
  auto& p = profiles_[key];
  auto pending = std::move(p.pending);
  p.pending.clear();
  if (p.n < cfg_.min_history) {
    if (chosen) learn(key, *chosen);
    return;
  }
  const double* best = nullptr;
  for (const double& v : pending) {
    if (!best || std::abs(v - p.mean) < std::abs(*best - p.mean)) best = &v;
  }
  if (best && std::abs(*best - p.mean) <= cfg_.track_band_db) learn(key, *best);
}

std::optional<double> HarqAnomalyDetector::profile_mean(L2Id source) const {
  const auto it = profiles_.find(source);
  if (it == profiles_.end()) return std::nullopt;
  return it->second.mean;
}

int HarqAnomalyDetector::samples(L2Id source) const {
  const auto it = profiles_.find(source);
  return it == profiles_.end() ? 0 : it->second.n;
}

Verdict ReplayGuard::check(const Pc5Pdu& pdu, const Pc5Fields& fields, Slot now, bool live_link_with_source) {
  if (!fields.timestamp) return {false, "missing timestamp"};
  if (std::llabs(now - *fields.timestamp) > cfg_.timestamp_skew_slots) return {false, "stale timestamp"};
  if (pdu.kind == Pc5MessageKind::EstablishmentRequest && live_link_with_source) {
    return {false, "conflicting establishment request for a live link"};
  }
  if (fields.nonce) {
    if (!seen_.emplace(pdu.source.value, *fields.nonce).second) return {false, "replayed nonce"};
  }
  return {};
}

SecurityPolicy enforce_policy(SecurityPolicy p) {
  p.allow_null_cipher = false;
  p.authentication_mandatory = true;
  if (p.ciphering == Requirement::NotNeeded) p.ciphering = Requirement::Required;
  if (p.integrity == Requirement::NotNeeded) p.integrity = Requirement::Required;
  return p;
}

}  // namespace sidelink
