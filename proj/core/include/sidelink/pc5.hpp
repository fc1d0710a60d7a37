#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sidelink/crypto.hpp"
#include "sidelink/defense.hpp"
#include "sidelink/frames.hpp"
#include "sidelink/pc5_security.hpp"
#include "sidelink/types.hpp"

namespace sidelink {

enum class LinkPhase { Idle, RequestSent, Authenticating, SecurityMode, Established, Rekeying, Released };

std::string_view to_string(LinkPhase p);

enum class SecurityEventKind {
  Discard,
  Replay,
  Mismatch,
  Reject,
  IdentifierUpdate,
  Ignored,
  Unknown,
  Established,
  Released,
  Aborted,
  Timeout,
  DuplicateSession,
  GuardReject,
  Held,
  Conflict,
  Rekeyed,
};

std::string_view to_string(SecurityEventKind k);

struct SecurityEvent {
  SecurityEventKind kind = SecurityEventKind::Discard;
  Pc5MessageKind message = Pc5MessageKind::EstablishmentRequest;
  L2Id peer;
  std::string reason;
};

struct Pc5Config {
  SecurityPolicy policy;
  /// Static authorization: whether this UE answers establishment requests.
  bool authorized = true;
  /// Provisioned long-term credential; without it a UE cannot authenticate
  /// or derive K_NRP.
  std::optional<crypto::Key256> long_term;
  int keepalive_slots = 2000;
  int max_missed_keepalives = 2;
  int establishment_timeout_slots = 100;
  int max_links = 16;
};

struct LinkState {
  struct Held {
    Pc5Pdu pdu;
    Pc5Fields fields;
    Slot until = 0;
  };

  LinkPhase phase = LinkPhase::Idle;
  L2Id peer;
  bool initiator = false;
  SecurityPolicy peer_policy;
  Negotiation negotiation;
  std::optional<SecurityContext> context;
  bool security_mode_completed = false;
  bool authenticated = false;
  crypto::Nonce128 nonce_self{};
  crypto::Nonce128 nonce_peer{};
  crypto::Nonce128 challenge{};
  crypto::Nonce128 rekey_nonce{};
  std::uint8_t session_byte = 0;
  std::uint8_t peer_session_byte = 0;
  Slot created_slot = 0;
  std::optional<Slot> established_slot;
  Slot last_keepalive_sent = 0;
  bool keepalive_outstanding = false;
  int missed_keepalives = 0;
  bool release_pending = false;
  bool id_update_pending = false;
  std::optional<L2Id> pending_peer_id;
  std::vector<Held> held;

  bool live() const { return phase != LinkPhase::Idle && phase != LinkPhase::Released; }
  bool half_open() const {
    return phase == LinkPhase::RequestSent || phase == LinkPhase::Authenticating || phase == LinkPhase::SecurityMode;
  }
};

struct Pc5Output {
  std::vector<Pc5Pdu> outbound;
  std::vector<SecurityEvent> events;

  void append(Pc5Output other);
};

/// PC5-S endpoint of one UE: every link it holds, keyed by the peer's current
/// Layer-2 id.
class Pc5Entity {
 public:
  Pc5Entity(Pc5Config cfg, L2Id self, std::uint64_t seed,
            std::optional<DefenseConfig::ReplayGuard> guard = std::nullopt);

  Pc5Output initiate(L2Id peer, Slot now);
  Pc5Output receive(const Pc5Pdu& pdu, Slot now);
  /// Hold expiry, establishment timeouts and keepalives.
  Pc5Output tick(Slot now);
  Pc5Output release(L2Id peer, Slot now);
  Pc5Output rekey(L2Id peer, Slot now);
  Pc5Output modify(L2Id peer, Slot now);
  /// Switches to `new_id`, first running the Identifier Update exchange on
  /// every established link. Without links the switch is immediate.
  Pc5Output update_identifier(L2Id new_id, Slot now);

  L2Id self() const { return self_; }
  std::optional<L2Id> pending_identifier() const { return pending_self_; }
  const Pc5Config& config() const { return cfg_; }
  const std::map<L2Id, LinkState>& links() const { return links_; }
  const LinkState* link(L2Id peer) const;
  std::size_t established_count() const;

 private:
  Pc5Output handle(LinkState* link, const Pc5Pdu& pdu, const Pc5Fields& fields, Slot now);
  Pc5Output on_establishment_request(const Pc5Pdu& pdu, const Pc5Fields& f, Slot now);
  Pc5Output start_security_mode(LinkState& link, Slot now);
  Pc5Output abort(LinkState& link, const Pc5Pdu& pdu, SecurityEventKind kind, std::string reason);
  void clear_held(LinkState& link, Pc5Output& out, Pc5MessageKind by);

  Pc5Pdu make(LinkState& link, Pc5MessageKind kind, Pc5Fields fields);
  Pc5Fields stamped(Slot now) const;
  void maybe_switch_identity();

  Pc5Config cfg_;
  L2Id self_;
  std::optional<L2Id> pending_self_;
  crypto::SecureRandom rng_;
  std::optional<ReplayGuard> guard_;
  std::map<L2Id, LinkState> links_;
};

// ---------------------------------------------------------------------------
// Layer-2 identifier privacy
// ---------------------------------------------------------------------------

enum class IdRefreshMode { Static, Weak, Secure };

std::string_view to_string(IdRefreshMode m);
std::optional<IdRefreshMode> id_refresh_mode_from_string(std::string_view s);

class L2Identity {
 public:
  struct Span {
    L2Id id;
    Slot from = 0;
    std::optional<Slot> to;
  };

  /// `first_refresh` lets callers stagger timers; the period applies after it.
  L2Identity(L2Id initial, Slot start, IdRefreshMode mode, Slot period_slots, Slot first_refresh);

  L2Id current() const { return history_.back().id; }
  const std::vector<Span>& history() const { return history_; }
  std::optional<Slot> next_refresh_slot() const;
  bool due(Slot now) const;

  /// Draws the next id (id + 1 in weak mode, fresh randomness otherwise),
  /// skipping anything in `taken` or in this UE's own history.
  L2Id refresh(Slot now, crypto::SecureRandom& rng, const std::set<std::uint32_t>& taken);

 private:
  IdRefreshMode mode_;
  Slot period_;
  Slot next_;
  std::vector<Span> history_;
};

}  // namespace sidelink
