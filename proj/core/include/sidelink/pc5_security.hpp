#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "sidelink/crypto.hpp"
#include "sidelink/frames.hpp"
#include "sidelink/types.hpp"

namespace sidelink {

// ---------------------------------------------------------------------------
// Security policy
// ---------------------------------------------------------------------------

enum class Requirement : std::uint8_t { Required = 0, Preferred = 1, NotNeeded = 2 };

std::string_view to_string(Requirement r);
std::optional<Requirement> requirement_from_string(std::string_view s);

struct SecurityPolicy {
  Requirement ciphering = Requirement::Preferred;
  Requirement integrity = Requirement::Preferred;
  bool allow_null_cipher = false;
  bool authentication_mandatory = false;
  friend bool operator==(const SecurityPolicy&, const SecurityPolicy&) = default;
};

struct Negotiation {
  enum class Kind { Protected, Unprotected, Mismatch };
  Kind kind = Kind::Mismatch;
  bool ciphering = false;  // meaningful when Protected; integrity is always on then
};

std::string_view to_string(Negotiation::Kind k);

/// Per-dimension outcome of two requirements; nullopt = mismatch.
///   REQUIRED  x NOT_NEEDED           -> mismatch
///   REQUIRED  x REQUIRED|PREFERRED   -> on
///   PREFERRED x PREFERRED            -> on, off when both allow null ciphers
///   NOT_NEEDED x NOT_NEEDED|PREFERRED -> off
std::optional<bool> combine_requirement(Requirement a, Requirement b, bool both_allow_null);

/// Symmetric in its arguments. A protected link always has integrity; the
/// ciphering flag says whether payloads are also encrypted.
Negotiation negotiate_policy(const SecurityPolicy& a, const SecurityPolicy& b);

// ---------------------------------------------------------------------------
// Message fields
// ---------------------------------------------------------------------------

enum class RejectCause : std::uint8_t {
  Unspecified = 0,
  PolicyMismatch = 1,
  AuthenticationFailed = 2,
  IntegrityFailure = 3,
  NotAuthorized = 4,
  IdentifierConflict = 5,
};

/// Message-specific record carried in a PC5-S PDU body. Absent fields are not
/// serialized; a 16-bit presence mask leads the encoding.
struct Pc5Fields {
  std::optional<crypto::Nonce128> nonce;
  std::optional<SecurityPolicy> policy;
  std::optional<std::uint8_t> session_byte;
  std::optional<RejectCause> cause;
  std::optional<L2Id> new_l2_id;
  std::optional<std::uint32_t> proof;
  std::optional<Slot> timestamp;
  std::optional<std::uint32_t> k_nrp_id;
  friend bool operator==(const Pc5Fields&, const Pc5Fields&) = default;
};

std::vector<std::uint8_t> encode_fields(const Pc5Fields& f);
/// Throws FrameError on truncated or malformed input.
Pc5Fields decode_fields(const std::vector<std::uint8_t>& bytes);

// ---------------------------------------------------------------------------
// Key hierarchy
// ---------------------------------------------------------------------------

class KeyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KeyHierarchy {
  std::optional<crypto::Key256> k_nrp;
  std::uint32_t k_nrp_id = 0;
  std::optional<crypto::Key256> k_nrp_sess;
  std::uint16_t k_nrp_sess_id = 0;
  crypto::Key128 nrpek{};
  crypto::Key128 nrpik{};
  crypto::Nonce128 nonce_self{};
  crypto::Nonce128 nonce_peer{};
};

inline constexpr std::string_view kDefaultAlgorithmLabel = "nr-pc5-hmac-sha256";

/// K_NRP-sess = PRF(K_NRP, nonce_a || nonce_b); NRPEK and NRPIK are PRF(K_NRP-sess,
/// label || purpose) truncated to 128 bits. The session id joins the
/// initiator's byte (high) and the responder's byte (low). Throws KeyError when
/// K_NRP is missing.
KeyHierarchy derive_session(const KeyHierarchy& kh, const crypto::Nonce128& nonce_initiator,
                            const crypto::Nonce128& nonce_responder, std::uint8_t initiator_byte,
                            std::uint8_t responder_byte, std::string_view algorithm_label = kDefaultAlgorithmLabel);

/// K_NRP shared by two holders of the same long-term credential.
crypto::Key256 derive_k_nrp(const crypto::Key256& long_term);

/// Authentication proof bound to both nonces and the prover's role.
std::uint32_t auth_proof(const crypto::Key256& long_term, const crypto::Nonce128& initiator_nonce,
                         const crypto::Nonce128& challenge, bool from_initiator);

// ---------------------------------------------------------------------------
// PDU protection
// ---------------------------------------------------------------------------

struct SecurityContext {
  KeyHierarchy keys;
  bool ciphering = false;
  std::uint32_t tx_count = 0;
  std::optional<std::uint32_t> rx_last;
};

/// Sets counter, ciphers the body when negotiated and attaches the 32-bit tag
/// PRF(NRPIK, header || counter || body). Advances tx_count.
Pc5Pdu protect_pdu(SecurityContext& ctx, Pc5Pdu pdu);

struct Unprotected {
  enum class Status { Ok, TagMismatch, Replay, MissingTag };
  Status status = Status::Ok;
  std::vector<std::uint8_t> body;  // plaintext when Ok
};

std::string_view to_string(Unprotected::Status s);

/// Verifies the tag, then the replay window, then deciphers. Only an Ok
/// result advances rx_last.
Unprotected unprotect_pdu(SecurityContext& ctx, const Pc5Pdu& pdu);

}  // namespace sidelink
