#include "sidelink/pc5_security.hpp"

#include <string>

namespace sidelink {

std::string_view to_string(Requirement r) {
  switch (r) {
    case Requirement::Required: return "REQUIRED";
    case Requirement::Preferred: return "PREFERRED";
    case Requirement::NotNeeded: return "NOT_NEEDED";
  }
  return "?";
}

std::optional<Requirement> requirement_from_string(std::string_view s) {
  if (s == "REQUIRED" || s == "required") return Requirement::Required;
  if (s == "PREFERRED" || s == "preferred") return Requirement::Preferred;
  if (s == "NOT_NEEDED" || s == "not_needed") return Requirement::NotNeeded;
  return std::nullopt;
}

std::string_view to_string(Negotiation::Kind k) {
  switch (k) {
    case Negotiation::Kind::Protected: return "protected";
    case Negotiation::Kind::Unprotected: return "unprotected";
    case Negotiation::Kind::Mismatch: return "mismatch";
  }
  return "?";
}

std::optional<bool> combine_requirement(Requirement a, Requirement b, bool both_allow_null) {
  using R = Requirement;
  if (a > b) std::swap(a, b);  // Required < Preferred < NotNeeded
  if (a == R::Required) {
    if (b == R::NotNeeded) return std::nullopt;
    return true;
  }
  if (a == R::Preferred && b == R::Preferred) return !both_allow_null;
  return false;
}

Negotiation negotiate_policy(const SecurityPolicy& a, const SecurityPolicy& b) {
  const bool null_ok = a.allow_null_cipher && b.allow_null_cipher;
  const auto cipher = combine_requirement(a.ciphering, b.ciphering, null_ok);
  const auto integrity = combine_requirement(a.integrity, b.integrity, null_ok);
  if (!cipher || !integrity) return {Negotiation::Kind::Mismatch, false};
  if (*cipher || *integrity) return {Negotiation::Kind::Protected, *cipher};
  return {Negotiation::Kind::Unprotected, false};
}

namespace {

enum FieldBit : std::uint16_t {
  kNonce = 1 << 0,
  kPolicy = 1 << 1,
  kSessionByte = 1 << 2,
  kCause = 1 << 3,
  kNewL2 = 1 << 4,
  kProof = 1 << 5,
  kTimestamp = 1 << 6,
  kKnrpId = 1 << 7,
};

void put_be(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& in) : in_(in) {}
  std::uint64_t get(int bytes) {
    if (pos_ + static_cast<std::size_t>(bytes) > in_.size()) throw FrameError("PC5 field record truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

std::uint8_t policy_byte(const SecurityPolicy& p) {
  return static_cast<std::uint8_t>((static_cast<unsigned>(p.ciphering) << 6) |
                                   (static_cast<unsigned>(p.integrity) << 4) | (p.allow_null_cipher ? 2 : 0) |
                                   (p.authentication_mandatory ? 1 : 0));
}

Requirement requirement_bits(unsigned v) {
  if (v > 2) throw FrameError("invalid security requirement code " + std::to_string(v));
  return static_cast<Requirement>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_fields(const Pc5Fields& f) {
  std::uint16_t mask = 0;
  if (f.nonce) mask |= kNonce;
  if (f.policy) mask |= kPolicy;
  if (f.session_byte) mask |= kSessionByte;
  if (f.cause) mask |= kCause;
  if (f.new_l2_id) mask |= kNewL2;
  if (f.proof) mask |= kProof;
  if (f.timestamp) mask |= kTimestamp;
  if (f.k_nrp_id) mask |= kKnrpId;
  std::vector<std::uint8_t> out;
  put_be(out, mask, 2);
  if (f.nonce) out.insert(out.end(), f.nonce->begin(), f.nonce->end());
  if (f.policy) out.push_back(policy_byte(*f.policy));
  if (f.session_byte) out.push_back(*f.session_byte);
  if (f.cause) out.push_back(static_cast<std::uint8_t>(*f.cause));
  if (f.new_l2_id) {
    if (f.new_l2_id->value > kL2IdMask) throw FrameError("Layer-2 id exceeds 24 bits");
    put_be(out, f.new_l2_id->value, 3);
  }
  if (f.proof) put_be(out, *f.proof, 4);
  if (f.timestamp) put_be(out, static_cast<std::uint64_t>(*f.timestamp), 8);
  if (f.k_nrp_id) put_be(out, *f.k_nrp_id, 4);
  return out;
}

Pc5Fields decode_fields(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  const auto mask = static_cast<std::uint16_t>(r.get(2));
  if (mask & ~0xFFu) throw FrameError("unknown PC5 field bits set");
  Pc5Fields f;
  if (mask & kNonce) {
    crypto::Nonce128 n{};
    for (auto& b : n) b = static_cast<std::uint8_t>(r.get(1));
    f.nonce = n;
  }
  if (mask & kPolicy) {
    const auto b = static_cast<unsigned>(r.get(1));
    if (b & 0x0C) throw FrameError("reserved policy bits set");
    f.policy = SecurityPolicy{requirement_bits(b >> 6), requirement_bits((b >> 4) & 3), (b & 2) != 0, (b & 1) != 0};
  }
  if (mask & kSessionByte) f.session_byte = static_cast<std::uint8_t>(r.get(1));
  if (mask & kCause) {
    const auto c = r.get(1);
    if (c > static_cast<unsigned>(RejectCause::IdentifierConflict)) throw FrameError("unknown reject cause");
    f.cause = static_cast<RejectCause>(c);
  }
  if (mask & kNewL2) f.new_l2_id = L2Id{static_cast<std::uint32_t>(r.get(3))};
  if (mask & kProof) f.proof = static_cast<std::uint32_t>(r.get(4));
  if (mask & kTimestamp) f.timestamp = static_cast<Slot>(r.get(8));
  if (mask & kKnrpId) f.k_nrp_id = static_cast<std::uint32_t>(r.get(4));
  if (r.remaining() != 0) throw FrameError("trailing bytes after PC5 field record");
  return f;
}

KeyHierarchy derive_session(const KeyHierarchy& kh, const crypto::Nonce128& nonce_initiator,
                            const crypto::Nonce128& nonce_responder, std::uint8_t initiator_byte,
                            std::uint8_t responder_byte, std::string_view algorithm_label) {
  if (!kh.k_nrp) throw KeyError("K_NRP is not available");
  KeyHierarchy out = kh;
  out.k_nrp_sess = crypto::prf(*kh.k_nrp, crypto::concat({nonce_initiator, nonce_responder}));
  out.k_nrp_sess_id = static_cast<std::uint16_t>((initiator_byte << 8) | responder_byte);
  const auto enc = crypto::concat({crypto::as_bytes(algorithm_label), crypto::as_bytes("/enc")});
  const auto integ = crypto::concat({crypto::as_bytes(algorithm_label), crypto::as_bytes("/int")});
  out.nrpek = crypto::truncate<16>(crypto::prf(*out.k_nrp_sess, enc));
  out.nrpik = crypto::truncate<16>(crypto::prf(*out.k_nrp_sess, integ));
  return out;
}

crypto::Key256 derive_k_nrp(const crypto::Key256& long_term) { return crypto::prf(long_term, crypto::as_bytes("K_NRP")); }

std::uint32_t auth_proof(const crypto::Key256& long_term, const crypto::Nonce128& initiator_nonce,
                         const crypto::Nonce128& challenge, bool from_initiator) {
  const auto role = crypto::as_bytes(from_initiator ? "auth/initiator" : "auth/responder");
  return crypto::prf_tag(long_term, crypto::concat({role, initiator_nonce, challenge}), 32);
}

namespace {

std::vector<std::uint8_t> tag_input(const Pc5Pdu& pdu) {
  auto data = pc5_header_bytes(pdu);
  put_be(data, pdu.counter, 4);
  data.push_back(pdu.ciphered ? 1 : 0);
  data.insert(data.end(), pdu.body.begin(), pdu.body.end());
  return data;
}

std::uint64_t keystream_iv(const Pc5Pdu& pdu) {
  return (static_cast<std::uint64_t>(pdu.source.value) << 32) | pdu.counter;
}

}  // namespace

Pc5Pdu protect_pdu(SecurityContext& ctx, Pc5Pdu pdu) {
  pdu.counter = ctx.tx_count++;
  pdu.ciphered = ctx.ciphering;
  if (pdu.ciphered) crypto::apply_keystream(ctx.keys.nrpek, keystream_iv(pdu), pdu.body);
  pdu.auth_tag = crypto::prf_tag(ctx.keys.nrpik, tag_input(pdu), kAuthTagBits);
  return pdu;
}

std::string_view to_string(Unprotected::Status s) {
  switch (s) {
    case Unprotected::Status::Ok: return "ok";
    case Unprotected::Status::TagMismatch: return "tag-mismatch";
    case Unprotected::Status::Replay: return "replay";
    case Unprotected::Status::MissingTag: return "missing-tag";
  }
  return "?";
}

Unprotected unprotect_pdu(SecurityContext& ctx, const Pc5Pdu& pdu) {
  Unprotected out;
  if (!pdu.auth_tag) {
    out.status = Unprotected::Status::MissingTag;
    return out;
  }
  if (crypto::prf_tag(ctx.keys.nrpik, tag_input(pdu), kAuthTagBits) != *pdu.auth_tag) {
    out.status = Unprotected::Status::TagMismatch;
    return out;
  }
  if (ctx.rx_last && pdu.counter <= *ctx.rx_last) {
    out.status = Unprotected::Status::Replay;
    return out;
  }
  ctx.rx_last = pdu.counter;
  out.body = pdu.body;
  if (pdu.ciphered) crypto::apply_keystream(ctx.keys.nrpek, keystream_iv(pdu), out.body);
  return out;
}

}  // namespace sidelink
