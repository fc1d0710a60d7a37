#include "sidelink/pc5.hpp"

#include <algorithm>
#include <stdexcept>

namespace sidelink {

std::string_view to_string(LinkPhase p) {
  switch (p) {
    case LinkPhase::Idle: return "idle";
    case LinkPhase::RequestSent: return "request-sent";
    case LinkPhase::Authenticating: return "authenticating";
    case LinkPhase::SecurityMode: return "security-mode";
    case LinkPhase::Established: return "established";
    case LinkPhase::Rekeying: return "rekeying";
    case LinkPhase::Released: return "released";
  }
  return "?";
}

std::string_view to_string(SecurityEventKind k) {
  switch (k) {
    case SecurityEventKind::Discard: return "discard";
    case SecurityEventKind::Replay: return "replay";
    case SecurityEventKind::Mismatch: return "mismatch";
    case SecurityEventKind::Reject: return "reject";
    case SecurityEventKind::IdentifierUpdate: return "identifier-update";
    case SecurityEventKind::Ignored: return "ignored";
    case SecurityEventKind::Unknown: return "unknown";
    case SecurityEventKind::Established: return "established";
    case SecurityEventKind::Released: return "released";
    case SecurityEventKind::Aborted: return "aborted";
    case SecurityEventKind::Timeout: return "timeout";
    case SecurityEventKind::DuplicateSession: return "duplicate-session";
    case SecurityEventKind::GuardReject: return "guard-reject";
    case SecurityEventKind::Held: return "held";
    case SecurityEventKind::Conflict: return "conflict";
    case SecurityEventKind::Rekeyed: return "rekeyed";
  }
  return "?";
}

void Pc5Output::append(Pc5Output other) {
  outbound.insert(outbound.end(), std::make_move_iterator(other.outbound.begin()),
                  std::make_move_iterator(other.outbound.end()));
  events.insert(events.end(), std::make_move_iterator(other.events.begin()),
                std::make_move_iterator(other.events.end()));
}

namespace {

bool terminating(Pc5MessageKind k) {
  return k == Pc5MessageKind::EstablishmentReject || k == Pc5MessageKind::AuthenticationReject ||
         k == Pc5MessageKind::AuthenticationFailure || k == Pc5MessageKind::SecurityModeReject;
}

// Encrypts only when both the link and the message kind call for it.
Pc5Pdu seal(SecurityContext& ctx, Pc5Pdu pdu, bool cipher_kind) {
  const bool saved = ctx.ciphering;
  ctx.ciphering = saved && cipher_kind;
  pdu = protect_pdu(ctx, std::move(pdu));
  ctx.ciphering = saved;
  return pdu;
}

}  // namespace

Pc5Entity::Pc5Entity(Pc5Config cfg, L2Id self, std::uint64_t seed, std::optional<DefenseConfig::ReplayGuard> guard)
    : cfg_(std::move(cfg)), self_(self), rng_(seed, "pc5") {
  if (self.value > kL2IdMask) throw std::invalid_argument("Layer-2 id exceeds 24 bits");
  if (guard) guard_.emplace(*guard);
}

const LinkState* Pc5Entity::link(L2Id peer) const {
  const auto it = links_.find(peer);
  return it == links_.end() ? nullptr : &it->second;
}

std::size_t Pc5Entity::established_count() const {
  return static_cast<std::size_t>(std::count_if(links_.begin(), links_.end(), [](const auto& kv) {
    return kv.second.phase == LinkPhase::Established || kv.second.phase == LinkPhase::Rekeying;
  }));
}

Pc5Fields Pc5Entity::stamped(Slot now) const {
  Pc5Fields f;
  f.timestamp = now;
  return f;
}

Pc5Pdu Pc5Entity::make(LinkState& link, Pc5MessageKind kind, Pc5Fields fields) {
  Pc5Pdu pdu;
  pdu.kind = kind;
  pdu.source = self_;
  pdu.destination = link.peer;
  pdu.body = encode_fields(fields);
  const auto profile = protection_profile(kind);
  if (profile.integrity && link.context) pdu = seal(*link.context, std::move(pdu), profile.ciphering);
  return pdu;
}

Pc5Output Pc5Entity::abort(LinkState& link, const Pc5Pdu& pdu, SecurityEventKind kind, std::string reason) {
  link.phase = LinkPhase::Released;
  link.held.clear();
  Pc5Output out;
  out.events.push_back({kind, pdu.kind, link.peer, std::move(reason)});
  return out;
}

void Pc5Entity::clear_held(LinkState& link, Pc5Output& out, Pc5MessageKind by) {
  for (const auto& h : link.held) {
    out.events.push_back({SecurityEventKind::Conflict, h.pdu.kind, link.peer,
                          "dropped: conflicts with verified " + std::string(to_string(by))});
  }
  link.held.clear();
}

Pc5Output Pc5Entity::initiate(L2Id peer, Slot now) {
  Pc5Output out;
  if (auto it = links_.find(peer); it != links_.end() && it->second.live()) return out;
  LinkState l;
  l.peer = peer;
  l.initiator = true;
  l.phase = LinkPhase::RequestSent;
  l.created_slot = now;
  rng_.fill(l.nonce_self);
  l.session_byte = static_cast<std::uint8_t>(rng_.next_u32());
  auto& link = links_[peer] = l;
  auto f = stamped(now);
  f.nonce = link.nonce_self;
  f.policy = cfg_.policy;
  f.session_byte = link.session_byte;
  out.outbound.push_back(make(link, Pc5MessageKind::EstablishmentRequest, f));
  return out;
}

Pc5Output Pc5Entity::receive(const Pc5Pdu& pdu, Slot now) {
  Pc5Output out;
  if (pdu.destination != self_) return out;
  const auto profile = protection_profile(pdu.kind);
  auto it = links_.find(pdu.source);
  LinkState* link = it == links_.end() ? nullptr : &it->second;

  std::vector<std::uint8_t> body = pdu.body;
  if (link && link->live() && link->context && profile.integrity &&
      pdu.kind != Pc5MessageKind::SecurityModeCommand) {
    const auto res = unprotect_pdu(*link->context, pdu);
    if (res.status != Unprotected::Status::Ok) {
      const auto kind =
          res.status == Unprotected::Status::Replay ? SecurityEventKind::Replay : SecurityEventKind::Discard;
      out.events.push_back({kind, pdu.kind, pdu.source, std::string(to_string(res.status))});
      return out;
    }
    body = res.body;
  } else if (profile.stage == SecurityStage::AfterSecurity && (!link || !link->live())) {
    out.events.push_back({SecurityEventKind::Discard, pdu.kind, pdu.source, "no link with sender"});
    return out;
  }

  Pc5Fields fields;
  try {
    fields = decode_fields(body);
  } catch (const FrameError& e) {
    out.events.push_back({SecurityEventKind::Discard, pdu.kind, pdu.source, std::string("malformed: ") + e.what()});
    return out;
  }

  if (guard_ && !profile.integrity) {
    const auto v = guard_->check(pdu, fields, now, link && link->live());
    if (!v.accept) {
      out.events.push_back({SecurityEventKind::GuardReject, pdu.kind, pdu.source, v.reason});
      return out;
    }
  }
  if (guard_ && terminating(pdu.kind) && link && link->half_open()) {
    link->held.push_back({pdu, fields, now + guard_->config().hold_slots});
    out.events.push_back({SecurityEventKind::Held, pdu.kind, pdu.source, "awaiting conflicting continuation"});
    return out;
  }
  return handle(link, pdu, fields, now);
}

Pc5Output Pc5Entity::on_establishment_request(const Pc5Pdu& pdu, const Pc5Fields& f, Slot now) {
  Pc5Output out;
  const L2Id src = pdu.source;
  if (!cfg_.authorized) {
    out.events.push_back({SecurityEventKind::Ignored, pdu.kind, src, "not authorized for this service"});
    return out;
  }
  if (!f.nonce || !f.policy || !f.session_byte) {
    out.events.push_back({SecurityEventKind::Discard, pdu.kind, src, "request lacks nonce or policy"});
    return out;
  }
  if (auto it = links_.find(src); it != links_.end() && it->second.live()) {
    out.events.push_back({SecurityEventKind::DuplicateSession, pdu.kind, src,
                          "new request replaces link in phase " + std::string(to_string(it->second.phase))});
    links_.erase(it);
  }
  auto live = [&] {
    return static_cast<int>(std::count_if(links_.begin(), links_.end(), [](const auto& kv) { return kv.second.live(); }));
  };
  if (live() >= cfg_.max_links && guard_) {
    auto oldest = links_.end();
    for (auto it = links_.begin(); it != links_.end(); ++it) {
      const auto& l = it->second;
      if (!l.half_open() || l.created_slot + guard_->config().hold_slots > now) continue;
      if (oldest == links_.end() || l.created_slot < oldest->second.created_slot) oldest = it;
    }
    if (oldest != links_.end()) {
      out.events.push_back({SecurityEventKind::GuardReject, pdu.kind, oldest->first, "evicted stale half-open link"});
      links_.erase(oldest);
    }
  }
  if (live() >= cfg_.max_links) {
    out.events.push_back({SecurityEventKind::Ignored, pdu.kind, src, "link capacity exhausted"});
    return out;
  }

  LinkState l;
  l.peer = src;
  l.initiator = false;
  l.phase = LinkPhase::RequestSent;
  l.created_slot = now;
  l.peer_policy = *f.policy;
  l.nonce_peer = *f.nonce;
  l.peer_session_byte = *f.session_byte;
  l.negotiation = negotiate_policy(cfg_.policy, l.peer_policy);
  auto& link = links_[src] = l;

  switch (link.negotiation.kind) {
    case Negotiation::Kind::Mismatch: {
      auto rf = stamped(now);
      rf.cause = RejectCause::PolicyMismatch;
      out.outbound.push_back(make(link, Pc5MessageKind::EstablishmentReject, rf));
      link.phase = LinkPhase::Released;
      out.events.push_back({SecurityEventKind::Mismatch, pdu.kind, src, "security policies incompatible"});
      return out;
    }
    case Negotiation::Kind::Unprotected: {
      link.phase = LinkPhase::Established;
      link.established_slot = now;
      link.last_keepalive_sent = now;
      auto af = stamped(now);
      af.policy = cfg_.policy;
      out.outbound.push_back(make(link, Pc5MessageKind::EstablishmentAccept, af));
      out.events.push_back({SecurityEventKind::Established, pdu.kind, src, "unprotected"});
      return out;
    }
    case Negotiation::Kind::Protected:
      break;
  }
  if (!cfg_.long_term) {
    auto rf = stamped(now);
    rf.cause = RejectCause::AuthenticationFailed;
    out.outbound.push_back(make(link, Pc5MessageKind::EstablishmentReject, rf));
    out.append(abort(link, pdu, SecurityEventKind::Reject, "no credential to secure the link"));
    return out;
  }
  if (cfg_.policy.authentication_mandatory || link.peer_policy.authentication_mandatory) {
    rng_.fill(link.challenge);
    auto af = stamped(now);
    af.nonce = link.challenge;
    af.proof = auth_proof(*cfg_.long_term, link.nonce_peer, link.challenge, false);
    link.phase = LinkPhase::Authenticating;
    out.outbound.push_back(make(link, Pc5MessageKind::AuthenticationRequest, af));
    return out;
  }
  out.append(start_security_mode(link, now));
  return out;
}

Pc5Output Pc5Entity::start_security_mode(LinkState& link, Slot now) {
  Pc5Output out;
  rng_.fill(link.nonce_self);
  link.session_byte = static_cast<std::uint8_t>(rng_.next_u32());
  KeyHierarchy kh;
  kh.k_nrp = derive_k_nrp(*cfg_.long_term);
  kh.k_nrp_id = rng_.next_u32();
  kh.nonce_self = link.nonce_self;
  kh.nonce_peer = link.nonce_peer;
  kh = derive_session(kh, link.nonce_peer, link.nonce_self, link.peer_session_byte, link.session_byte);
  link.context = SecurityContext{kh, link.negotiation.ciphering, 0, std::nullopt};
  link.phase = LinkPhase::SecurityMode;
  auto f = stamped(now);
  f.nonce = link.nonce_self;
  f.policy = cfg_.policy;
  f.session_byte = link.session_byte;
  f.k_nrp_id = kh.k_nrp_id;
  out.outbound.push_back(make(link, Pc5MessageKind::SecurityModeCommand, f));
  return out;
}

Pc5Output Pc5Entity::handle(LinkState* link, const Pc5Pdu& pdu, const Pc5Fields& f, Slot now) {
  using K = Pc5MessageKind;
  Pc5Output out;
  auto discard = [&](std::string reason) {
    out.events.push_back({SecurityEventKind::Discard, pdu.kind, pdu.source, std::move(reason)});
    return out;
  };

  if (pdu.kind == K::EstablishmentRequest) return on_establishment_request(pdu, f, now);
  if (!link) return discard("no link with sender");

  const bool established = link->phase == LinkPhase::Established || link->phase == LinkPhase::Rekeying;
  switch (pdu.kind) {
    case K::AuthenticationRequest: {
      if (!link->initiator || link->phase != LinkPhase::RequestSent || !f.nonce || !f.proof) {
        return discard("unexpected authentication request");
      }
      if (!cfg_.long_term || *f.proof != auth_proof(*cfg_.long_term, link->nonce_self, *f.nonce, false)) {
        if (guard_) return discard("responder proof invalid");
        auto rf = stamped(now);
        rf.cause = RejectCause::AuthenticationFailed;
        out.outbound.push_back(make(*link, K::AuthenticationFailure, rf));
        out.append(abort(*link, pdu, SecurityEventKind::Reject, "responder proof invalid"));
        return out;
      }
      link->challenge = *f.nonce;
      link->authenticated = true;
      link->phase = LinkPhase::Authenticating;
      clear_held(*link, out, pdu.kind);
      auto rf = stamped(now);
      rf.proof = auth_proof(*cfg_.long_term, link->nonce_self, link->challenge, true);
      out.outbound.push_back(make(*link, K::AuthenticationResponse, rf));
      return out;
    }
    case K::AuthenticationResponse: {
      if (link->initiator || link->phase != LinkPhase::Authenticating || !f.proof) {
        return discard("unexpected authentication response");
      }
      if (*f.proof != auth_proof(*cfg_.long_term, link->nonce_peer, link->challenge, true)) {
        if (guard_) return discard("initiator proof invalid");
        auto rf = stamped(now);
        rf.cause = RejectCause::AuthenticationFailed;
        out.outbound.push_back(make(*link, K::AuthenticationReject, rf));
        out.append(abort(*link, pdu, SecurityEventKind::Reject, "initiator proof invalid"));
        return out;
      }
      link->authenticated = true;
      clear_held(*link, out, pdu.kind);
      out.append(start_security_mode(*link, now));
      return out;
    }
    case K::AuthenticationReject:
      if (!link->initiator || !link->half_open()) return discard("unexpected authentication reject");
      return abort(*link, pdu, SecurityEventKind::Aborted, "authentication rejected by peer");
    case K::AuthenticationFailure:
      if (link->initiator || link->phase != LinkPhase::Authenticating) return discard("unexpected authentication failure");
      return abort(*link, pdu, SecurityEventKind::Aborted, "peer reported authentication failure");
    case K::SecurityModeCommand: {
      if (!link->initiator || (link->phase != LinkPhase::RequestSent && link->phase != LinkPhase::Authenticating) ||
          !f.nonce || !f.policy || !f.session_byte) {
        return discard("unexpected security mode command");
      }
      auto reject = [&](RejectCause cause, std::string reason) {
        if (guard_ && cause == RejectCause::IntegrityFailure) return discard(std::move(reason));
        auto rf = stamped(now);
        rf.cause = cause;
        out.outbound.push_back(make(*link, K::SecurityModeReject, rf));
        out.append(abort(*link, pdu, SecurityEventKind::Reject, std::move(reason)));
        return out;
      };
      const auto neg = negotiate_policy(cfg_.policy, *f.policy);
      if (!cfg_.long_term) return reject(RejectCause::AuthenticationFailed, "no credential");
      if (neg.kind != Negotiation::Kind::Protected) return reject(RejectCause::PolicyMismatch, "policy not protected");
      if (cfg_.policy.authentication_mandatory && !link->authenticated) {
        return reject(RejectCause::AuthenticationFailed, "peer skipped mandatory authentication");
      }
      KeyHierarchy kh;
      kh.k_nrp = derive_k_nrp(*cfg_.long_term);
      kh.k_nrp_id = f.k_nrp_id.value_or(0);
      kh.nonce_self = link->nonce_self;
      kh.nonce_peer = *f.nonce;
      kh = derive_session(kh, link->nonce_self, *f.nonce, link->session_byte, *f.session_byte);
      SecurityContext ctx{kh, neg.ciphering, 0, std::nullopt};
      if (unprotect_pdu(ctx, pdu).status != Unprotected::Status::Ok) {
        return reject(RejectCause::IntegrityFailure, "security mode command failed integrity check");
      }
      link->context = ctx;
      link->nonce_peer = *f.nonce;
      link->peer_policy = *f.policy;
      link->peer_session_byte = *f.session_byte;
      link->negotiation = neg;
      link->phase = LinkPhase::SecurityMode;
      link->security_mode_completed = true;
      clear_held(*link, out, pdu.kind);
      out.outbound.push_back(make(*link, K::SecurityModeComplete, stamped(now)));
      return out;
    }
    case K::SecurityModeComplete: {
      if (link->initiator || link->phase != LinkPhase::SecurityMode || !link->context) {
        return discard("unexpected security mode complete");
      }
      link->phase = LinkPhase::Established;
      link->security_mode_completed = true;
      link->established_slot = now;
      link->last_keepalive_sent = now;
      clear_held(*link, out, pdu.kind);
      auto af = stamped(now);
      af.policy = cfg_.policy;
      out.outbound.push_back(make(*link, K::EstablishmentAccept, af));
      out.events.push_back({SecurityEventKind::Established, pdu.kind, link->peer, "protected"});
      return out;
    }
    case K::SecurityModeReject:
      if (link->initiator || link->phase != LinkPhase::SecurityMode) return discard("unexpected security mode reject");
      return abort(*link, pdu, SecurityEventKind::Aborted, "security mode rejected by peer");
    case K::EstablishmentAccept: {
      if (!link->initiator) return discard("unexpected establishment accept");
      if (link->phase == LinkPhase::SecurityMode && link->context) {
        // Reached only through unprotect_pdu above.
      } else if (link->phase == LinkPhase::RequestSent && !link->context) {
        if (!f.policy) return discard("accept lacks policy");
        const auto neg = negotiate_policy(cfg_.policy, *f.policy);
        if (neg.kind != Negotiation::Kind::Unprotected) return discard("accept without security mode");
        link->negotiation = neg;
        link->peer_policy = *f.policy;
      } else {
        return discard("unexpected establishment accept");
      }
      link->phase = LinkPhase::Established;
      link->established_slot = now;
      link->last_keepalive_sent = now;
      clear_held(*link, out, pdu.kind);
      out.events.push_back({SecurityEventKind::Established, pdu.kind, link->peer,
                            link->context ? "protected" : "unprotected"});
      return out;
    }
    case K::EstablishmentReject:
      if (!link->initiator || !link->half_open()) return discard("unexpected establishment reject");
      return abort(*link, pdu, SecurityEventKind::Aborted, "establishment rejected by peer");
    default:
      break;
  }

  if (!established) return discard("message requires an established link");
  switch (pdu.kind) {
    case K::KeepaliveRequest:
      out.outbound.push_back(make(*link, K::KeepaliveResponse, stamped(now)));
      return out;
    case K::KeepaliveResponse:
      link->keepalive_outstanding = false;
      link->missed_keepalives = 0;
      return out;
    case K::ReleaseRequest:
      out.outbound.push_back(make(*link, K::ReleaseAccept, stamped(now)));
      link->phase = LinkPhase::Released;
      out.events.push_back({SecurityEventKind::Released, pdu.kind, link->peer, "released by peer"});
      return out;
    case K::ReleaseAccept:
      if (!link->release_pending) return discard("unexpected release accept");
      link->phase = LinkPhase::Released;
      out.events.push_back({SecurityEventKind::Released, pdu.kind, link->peer, "release confirmed"});
      return out;
    case K::ModificationRequest:
      out.outbound.push_back(make(*link, K::ModificationAccept, stamped(now)));
      return out;
    case K::ModificationAccept:
    case K::ModificationReject:
      return out;
    case K::RekeyingRequest: {
      if (!link->context || !f.nonce || !f.session_byte) return discard("rekeying needs a security context");
      crypto::Nonce128 mine{};
      rng_.fill(mine);
      const auto byte = static_cast<std::uint8_t>(rng_.next_u32());
      const auto kh = derive_session(link->context->keys, *f.nonce, mine, *f.session_byte, byte);
      auto rf = stamped(now);
      rf.nonce = mine;
      rf.session_byte = byte;
      out.outbound.push_back(make(*link, K::RekeyingResponse, rf));
      link->context = SecurityContext{kh, link->context->ciphering, 0, std::nullopt};
      out.events.push_back({SecurityEventKind::Rekeyed, pdu.kind, link->peer, "responder"});
      return out;
    }
    case K::RekeyingResponse: {
      if (link->phase != LinkPhase::Rekeying || !link->context || !f.nonce || !f.session_byte) {
        return discard("unexpected rekeying response");
      }
      const auto kh = derive_session(link->context->keys, link->rekey_nonce, *f.nonce, link->session_byte,
                                     *f.session_byte);
      link->context = SecurityContext{kh, link->context->ciphering, 0, std::nullopt};
      link->phase = LinkPhase::Established;
      out.events.push_back({SecurityEventKind::Rekeyed, pdu.kind, link->peer, "initiator"});
      return out;
    }
    case K::IdentifierUpdateRequest: {
      if (!f.new_l2_id) return discard("identifier update lacks id");
      if (*f.new_l2_id == self_ || (links_.count(*f.new_l2_id) && *f.new_l2_id != link->peer)) {
        auto rf = stamped(now);
        rf.cause = RejectCause::IdentifierConflict;
        out.outbound.push_back(make(*link, K::IdentifierUpdateReject, rf));
        out.events.push_back({SecurityEventKind::Reject, pdu.kind, link->peer, "identifier conflict"});
        return out;
      }
      link->pending_peer_id = *f.new_l2_id;
      out.outbound.push_back(make(*link, K::IdentifierUpdateAccept, stamped(now)));
      return out;
    }
    case K::IdentifierUpdateAccept:
      if (!link->id_update_pending) return discard("unexpected identifier update accept");
      out.outbound.push_back(make(*link, K::IdentifierUpdateAck, stamped(now)));
      link->id_update_pending = false;
      out.events.push_back({SecurityEventKind::IdentifierUpdate, pdu.kind, link->peer, "own id accepted"});
      maybe_switch_identity();
      return out;
    case K::IdentifierUpdateAck: {
      if (!link->pending_peer_id) return discard("unexpected identifier update ack");
      LinkState moved = *link;
      const L2Id old = moved.peer;
      moved.peer = *moved.pending_peer_id;
      moved.pending_peer_id.reset();
      links_.erase(old);
      links_[moved.peer] = moved;
      out.events.push_back({SecurityEventKind::IdentifierUpdate, pdu.kind, moved.peer, "peer id updated"});
      return out;
    }
    case K::IdentifierUpdateReject:
      if (!link->id_update_pending) return discard("unexpected identifier update reject");
      link->id_update_pending = false;
      out.events.push_back({SecurityEventKind::Reject, pdu.kind, link->peer, "identifier update rejected"});
      maybe_switch_identity();
      return out;
    default:
      break;
  }
  out.events.push_back({SecurityEventKind::Unknown, pdu.kind, pdu.source, "unhandled message kind"});
  return out;
}

Pc5Output Pc5Entity::tick(Slot now) {
  Pc5Output out;
  std::vector<std::pair<L2Id, LinkState::Held>> expired;
  for (auto& [peer, link] : links_) {
    for (auto it = link.held.begin(); it != link.held.end();) {
      if (it->until <= now) {
        expired.emplace_back(peer, *it);
        it = link.held.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (const auto& [peer, h] : expired) {
    auto it = links_.find(peer);
    if (it == links_.end() || !it->second.half_open()) continue;
    out.append(handle(&it->second, h.pdu, h.fields, now));
  }

  for (auto& [peer, link] : links_) {
    if (link.half_open() && link.created_slot + cfg_.establishment_timeout_slots <= now) {
      link.phase = LinkPhase::Released;
      link.held.clear();
      out.events.push_back({SecurityEventKind::Timeout, Pc5MessageKind::EstablishmentRequest, peer,
                            "establishment timed out"});
      continue;
    }
    if (link.phase != LinkPhase::Established) continue;
    if (now - link.last_keepalive_sent < cfg_.keepalive_slots) continue;
    if (link.keepalive_outstanding && ++link.missed_keepalives >= cfg_.max_missed_keepalives) {
      link.phase = LinkPhase::Released;
      out.events.push_back({SecurityEventKind::Timeout, Pc5MessageKind::KeepaliveRequest, peer,
                            "keepalive unanswered"});
      continue;
    }
    link.keepalive_outstanding = true;
    link.last_keepalive_sent = now;
    out.outbound.push_back(make(link, Pc5MessageKind::KeepaliveRequest, stamped(now)));
  }
  return out;
}

Pc5Output Pc5Entity::release(L2Id peer, Slot now) {
  Pc5Output out;
  auto it = links_.find(peer);
  if (it == links_.end() || it->second.phase != LinkPhase::Established) return out;
  it->second.release_pending = true;
  out.outbound.push_back(make(it->second, Pc5MessageKind::ReleaseRequest, stamped(now)));
  return out;
}

Pc5Output Pc5Entity::rekey(L2Id peer, Slot now) {
  Pc5Output out;
  auto it = links_.find(peer);
  if (it == links_.end() || it->second.phase != LinkPhase::Established || !it->second.context) return out;
  auto& link = it->second;
  rng_.fill(link.rekey_nonce);
  link.session_byte = static_cast<std::uint8_t>(rng_.next_u32());
  link.phase = LinkPhase::Rekeying;
  auto f = stamped(now);
  f.nonce = link.rekey_nonce;
  f.session_byte = link.session_byte;
  out.outbound.push_back(make(link, Pc5MessageKind::RekeyingRequest, f));
  return out;
}

Pc5Output Pc5Entity::modify(L2Id peer, Slot now) {
  Pc5Output out;
  auto it = links_.find(peer);
  if (it == links_.end() || it->second.phase != LinkPhase::Established) return out;
  out.outbound.push_back(make(it->second, Pc5MessageKind::ModificationRequest, stamped(now)));
  return out;
}

Pc5Output Pc5Entity::update_identifier(L2Id new_id, Slot now) {
  Pc5Output out;
  if (new_id.value > kL2IdMask) throw std::invalid_argument("Layer-2 id exceeds 24 bits");
  pending_self_ = new_id;
  for (auto& [peer, link] : links_) {
    if (link.phase != LinkPhase::Established) continue;
    link.id_update_pending = true;
    auto f = stamped(now);
    f.new_l2_id = new_id;
    out.outbound.push_back(make(link, Pc5MessageKind::IdentifierUpdateRequest, f));
  }
  maybe_switch_identity();
  return out;
}

void Pc5Entity::maybe_switch_identity() {
  if (!pending_self_) return;
  for (const auto& [peer, link] : links_) {
    if (link.id_update_pending && link.live()) return;
  }
  self_ = *pending_self_;
  pending_self_.reset();
}

std::string_view to_string(IdRefreshMode m) {
  switch (m) {
    case IdRefreshMode::Static: return "static";
    case IdRefreshMode::Weak: return "weak";
    case IdRefreshMode::Secure: return "secure";
  }
  return "?";
}

std::optional<IdRefreshMode> id_refresh_mode_from_string(std::string_view s) {
  if (s == "static") return IdRefreshMode::Static;
  if (s == "weak") return IdRefreshMode::Weak;
  if (s == "secure") return IdRefreshMode::Secure;
  return std::nullopt;
}

L2Identity::L2Identity(L2Id initial, Slot start, IdRefreshMode mode, Slot period_slots, Slot first_refresh)
    : mode_(mode), period_(period_slots), next_(first_refresh) {
  if (initial.value > kL2IdMask) throw std::invalid_argument("Layer-2 id exceeds 24 bits");
  if (mode != IdRefreshMode::Static && period_slots < 1) throw std::invalid_argument("refresh period must be >= 1");
  history_.push_back({initial, start, std::nullopt});
}

std::optional<Slot> L2Identity::next_refresh_slot() const {
  if (mode_ == IdRefreshMode::Static) return std::nullopt;
  return next_;
}

bool L2Identity::due(Slot now) const { return mode_ != IdRefreshMode::Static && now >= next_; }

L2Id L2Identity::refresh(Slot now, crypto::SecureRandom& rng, const std::set<std::uint32_t>& taken) {
  auto used = [&](std::uint32_t v) {
    if (v == 0 || taken.count(v)) return true;
    return std::any_of(history_.begin(), history_.end(), [&](const Span& s) { return s.id.value == v; });
  };
  std::uint32_t v = current().value;
  if (mode_ == IdRefreshMode::Weak) {
    do v = (v + 1) & kL2IdMask;
    while (used(v));
  } else {
    do v = rng.next_u32() & kL2IdMask;
    while (used(v));
  }
  history_.back().to = now;
  history_.push_back({L2Id{v}, now, std::nullopt});
  while (next_ <= now) next_ += period_;
  return L2Id{v};
}

}  // namespace sidelink
