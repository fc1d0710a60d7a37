#include <gtest/gtest.h>

#include <deque>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "sidelink/pc5.hpp"

using namespace sidelink;

namespace {

using K = Pc5MessageKind;
using P = LinkPhase;
using R = Requirement;

constexpr L2Id kA{0x000111};
constexpr L2Id kB{0x000222};

Pc5Config config(SecurityPolicy policy = {}, bool credential = true) {
  Pc5Config cfg;
  cfg.policy = policy;
  if (credential) {
    crypto::Key256 k{};
    k.fill(0x5A);
    cfg.long_term = k;
  }
  return cfg;
}

struct Net {
  Pc5Entity a, b;
  Slot now = 0;
  std::vector<SecurityEvent> events;
  std::vector<Pc5Pdu> wire;

  explicit Net(Pc5Config ca = config(), Pc5Config cb = config(),
               std::optional<DefenseConfig::ReplayGuard> guard = std::nullopt)
      : a(std::move(ca), kA, 1, guard), b(std::move(cb), kB, 2, guard) {}

  Pc5Entity& to(const Pc5Pdu& p) { return p.destination == b.self() ? b : a; }

  void pump(Pc5Output out) {
    events.insert(events.end(), out.events.begin(), out.events.end());
    std::deque<Pc5Pdu> q(out.outbound.begin(), out.outbound.end());
    while (!q.empty()) {
      const auto pdu = q.front();
      q.pop_front();
      wire.push_back(pdu);
      ++now;
      auto r = to(pdu).receive(pdu, now);
      events.insert(events.end(), r.events.begin(), r.events.end());
      for (auto& n : r.outbound) q.push_back(n);
    }
  }

  std::vector<K> kinds() const {
    std::vector<K> out;
    for (const auto& p : wire) out.push_back(p.kind);
    return out;
  }

  std::size_t count(SecurityEventKind k) const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [&](const SecurityEvent& e) { return e.kind == k; }));
  }
};

}  // namespace

TEST(pc5, protected_establishment_flow) {
  Net n;
  n.pump(n.a.initiate(kB, 0));
  EXPECT_EQ(n.kinds(), (std::vector<K>{K::EstablishmentRequest, K::SecurityModeCommand, K::SecurityModeComplete,
                                       K::EstablishmentAccept}));
  for (auto* e : {&n.a, &n.b}) {
    const auto* l = e->link(e == &n.a ? kB : kA);
    ASSERT_TRUE(l);
    EXPECT_EQ(l->phase, P::Established);
    EXPECT_TRUE(l->security_mode_completed);
    ASSERT_TRUE(l->context);
  }
  EXPECT_EQ(n.a.link(kB)->context->keys.nrpik, n.b.link(kA)->context->keys.nrpik);
  EXPECT_TRUE(n.a.link(kB)->negotiation.ciphering);
  // the accept travels ciphered, the request and command in the clear
  EXPECT_FALSE(n.wire[0].auth_tag);
  EXPECT_TRUE(n.wire[1].auth_tag);
  EXPECT_FALSE(n.wire[1].ciphered);
  EXPECT_TRUE(n.wire[3].ciphered);
}

TEST(pc5, authenticated_establishment_flow) {
  SecurityPolicy p;
  p.authentication_mandatory = true;
  Net n(config(p), config());
  n.pump(n.a.initiate(kB, 0));
  EXPECT_EQ(n.kinds(), (std::vector<K>{K::EstablishmentRequest, K::AuthenticationRequest,
                                       K::AuthenticationResponse, K::SecurityModeCommand,
                                       K::SecurityModeComplete, K::EstablishmentAccept}));
  EXPECT_EQ(n.a.established_count(), 1u);
  EXPECT_TRUE(n.a.link(kB)->authenticated);
}

TEST(pc5, wrong_credential_fails_authentication) {
  SecurityPolicy p;
  p.authentication_mandatory = true;
  auto other = config(p);
  other.long_term->fill(0x11);
  Net n(config(p), other);
  n.pump(n.a.initiate(kB, 0));
  EXPECT_EQ(n.a.established_count(), 0u);
  EXPECT_EQ(n.b.established_count(), 0u);
  EXPECT_EQ(n.kinds().back(), K::AuthenticationFailure);
}

TEST(pc5, unprotected_establishment_skips_security_mode) {
  SecurityPolicy none{R::NotNeeded, R::NotNeeded};
  Net n(config(none), config(none));
  n.pump(n.a.initiate(kB, 0));
  EXPECT_EQ(n.kinds(), (std::vector<K>{K::EstablishmentRequest, K::EstablishmentAccept}));
  EXPECT_EQ(n.a.link(kB)->phase, P::Established);
  EXPECT_FALSE(n.a.link(kB)->context);
  EXPECT_EQ(n.a.link(kB)->negotiation.kind, Negotiation::Kind::Unprotected);
}

TEST(pc5, policy_mismatch_rejects) {
  Net n(config(SecurityPolicy{R::Required, R::Required}), config(SecurityPolicy{R::NotNeeded, R::Required}));
  n.pump(n.a.initiate(kB, 0));
  EXPECT_EQ(n.kinds(), (std::vector<K>{K::EstablishmentRequest, K::EstablishmentReject}));
  EXPECT_EQ(n.a.link(kB)->phase, P::Released);
  EXPECT_EQ(n.count(SecurityEventKind::Mismatch), 1u);
  EXPECT_EQ(n.count(SecurityEventKind::Aborted), 1u);
}

TEST(pc5, responder_without_credential_or_authorization) {
  Net n(config(), config({}, false));
  n.pump(n.a.initiate(kB, 0));
  EXPECT_EQ(n.a.established_count(), 0u);
  EXPECT_EQ(n.kinds().back(), K::EstablishmentReject);

  auto cfg = config();
  cfg.authorized = false;
  Net m(config(), cfg);
  m.pump(m.a.initiate(kB, 0));
  EXPECT_EQ(m.kinds(), (std::vector<K>{K::EstablishmentRequest}));
  EXPECT_EQ(m.count(SecurityEventKind::Ignored), 1u);
}

TEST(pc5, release_rekey_modify) {
  Net n;
  n.pump(n.a.initiate(kB, 0));
  const auto before = n.a.link(kB)->context->keys.nrpek;
  n.pump(n.a.rekey(kB, n.now));
  EXPECT_EQ(n.count(SecurityEventKind::Rekeyed), 2u);
  EXPECT_NE(n.a.link(kB)->context->keys.nrpek, before);
  EXPECT_EQ(n.a.link(kB)->context->keys.nrpek, n.b.link(kA)->context->keys.nrpek);
  n.pump(n.a.modify(kB, n.now));
  EXPECT_EQ(n.kinds().back(), K::ModificationAccept);
  EXPECT_EQ(n.count(SecurityEventKind::Discard), 0u);
  n.pump(n.b.release(kA, n.now));
  EXPECT_EQ(n.a.link(kB)->phase, P::Released);
  EXPECT_EQ(n.b.link(kA)->phase, P::Released);
}

TEST(pc5, keepalive_timeout_drops_silent_peer) {
  Net n;
  n.pump(n.a.initiate(kB, 0));
  // b never hears a's keepalives
  Slot t = n.now;
  int sent = 0;
  for (int i = 0; i < 5 && n.a.link(kB)->phase == P::Established; ++i) {
    t += 2000;
    sent += static_cast<int>(n.a.tick(t).outbound.size());
  }
  EXPECT_EQ(n.a.link(kB)->phase, P::Released);
  EXPECT_EQ(sent, 2);
}

TEST(pc5, keepalive_answered_keeps_link) {
  Net n;
  n.pump(n.a.initiate(kB, 0));
  for (int i = 1; i <= 5; ++i) {
    n.now += 2000;
    n.pump(n.a.tick(n.now));
  }
  EXPECT_EQ(n.a.link(kB)->phase, P::Established);
}

TEST(pc5, half_open_link_times_out) {
  Net n;
  auto out = n.a.initiate(kB, 0);  // request lost
  EXPECT_EQ(out.outbound.size(), 1u);
  EXPECT_TRUE(n.a.tick(99).events.empty());
  const auto ev = n.a.tick(100).events;
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, SecurityEventKind::Timeout);
}

TEST(pc5, identifier_update_moves_link) {
  Net n;
  n.pump(n.a.initiate(kB, 0));
  n.pump(n.a.update_identifier(L2Id{0x000999}, n.now));
  EXPECT_EQ(n.a.self(), L2Id{0x000999});
  EXPECT_FALSE(n.b.link(kA));
  ASSERT_TRUE(n.b.link(L2Id{0x000999}));
  EXPECT_EQ(n.b.link(L2Id{0x000999})->phase, P::Established);
  n.pump(n.b.modify(L2Id{0x000999}, n.now));
  EXPECT_EQ(n.kinds().back(), K::ModificationAccept);
}

TEST(pc5, identifier_update_conflict_rejected) {
  Net n;
  n.pump(n.a.initiate(kB, 0));
  n.pump(n.a.update_identifier(kB, n.now));
  EXPECT_EQ(n.kinds().back(), K::IdentifierUpdateReject);
  EXPECT_EQ(n.a.self(), kB);  // switch is local once the exchange ends
  EXPECT_TRUE(n.b.link(kA));
}

TEST(pc5, replayed_request_accepted_without_guard_only) {
  for (bool guarded : {false, true}) {
    std::optional<DefenseConfig::ReplayGuard> g;
    if (guarded) g = DefenseConfig::ReplayGuard{true, 10, 5};
    Net n(config(), config(), g);
    n.pump(n.a.initiate(kB, 0));
    const auto request = n.wire.front();
    n.now += 40;
    auto r = n.b.receive(request, n.now);
    if (guarded) {
      ASSERT_EQ(r.events.size(), 1u);
      EXPECT_EQ(r.events[0].kind, SecurityEventKind::GuardReject);
      EXPECT_TRUE(r.outbound.empty());
      EXPECT_EQ(n.b.link(kA)->phase, P::Established);
    } else {
      EXPECT_EQ(r.events.at(0).kind, SecurityEventKind::DuplicateSession);
      EXPECT_EQ(r.outbound.at(0).kind, K::SecurityModeCommand);
      EXPECT_NE(n.b.link(kA)->phase, P::Established);
    }
  }
}

TEST(pc5, forged_reject_is_held_then_dropped_by_continuation) {
  DefenseConfig::ReplayGuard g{true, 10, 5};
  Net n(config(), config(), g);
  auto out = n.a.initiate(kB, 0);
  Pc5Pdu forged;
  forged.kind = K::EstablishmentReject;
  forged.source = kB;
  forged.destination = kA;
  Pc5Fields f;
  f.timestamp = 1;
  f.cause = RejectCause::PolicyMismatch;
  forged.body = encode_fields(f);
  const auto r = n.a.receive(forged, 1);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].kind, SecurityEventKind::Held);
  n.now = 1;
  n.pump(out);
  EXPECT_EQ(n.a.link(kB)->phase, P::Established);
  EXPECT_EQ(n.count(SecurityEventKind::Conflict), 1u);

  // without the guard it aborts at once
  Net m;
  m.a.initiate(kB, 0);
  const auto r2 = m.a.receive(forged, 1);
  EXPECT_EQ(r2.events.at(0).kind, SecurityEventKind::Aborted);
}

TEST(pc5, after_security_message_without_link_discarded) {
  Pc5Entity e(config(), kA, 1);
  Pc5Pdu p;
  p.kind = K::ReleaseRequest;
  p.source = kB;
  p.destination = kA;
  const auto r = e.receive(p, 0);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].kind, SecurityEventKind::Discard);
  p.destination = L2Id{5};
  EXPECT_TRUE(e.receive(p, 0).events.empty());
}

// Fuzzing: drive two endpoints with genuine, dropped, reordered, replayed and
// forged PDUs, checking every phase change against a hand-written table.
namespace {

struct Transition {
  P from;
  K by;
  P to;
  friend auto operator<=>(const Transition&, const Transition&) = default;
};

const std::set<Transition>& transition_table() {
  static const std::set<Transition> t = [] {
    std::set<Transition> s{
        // initiator
        {P::RequestSent, K::AuthenticationRequest, P::Authenticating},
        {P::RequestSent, K::SecurityModeCommand, P::SecurityMode},
        {P::Authenticating, K::SecurityModeCommand, P::SecurityMode},
        {P::RequestSent, K::EstablishmentAccept, P::Established},  // unprotected only
        {P::SecurityMode, K::EstablishmentAccept, P::Established},
        // responder
        {P::Authenticating, K::AuthenticationResponse, P::SecurityMode},
        {P::SecurityMode, K::SecurityModeComplete, P::Established},
        // both
        {P::Established, K::ReleaseRequest, P::Released},
        {P::Rekeying, K::ReleaseRequest, P::Released},
        {P::Established, K::ReleaseAccept, P::Released},
        {P::Rekeying, K::ReleaseAccept, P::Released},
        {P::Rekeying, K::RekeyingResponse, P::Established},
    };
    for (P from : {P::RequestSent, P::Authenticating, P::SecurityMode}) {
      for (K k : {K::EstablishmentReject, K::AuthenticationReject, K::AuthenticationFailure, K::SecurityModeReject,
                  K::AuthenticationRequest, K::AuthenticationResponse, K::SecurityModeCommand}) {
        s.insert({from, k, P::Released});
      }
    }
    // a fresh Establishment Request replaces whatever was there
    for (P from : {P::Idle, P::RequestSent, P::Authenticating, P::SecurityMode, P::Established, P::Rekeying,
                   P::Released}) {
      for (P to : {P::Released, P::Established, P::Authenticating, P::SecurityMode}) {
        s.insert({from, K::EstablishmentRequest, to});
      }
    }
    return s;
  }();
  return t;
}

bool allowed(P from, K by, P to) { return from == to || transition_table().count({from, by, to}) != 0; }

void check_safety(const Pc5Entity& e, int trial, int step) {
  for (const auto& [peer, l] : e.links()) {
    if (l.phase != P::Established && l.phase != P::Rekeying) continue;
    const bool secured = l.security_mode_completed && l.context.has_value();
    const bool open = l.negotiation.kind == Negotiation::Kind::Unprotected && !l.context;
    ASSERT_TRUE(secured || open) << "trial " << trial << " step " << step;
  }
}

Pc5Pdu forge(std::mt19937_64& rng, L2Id src, L2Id dst, const std::vector<Pc5Pdu>& seen) {
  Pc5Pdu p;
  p.kind = all_pc5_kinds()[rng() % kPc5MessageKindCount];
  p.source = src;
  p.destination = dst;
  p.counter = static_cast<std::uint32_t>(rng() % 8);
  Pc5Fields f;
  f.timestamp = static_cast<Slot>(rng() % 400);
  if (rng() & 1) {
    crypto::Nonce128 nonce{};
    for (auto& b : nonce) b = static_cast<std::uint8_t>(rng());
    f.nonce = nonce;
  }
  if (rng() & 1) {
    f.policy = SecurityPolicy{static_cast<R>(rng() % 3), static_cast<R>(rng() % 3), (rng() & 1) != 0, false};
  }
  if (rng() & 1) f.session_byte = static_cast<std::uint8_t>(rng());
  if (rng() & 1) f.cause = static_cast<RejectCause>(rng() % 6);
  if (rng() & 1) f.proof = static_cast<std::uint32_t>(rng());
  if (rng() % 4 == 0) f.new_l2_id = L2Id{static_cast<std::uint32_t>(rng() & kL2IdMask)};
  p.body = encode_fields(f);
  if (rng() % 3 == 0) p.auth_tag = static_cast<std::uint32_t>(rng());
  if (!seen.empty() && rng() % 4 == 0) {
    // splice a genuine tag onto forged content
    p.auth_tag = seen[rng() % seen.size()].auth_tag;
  }
  return p;
}

}  // namespace

TEST(pc5, fuzzed_sequences_follow_transition_table) {
  std::mt19937_64 rng(2024);
  std::size_t established_protected = 0, established_open = 0, steps = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto policy = [&] {
      SecurityPolicy p{static_cast<R>(rng() % 3), static_cast<R>(rng() % 3), (rng() & 1) != 0, rng() % 3 == 0};
      return p;
    };
    std::optional<DefenseConfig::ReplayGuard> guard;
    if (rng() & 1) guard = DefenseConfig::ReplayGuard{true, 10, 5};
    Pc5Entity a(config(policy()), kA, rng(), guard), b(config(policy()), kB, rng(), guard);
    std::deque<Pc5Pdu> in_flight;
    std::vector<Pc5Pdu> seen;
    Slot now = 0;
    auto take = [&](Pc5Output out) {
      for (auto& p : out.outbound) {
        in_flight.push_back(p);
        seen.push_back(p);
      }
    };
    auto deliver = [&](Pc5Pdu pdu) {
      Pc5Entity& dst = pdu.destination == kA ? a : b;
      const LinkState* before = dst.link(pdu.source);
      const P from = before ? before->phase : P::Idle;
      take(dst.receive(pdu, now));
      const LinkState* after = dst.link(pdu.source);
      const P to = after ? after->phase : P::Idle;
      EXPECT_TRUE(allowed(from, pdu.kind, to))
          << "trial " << trial << ": " << to_string(from) << " --" << to_string(pdu.kind) << "--> " << to_string(to);
    };

    for (int step = 0; step < 60; ++step, ++steps) {
      ++now;
      switch (rng() % 10) {
        case 0:
        case 1:
        case 2:
        case 3:
          if (!in_flight.empty()) {
            // mostly in order, sometimes from the middle
            const std::size_t i = rng() % 4 == 0 ? rng() % in_flight.size() : 0;
            const auto pdu = in_flight[i];
            in_flight.erase(in_flight.begin() + static_cast<std::ptrdiff_t>(i));
            deliver(pdu);
          }
          break;
        case 4:
          if (!in_flight.empty()) in_flight.pop_front();  // lost
          break;
        case 5:
          if (!seen.empty()) deliver(seen[rng() % seen.size()]);  // replay
          break;
        case 6:
          deliver(forge(rng, (rng() & 1) ? kA : kB, (rng() & 1) ? kA : kB, seen));
          break;
        case 7:
          take(a.tick(now));
          take(b.tick(now));
          break;
        case 8:
          if (rng() % 4 == 0) {
            take(a.initiate(kB, now));
          } else {
            switch (rng() % 3) {
              case 0: take(a.rekey(kB, now)); break;
              case 1: take(a.modify(kB, now)); break;
              default: take(b.release(kA, now)); break;
            }
          }
          break;
        default:
          now += static_cast<Slot>(rng() % 50);
          break;
      }
      check_safety(a, trial, step);
      check_safety(b, trial, step);
      if (HasFatalFailure()) return;
    }
    for (const auto* e : {&a, &b}) {
      for (const auto& [peer, l] : e->links()) {
        if (l.phase != P::Established) continue;
        (l.context ? established_protected : established_open) += 1;
      }
    }
  }
  // the fuzzer must actually reach both kinds of established link
  EXPECT_GT(established_protected, 0u);
  EXPECT_GT(established_open, 0u);
  EXPECT_EQ(steps, 300u * 60u);
}

TEST(pc5, refresh_modes) {
  crypto::SecureRandom rng(1);
  L2Identity weak(L2Id{100}, 0, IdRefreshMode::Weak, 500, 200);
  EXPECT_FALSE(weak.due(199));
  EXPECT_TRUE(weak.due(200));
  EXPECT_EQ(weak.refresh(200, rng, {}), L2Id{101});
  EXPECT_EQ(weak.refresh(700, rng, {102}), L2Id{103});
  EXPECT_EQ(weak.next_refresh_slot(), 1200);
  EXPECT_EQ(weak.history().size(), 3u);
  EXPECT_EQ(weak.history()[0].to, 200);

  L2Identity fixed(L2Id{5}, 0, IdRefreshMode::Static, 0, 0);
  EXPECT_FALSE(fixed.due(1000000));
  EXPECT_FALSE(fixed.next_refresh_slot());
  EXPECT_THROW(L2Identity(L2Id{1}, 0, IdRefreshMode::Secure, 0, 0), std::invalid_argument);
  EXPECT_THROW(L2Identity(L2Id{kL2IdMask + 1}, 0, IdRefreshMode::Static, 0, 0), std::invalid_argument);
  EXPECT_EQ(id_refresh_mode_from_string("secure"), IdRefreshMode::Secure);
  EXPECT_FALSE(id_refresh_mode_from_string("paranoid"));
}

TEST(pc5, ten_thousand_refreshes_never_collide) {
  for (auto mode : {IdRefreshMode::Weak, IdRefreshMode::Secure}) {
    crypto::SecureRandom rng(99);
    std::vector<L2Identity> ues;
    for (std::uint32_t i = 0; i < 10; ++i) ues.emplace_back(L2Id{1 + i * 3}, 0, mode, 100, 100);
    for (Slot t = 100; t <= 100 * 1000; t += 100) {
      for (std::size_t u = 0; u < ues.size(); ++u) {
        std::set<std::uint32_t> taken;
        for (std::size_t o = 0; o < ues.size(); ++o) {
          if (o != u) taken.insert(ues[o].current().value);
        }
        ASSERT_TRUE(ues[u].due(t));
        ues[u].refresh(t, rng, taken);
      }
      std::set<std::uint32_t> now;
      for (const auto& ue : ues) now.insert(ue.current().value);
      ASSERT_EQ(now.size(), ues.size()) << to_string(mode) << " at " << t;
    }
    for (const auto& ue : ues) {
      std::set<std::uint32_t> own;
      for (const auto& s : ue.history()) {
        EXPECT_TRUE(own.insert(s.id.value).second);
        EXPECT_LE(s.id.value, kL2IdMask);
        EXPECT_NE(s.id.value, 0u);
      }
      EXPECT_EQ(ue.history().size(), 1001u);
    }
  }
}
