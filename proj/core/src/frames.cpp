#include "sidelink/frames.hpp"

#include <algorithm>
#include <string>

namespace sidelink {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw FrameError(what);
}

void require_length(const BitString& bits, std::size_t expected, const char* what) {
  if (bits.size() != expected) {
    throw FrameError(std::string(what) + ": expected " + std::to_string(expected) +
                     " bits, got " + std::to_string(bits.size()));
  }
}

}  // namespace

// --- MIB-SL ----------------------------------------------------------------

BitString encode_mib_sl(const MibSl& m) {
  require(m.tdd_config < (1u << 12), "MIB-SL sl-TDD-Config exceeds 12 bits");
  require(m.direct_frame_number < 1024, "MIB-SL directFrameNumber must be < 1024");
  require(m.slot_index < 128, "MIB-SL slotIndex must be < 128");
  require(m.reserved < 4, "MIB-SL reservedBits exceeds 2 bits");
  BitWriter w;
  w.put(m.tdd_config, 12);
  w.put_bool(m.in_coverage);
  w.put(m.direct_frame_number, 10);
  w.put(m.slot_index, 7);
  w.put(m.reserved, 2);
  return w.take();
}

MibSl decode_mib_sl(const BitString& bits) {
  require_length(bits, kMibSlBits, "MIB-SL");
  BitReader r(bits);
  MibSl m;
  m.tdd_config = static_cast<std::uint16_t>(r.get(12));
  m.in_coverage = r.get_bool();
  m.direct_frame_number = static_cast<std::uint16_t>(r.get(10));
  m.slot_index = static_cast<std::uint8_t>(r.get(7));
  m.reserved = static_cast<std::uint8_t>(r.get(2));
  return m;
}

// --- SLSS ------------------------------------------------------------------

std::string_view to_string(CoverageClass c) {
  switch (c) {
    case CoverageClass::GnssDirect: return "gnss";
    case CoverageClass::InCoverage: return "in-coverage";
    case CoverageClass::OutOfCoverage: return "out-of-coverage";
  }
  return "?";
}

CoverageClass coverage_class_of(int slss_id) {
  if (slss_id < 0 || slss_id >= kSlssIdCount) throw FrameError("SLSS id out of range 0..671");
  if (slss_id == 0) return CoverageClass::GnssDirect;
  if (slss_id < kSSssCount) return CoverageClass::InCoverage;
  return CoverageClass::OutOfCoverage;
}

SlssIdentity slss_from_sequences(int s_pss, int s_sss, bool priority_indicator) {
  if (s_pss < 0 || s_pss >= kSPssCount) throw FrameError("S-PSS index out of range 0..1");
  if (s_sss < 0 || s_sss >= kSSssCount) throw FrameError("S-SSS index out of range 0..335");
  SlssIdentity id;
  id.s_pss = s_pss;
  id.s_sss = s_sss;
  id.slss_id = s_pss * kSSssCount + s_sss;
  id.coverage = coverage_class_of(id.slss_id);
  id.priority_indicator = priority_indicator;
  return id;
}

SlssIdentity slss_from_id(int slss_id, bool priority_indicator) {
  if (slss_id < 0 || slss_id >= kSlssIdCount) throw FrameError("SLSS id out of range 0..671");
  return slss_from_sequences(slss_id / kSSssCount, slss_id % kSSssCount, priority_indicator);
}

BitString ssb_signed_portion(const SsbFrame& f) {
  BitWriter w;
  w.put(static_cast<std::uint64_t>(f.slss.slss_id), 10);
  w.put_bool(f.slss.priority_indicator);
  w.put_bits(encode_mib_sl(f.mib));
  return w.take();
}

BitString encode_ssb(const SsbFrame& f) {
  BitWriter w;
  w.put_bits(ssb_signed_portion(f));
  if (f.tag_bits > 0) {
    require(f.tag.has_value(), "signed S-SSB is missing its tag");
    w.put(*f.tag, f.tag_bits);
  }
  return w.take();
}

SsbFrame decode_ssb(const BitString& bits, unsigned tag_bits) {
  require_length(bits, kSsbHeaderBits + kMibSlBits + tag_bits, "S-SSB");
  BitReader r(bits);
  SsbFrame f;
  const auto id = static_cast<int>(r.get(10));
  const bool ic = r.get_bool();
  f.slss = slss_from_id(id, ic);
  f.mib = decode_mib_sl(r.get_bits(kMibSlBits));
  f.tag_bits = tag_bits;
  if (tag_bits > 0) f.tag = static_cast<std::uint32_t>(r.get(tag_bits));
  return f;
}

// --- SCI 1-A ---------------------------------------------------------------

unsigned Sci1aLayout::total() const {
  return priority + frequency + time + period + dmrs_pattern + second_stage_format +
         beta_offset + dmrs_port_count + mcs + additional_mcs_table + psfch_overhead;
}

namespace {

void check_format_pool(const ResourcePool& pool) {
  require(pool.sl_max_num_per_reserve == 2 || pool.sl_max_num_per_reserve == 3,
          "sl-MaxNumPerReserve must be 2 or 3");
  require(pool.num_subchannels >= 1, "pool needs at least one subchannel");
  require(!pool.period_list_ms.empty(), "pool period list is empty");
}

// Number of (start_initial, start_retx) combinations for a given length.
std::uint64_t starts_for_length(std::uint64_t n, std::uint64_t length, int max_num) {
  const auto positions = n - length + 1;
  return max_num == 2 ? positions : positions * positions;
}

// 1 <= a < b <= 31 pairs for sl-MaxNumPerReserve = 3.
constexpr std::uint32_t kMaxGap = 31;
constexpr std::uint32_t kTimePairBase = 32;

std::uint32_t pair_rank(std::uint32_t a, std::uint32_t b) {
  std::uint32_t rank = 0;
  for (std::uint32_t i = 1; i < a; ++i) rank += kMaxGap - i;
  return rank + (b - a - 1);
}

}  // namespace

Sci1aLayout sci1a_layout(const ResourcePool& pool) {
  check_format_pool(pool);
  Sci1aLayout l;
  const auto n = static_cast<std::uint64_t>(pool.num_subchannels);
  if (pool.sl_max_num_per_reserve == 2) {
    l.frequency_values = n * (n + 1) / 2;
    l.time_values = 32;
    l.time = 5;
  } else {
    l.frequency_values = n * (n + 1) * (2 * n + 1) / 6;
    l.time_values = kTimePairBase + pair_rank(kMaxGap - 1, kMaxGap) + 1;
    l.time = 9;
  }
  l.frequency = bits_for(l.frequency_values);
  l.period = bits_for(pool.period_list_ms.size());
  l.dmrs_pattern = bits_for(static_cast<std::uint64_t>(pool.dmrs_pattern_count));
  require(pool.additional_mcs_tables >= 0 && pool.additional_mcs_tables <= 2,
          "additional MCS tables must be 0, 1 or 2");
  l.additional_mcs_table = static_cast<unsigned>(pool.additional_mcs_tables);
  l.psfch_overhead = (pool.psfch_period == 2 || pool.psfch_period == 4) ? 1 : 0;
  return l;
}

std::uint32_t encode_frequency_allocation(const FrequencyAllocation& a, const ResourcePool& pool) {
  check_format_pool(pool);
  const int n = pool.num_subchannels;
  const int max_num = pool.sl_max_num_per_reserve;
  require(a.length >= 1 && a.length <= n, "allocation length outside pool");
  require(a.start_initial >= 0 && a.start_initial + a.length <= n,
          "initial allocation exceeds pool subchannels");
  if (max_num == 2) {
    require(a.start_retx == a.start_initial,
            "sl-MaxNumPerReserve=2 cannot place retransmissions on other subchannels");
  } else {
    require(a.start_retx >= 0 && a.start_retx + a.length <= n,
            "retransmission allocation exceeds pool subchannels");
  }
  std::uint64_t value = 0;
  for (int l = 1; l < a.length; ++l) {
    value += starts_for_length(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(l), max_num);
  }
  const auto positions = static_cast<std::uint64_t>(n - a.length + 1);
  if (max_num == 2) {
    value += static_cast<std::uint64_t>(a.start_initial);
  } else {
    value += static_cast<std::uint64_t>(a.start_initial) * positions +
             static_cast<std::uint64_t>(a.start_retx);
  }
  return static_cast<std::uint32_t>(value);
}

FrequencyAllocation decode_frequency_allocation(std::uint32_t value, const ResourcePool& pool) {
  check_format_pool(pool);
  const auto n = static_cast<std::uint64_t>(pool.num_subchannels);
  const int max_num = pool.sl_max_num_per_reserve;
  std::uint64_t rest = value;
  for (std::uint64_t l = 1; l <= n; ++l) {
    const auto count = starts_for_length(n, l, max_num);
    if (rest < count) {
      FrequencyAllocation a;
      a.length = static_cast<int>(l);
      if (max_num == 2) {
        a.start_initial = a.start_retx = static_cast<int>(rest);
      } else {
        const auto positions = n - l + 1;
        a.start_initial = static_cast<int>(rest / positions);
        a.start_retx = static_cast<int>(rest % positions);
      }
      return a;
    }
    rest -= count;
  }
  throw FrameError("frequency resource assignment value out of range for pool");
}

std::uint32_t encode_time_allocation(const TimeAllocation& a, const ResourcePool& pool) {
  check_format_pool(pool);
  require(a.first_gap >= 0 && a.first_gap <= static_cast<int>(kMaxGap), "first gap outside 0..31");
  require(a.second_gap >= 0 && a.second_gap <= static_cast<int>(kMaxGap), "second gap outside 0..31");
  if (pool.sl_max_num_per_reserve == 2) {
    require(a.second_gap == 0, "sl-MaxNumPerReserve=2 reserves at most one extra resource");
    return static_cast<std::uint32_t>(a.first_gap);
  }
  if (a.second_gap == 0) return static_cast<std::uint32_t>(a.first_gap);
  require(a.first_gap >= 1 && a.first_gap < a.second_gap, "time gaps must satisfy 1 <= first < second");
  return kTimePairBase + pair_rank(static_cast<std::uint32_t>(a.first_gap),
                                   static_cast<std::uint32_t>(a.second_gap));
}

TimeAllocation decode_time_allocation(std::uint32_t value, const ResourcePool& pool) {
  check_format_pool(pool);
  TimeAllocation a;
  if (value < kTimePairBase) {
    a.first_gap = static_cast<int>(value);
    return a;
  }
  require(pool.sl_max_num_per_reserve == 3, "time resource assignment out of range for pool");
  std::uint32_t rest = value - kTimePairBase;
  for (std::uint32_t first = 1; first < kMaxGap; ++first) {
    const auto count = kMaxGap - first;
    if (rest < count) {
      a.first_gap = static_cast<int>(first);
      a.second_gap = static_cast<int>(first + 1 + rest);
      return a;
    }
    rest -= count;
  }
  throw FrameError("time resource assignment out of range for pool");
}

namespace {

void check_sci1a_ranges(const Sci1A& s, const ResourcePool& pool, const Sci1aLayout& l) {
  require(s.frequency_resource_assignment < l.frequency_values,
          "frequency resource assignment out of range for pool");
  require(s.time_resource_assignment < l.time_values, "time resource assignment out of range for pool");
  require(s.resource_reservation_period < pool.period_list_ms.size(),
          "resource reservation period index outside period list");
  require(s.dmrs_pattern < static_cast<unsigned>(std::max(pool.dmrs_pattern_count, 1)),
          "DMRS pattern outside configured pattern count");
}

}  // namespace

BitString encode_sci1a(const Sci1A& s, const ResourcePool& pool) {
  const auto l = sci1a_layout(pool);
  check_sci1a_ranges(s, pool, l);
  BitWriter w;
  w.put(s.priority, l.priority);
  w.put(s.frequency_resource_assignment, l.frequency);
  w.put(s.time_resource_assignment, l.time);
  w.put(s.resource_reservation_period, l.period);
  w.put(s.dmrs_pattern, l.dmrs_pattern);
  w.put(s.second_stage_format, l.second_stage_format);
  w.put(s.beta_offset, l.beta_offset);
  w.put(s.dmrs_port_count, l.dmrs_port_count);
  w.put(s.mcs, l.mcs);
  w.put(s.additional_mcs_table, l.additional_mcs_table);
  w.put(s.psfch_overhead, l.psfch_overhead);
  return w.take();
}

Sci1A decode_sci1a(const BitString& bits, const ResourcePool& pool) {
  const auto l = sci1a_layout(pool);
  require_length(bits, l.total(), "SCI 1-A");
  BitReader r(bits);
  Sci1A s;
  s.priority = static_cast<std::uint8_t>(r.get(l.priority));
  s.frequency_resource_assignment = static_cast<std::uint32_t>(r.get(l.frequency));
  s.time_resource_assignment = static_cast<std::uint32_t>(r.get(l.time));
  s.resource_reservation_period = static_cast<std::uint32_t>(r.get(l.period));
  s.dmrs_pattern = static_cast<std::uint8_t>(r.get(l.dmrs_pattern));
  s.second_stage_format = static_cast<std::uint8_t>(r.get(l.second_stage_format));
  s.beta_offset = static_cast<std::uint8_t>(r.get(l.beta_offset));
  s.dmrs_port_count = static_cast<std::uint8_t>(r.get(l.dmrs_port_count));
  s.mcs = static_cast<std::uint8_t>(r.get(l.mcs));
  s.additional_mcs_table = static_cast<std::uint8_t>(r.get(l.additional_mcs_table));
  s.psfch_overhead = static_cast<std::uint8_t>(r.get(l.psfch_overhead));
  check_sci1a_ranges(s, pool, l);
  return s;
}

// --- SCI 2-A ---------------------------------------------------------------

BitString encode_sci2a(const Sci2A& s) {
  require(static_cast<std::uint8_t>(s.cast_type) <= 2, "cast type must be unicast, groupcast or broadcast");
  BitWriter w;
  w.put(s.harq_process, 4);
  w.put_bool(s.ndi);
  w.put(s.redundancy_version, 2);
  w.put(s.source_id, 8);
  w.put(s.destination_id, 16);
  w.put_bool(s.harq_feedback_enabled);
  w.put(static_cast<std::uint8_t>(s.cast_type), 2);
  w.put_bool(s.csi_request);
  return w.take();
}

Sci2A decode_sci2a(const BitString& bits) {
  require_length(bits, kSci2aBits, "SCI 2-A");
  BitReader r(bits);
  Sci2A s;
  s.harq_process = static_cast<std::uint8_t>(r.get(4));
  s.ndi = r.get_bool();
  s.redundancy_version = static_cast<std::uint8_t>(r.get(2));
  s.source_id = static_cast<std::uint8_t>(r.get(8));
  s.destination_id = static_cast<std::uint16_t>(r.get(16));
  s.harq_feedback_enabled = r.get_bool();
  const auto cast = r.get(2);
  require(cast <= 2, "SCI 2-A cast type value 3 is reserved");
  s.cast_type = static_cast<CastType>(cast);
  s.csi_request = r.get_bool();
  return s;
}

// --- PC5 -------------------------------------------------------------------

namespace {

struct Pc5Row {
  Pc5MessageKind kind;
  std::string_view name;
  ProtectionProfile profile;
};

constexpr auto B = SecurityStage::BeforeSecurity;
constexpr auto D = SecurityStage::DuringSecurity;
constexpr auto A = SecurityStage::AfterSecurity;

// Ordered by message code (1..23).
constexpr std::array<Pc5Row, kPc5MessageKindCount> kPc5Table{{
    {Pc5MessageKind::EstablishmentRequest, "Direct Link Establishment Request", {false, false, B}},
    {Pc5MessageKind::EstablishmentAccept, "Direct Link Establishment Accept", {true, true, A}},
    {Pc5MessageKind::ModificationRequest, "Direct Link Modification Request", {true, true, A}},
    {Pc5MessageKind::ModificationAccept, "Direct Link Modification Accept", {true, true, A}},
    {Pc5MessageKind::ReleaseRequest, "Direct Link Release Request", {true, true, A}},
    {Pc5MessageKind::ReleaseAccept, "Direct Link Release Accept", {true, true, A}},
    {Pc5MessageKind::KeepaliveRequest, "Direct Link Keepalive Request", {true, true, A}},
    {Pc5MessageKind::KeepaliveResponse, "Direct Link Keepalive Response", {true, true, A}},
    {Pc5MessageKind::AuthenticationRequest, "Direct Link Authentication Request", {false, false, B}},
    {Pc5MessageKind::AuthenticationResponse, "Direct Link Authentication Response", {false, false, B}},
    {Pc5MessageKind::AuthenticationReject, "Direct Link Authentication Reject", {false, false, B}},
    {Pc5MessageKind::SecurityModeCommand, "Direct Link Security Mode Command", {false, true, D}},
    {Pc5MessageKind::SecurityModeComplete, "Direct Link Security Mode Complete", {true, true, D}},
    {Pc5MessageKind::SecurityModeReject, "Direct Link Security Mode Reject", {false, false, D}},
    {Pc5MessageKind::RekeyingRequest, "Direct Link Rekeying Request", {true, true, A}},
    {Pc5MessageKind::RekeyingResponse, "Direct Link Rekeying Response", {true, true, A}},
    {Pc5MessageKind::IdentifierUpdateRequest, "Direct Link Identifier Update Request", {true, true, A}},
    {Pc5MessageKind::IdentifierUpdateAccept, "Direct Link Identifier Update Accept", {true, true, A}},
    {Pc5MessageKind::IdentifierUpdateAck, "Direct Link Identifier Update Ack", {true, true, A}},
    {Pc5MessageKind::IdentifierUpdateReject, "Direct Link Identifier Update Reject", {true, true, A}},
    {Pc5MessageKind::ModificationReject, "Direct Link Modification Reject", {true, true, A}},
    {Pc5MessageKind::EstablishmentReject, "Direct Link Establishment Reject", {false, false, B}},
    {Pc5MessageKind::AuthenticationFailure, "Direct Link Authentication Failure", {false, false, B}},
}};

const Pc5Row& row_of(Pc5MessageKind kind) {
  const auto code = static_cast<std::size_t>(kind);
  require(code >= 1 && code <= kPc5Table.size(), "unknown PC5 message kind");
  return kPc5Table[code - 1];
}

}  // namespace

ProtectionProfile protection_profile(Pc5MessageKind kind) { return row_of(kind).profile; }

std::string_view to_string(Pc5MessageKind kind) { return row_of(kind).name; }

std::string_view to_string(SecurityStage stage) {
  switch (stage) {
    case SecurityStage::BeforeSecurity: return "before-security";
    case SecurityStage::DuringSecurity: return "during-security";
    case SecurityStage::AfterSecurity: return "after-security";
  }
  return "?";
}

std::optional<Pc5MessageKind> pc5_kind_from_code(std::uint8_t code) {
  if (code < 1 || code > kPc5MessageKindCount) return std::nullopt;
  return static_cast<Pc5MessageKind>(code);
}

const std::array<Pc5MessageKind, kPc5MessageKindCount>& all_pc5_kinds() {
  static const auto kinds = [] {
    std::array<Pc5MessageKind, kPc5MessageKindCount> out{};
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = kPc5Table[i].kind;
    return out;
  }();
  return kinds;
}

std::vector<std::uint8_t> pc5_header_bytes(const Pc5Pdu& pdu) {
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(pdu.kind));
  for (auto id : {pdu.source.value, pdu.destination.value}) {
    out.push_back(static_cast<std::uint8_t>(id >> 16));
    out.push_back(static_cast<std::uint8_t>(id >> 8));
    out.push_back(static_cast<std::uint8_t>(id));
  }
  return out;
}

BitString encode_pc5_pdu(const Pc5Pdu& pdu) {
  require(pdu.source.value <= kL2IdMask && pdu.destination.value <= kL2IdMask,
          "Layer-2 id exceeds 24 bits");
  require(pdu.body.size() < (1u << 16), "PC5 body too long");
  BitWriter w;
  w.put(static_cast<std::uint8_t>(pdu.kind), 8);
  w.put(pdu.source.value, kL2IdBits);
  w.put(pdu.destination.value, kL2IdBits);
  w.put(pdu.counter, 32);
  w.put_bool(pdu.ciphered);
  w.put_bool(pdu.auth_tag.has_value());
  w.put(0, 6);
  w.put(pdu.body.size(), 16);
  for (auto b : pdu.body) w.put(b, 8);
  if (pdu.auth_tag) w.put(*pdu.auth_tag, kAuthTagBits);
  return w.take();
}

Pc5Pdu decode_pc5_pdu(const BitString& bits) {
  BitReader r(bits);
  Pc5Pdu pdu;
  const auto kind = pc5_kind_from_code(static_cast<std::uint8_t>(r.get(8)));
  require(kind.has_value(), "unknown PC5 message code");
  pdu.kind = *kind;
  pdu.source = L2Id{static_cast<std::uint32_t>(r.get(kL2IdBits))};
  pdu.destination = L2Id{static_cast<std::uint32_t>(r.get(kL2IdBits))};
  pdu.counter = static_cast<std::uint32_t>(r.get(32));
  pdu.ciphered = r.get_bool();
  const bool has_tag = r.get_bool();
  require(r.get(6) == 0, "PC5 reserved bits must be zero");
  const auto len = r.get(16);
  pdu.body.reserve(len);
  for (std::uint64_t i = 0; i < len; ++i) pdu.body.push_back(static_cast<std::uint8_t>(r.get(8)));
  if (has_tag) pdu.auth_tag = static_cast<std::uint32_t>(r.get(kAuthTagBits));
  require(r.remaining() == 0, "trailing bits after PC5 PDU");
  return pdu;
}

}  // namespace sidelink
