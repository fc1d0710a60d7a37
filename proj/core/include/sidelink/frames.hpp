#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "sidelink/bits.hpp"
#include "sidelink/resource_pool.hpp"
#include "sidelink/types.hpp"

namespace sidelink {

// ---------------------------------------------------------------------------
// MIB-SL
// ---------------------------------------------------------------------------

/// Master Information Block Sidelink. Fields are serialized in declaration
/// order, each big-endian: 12 + 1 + 10 + 7 + 2 = 32 bits.
struct MibSl {
  std::uint16_t tdd_config = 0;        // 12 bits
  bool in_coverage = false;            // 1 bit
  std::uint16_t direct_frame_number = 0;  // 10 bits, < 1024
  std::uint8_t slot_index = 0;         // 7 bits, < 128
  std::uint8_t reserved = 0;           // 2 bits

  friend bool operator==(const MibSl&, const MibSl&) = default;
};

inline constexpr std::size_t kMibSlBits = 32;

BitString encode_mib_sl(const MibSl& m);
MibSl decode_mib_sl(const BitString& bits);

// ---------------------------------------------------------------------------
// SLSS identity
// ---------------------------------------------------------------------------

inline constexpr int kSPssCount = 2;
inline constexpr int kSSssCount = 336;
inline constexpr int kSlssIdCount = kSPssCount * kSSssCount;  // 672

enum class CoverageClass { GnssDirect, InCoverage, OutOfCoverage };

std::string_view to_string(CoverageClass c);

/// Coverage class is a pure function of the id: 0 -> GNSS, 1..335 -> in
/// coverage, 336..671 -> out of coverage.
CoverageClass coverage_class_of(int slss_id);

struct SlssIdentity {
  int s_pss = 0;
  int s_sss = 0;
  int slss_id = 0;
  CoverageClass coverage = CoverageClass::GnssDirect;
  bool priority_indicator = false;  // I_C: 1 = directly synced to GNSS/gNodeB

  friend bool operator==(const SlssIdentity&, const SlssIdentity&) = default;
};

SlssIdentity slss_from_sequences(int s_pss, int s_sss, bool priority_indicator = false);
SlssIdentity slss_from_id(int slss_id, bool priority_indicator = false);

/// S-SSB payload as seen on the PSBCH: 10-bit SLSS id, I_C, then MIB-SL,
/// optionally followed by an authentication tag when signed.
struct SsbFrame {
  SlssIdentity slss;
  MibSl mib;
  std::optional<std::uint32_t> tag;
  unsigned tag_bits = 0;

  friend bool operator==(const SsbFrame&, const SsbFrame&) = default;
};

inline constexpr std::size_t kSsbHeaderBits = 10 + 1;

BitString encode_ssb(const SsbFrame& f);
/// `tag_bits` must match the signer's configuration (0 when unsigned).
SsbFrame decode_ssb(const BitString& bits, unsigned tag_bits);
/// Bits covered by the tag: the SLSS header and the MIB.
BitString ssb_signed_portion(const SsbFrame& f);

// ---------------------------------------------------------------------------
// SCI format 1-A
// ---------------------------------------------------------------------------

/// Contiguous subchannel allocation reused by every reserved resource. With
/// sl-MaxNumPerReserve = 3 the retransmission resources may start at a
/// different subchannel than the initial one.
struct FrequencyAllocation {
  int length = 1;
  int start_initial = 0;
  int start_retx = 0;  // ignored (== start_initial) when max_num_per_reserve = 2

  friend bool operator==(const FrequencyAllocation&, const FrequencyAllocation&) = default;
};

/// Slot offsets (1..31) of the reserved retransmission resources relative to
/// the SCI slot; 0 means "not reserved". second_gap requires first_gap and
/// satisfies first_gap < second_gap.
struct TimeAllocation {
  int first_gap = 0;
  int second_gap = 0;

  friend bool operator==(const TimeAllocation&, const TimeAllocation&) = default;
};

struct Sci1A {
  std::uint8_t priority = 0;                     // 3 bits
  std::uint32_t frequency_resource_assignment = 0;
  std::uint32_t time_resource_assignment = 0;    // 5 or 9 bits
  std::uint32_t resource_reservation_period = 0;  // index into period list
  std::uint8_t dmrs_pattern = 0;
  std::uint8_t second_stage_format = 0;          // 2 bits
  std::uint8_t beta_offset = 0;                  // 2 bits
  std::uint8_t dmrs_port_count = 0;              // 1 bit
  std::uint8_t mcs = 0;                          // 5 bits
  std::uint8_t additional_mcs_table = 0;
  std::uint8_t psfch_overhead = 0;

  friend bool operator==(const Sci1A&, const Sci1A&) = default;
};

/// Per-field widths of SCI 1-A for a given pool.
///
/// frequencyResourceAssignment counts every (length, start...) combination of a
/// contiguous allocation over N subchannels:
///   sl-MaxNumPerReserve = 2:  N(N+1)/2        (length, start)
///   sl-MaxNumPerReserve = 3:  N(N+1)(2N+1)/6  (length, start_initial, start_retx)
/// and the field is ceil(log2(count)) bits wide.
struct Sci1aLayout {
  unsigned priority = 3;
  unsigned frequency = 0;
  unsigned time = 0;
  unsigned period = 0;
  unsigned dmrs_pattern = 0;
  unsigned second_stage_format = 2;
  unsigned beta_offset = 2;
  unsigned dmrs_port_count = 1;
  unsigned mcs = 5;
  unsigned additional_mcs_table = 0;
  unsigned psfch_overhead = 0;

  std::uint64_t frequency_values = 1;
  std::uint64_t time_values = 1;

  unsigned total() const;
};

Sci1aLayout sci1a_layout(const ResourcePool& pool);

std::uint32_t encode_frequency_allocation(const FrequencyAllocation& a, const ResourcePool& pool);
FrequencyAllocation decode_frequency_allocation(std::uint32_t value, const ResourcePool& pool);
std::uint32_t encode_time_allocation(const TimeAllocation& a, const ResourcePool& pool);
TimeAllocation decode_time_allocation(std::uint32_t value, const ResourcePool& pool);

BitString encode_sci1a(const Sci1A& s, const ResourcePool& pool);
Sci1A decode_sci1a(const BitString& bits, const ResourcePool& pool);

// ---------------------------------------------------------------------------
// SCI format 2-A
// ---------------------------------------------------------------------------

enum class CastType : std::uint8_t { Unicast = 0, Groupcast = 1, Broadcast = 2 };

struct Sci2A {
  std::uint8_t harq_process = 0;    // 4 bits
  bool ndi = false;                 // 1 bit
  std::uint8_t redundancy_version = 0;  // 2 bits
  std::uint8_t source_id = 0;       // 8 bits
  std::uint16_t destination_id = 0;  // 16 bits
  bool harq_feedback_enabled = false;  // 1 bit
  CastType cast_type = CastType::Unicast;  // 2 bits
  bool csi_request = false;         // 1 bit

  friend bool operator==(const Sci2A&, const Sci2A&) = default;
};

inline constexpr std::size_t kSci2aBits = 4 + 1 + 2 + 8 + 16 + 1 + 2 + 1;

BitString encode_sci2a(const Sci2A& s);
Sci2A decode_sci2a(const BitString& bits);

// ---------------------------------------------------------------------------
// PC5 signalling
// ---------------------------------------------------------------------------

enum class Pc5MessageKind : std::uint8_t {
  EstablishmentRequest = 1,
  EstablishmentAccept,
  ModificationRequest,
  ModificationAccept,
  ReleaseRequest,
  ReleaseAccept,
  KeepaliveRequest,
  KeepaliveResponse,
  AuthenticationRequest,
  AuthenticationResponse,
  AuthenticationReject,
  SecurityModeCommand,
  SecurityModeComplete,
  SecurityModeReject,
  RekeyingRequest,
  RekeyingResponse,
  IdentifierUpdateRequest,
  IdentifierUpdateAccept,
  IdentifierUpdateAck,
  IdentifierUpdateReject,
  ModificationReject,
  EstablishmentReject,
  AuthenticationFailure,
};

inline constexpr int kPc5MessageKindCount = 23;

enum class SecurityStage { BeforeSecurity, DuringSecurity, AfterSecurity };

struct ProtectionProfile {
  bool ciphering = false;
  bool integrity = false;
  SecurityStage stage = SecurityStage::BeforeSecurity;

  friend bool operator==(const ProtectionProfile&, const ProtectionProfile&) = default;
};

ProtectionProfile protection_profile(Pc5MessageKind kind);
std::string_view to_string(Pc5MessageKind kind);
std::string_view to_string(SecurityStage stage);
std::optional<Pc5MessageKind> pc5_kind_from_code(std::uint8_t code);
const std::array<Pc5MessageKind, kPc5MessageKindCount>& all_pc5_kinds();

inline constexpr unsigned kAuthTagBits = 32;

/// Over-the-air PC5-S PDU. `body` holds the serialized Pc5Fields, possibly
/// ciphered; see pc5.hpp for the field codec.
struct Pc5Pdu {
  Pc5MessageKind kind = Pc5MessageKind::EstablishmentRequest;
  L2Id source;
  L2Id destination;
  std::uint32_t counter = 0;
  bool ciphered = false;
  std::vector<std::uint8_t> body;
  std::optional<std::uint32_t> auth_tag;

  friend bool operator==(const Pc5Pdu&, const Pc5Pdu&) = default;
};

/// Header bytes covered by the integrity tag: kind, source, destination.
std::vector<std::uint8_t> pc5_header_bytes(const Pc5Pdu& pdu);

BitString encode_pc5_pdu(const Pc5Pdu& pdu);
Pc5Pdu decode_pc5_pdu(const BitString& bits);

}  // namespace sidelink
