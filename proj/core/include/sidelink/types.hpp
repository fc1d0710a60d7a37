#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace sidelink {

/// Absolute slot index since simulation start.
using Slot = std::int64_t;

/// Simulation-side identity of a node (UE, attacker, gNodeB). Never appears on
/// the air interface; protocol code must use Layer-2 ids instead.
struct NodeId {
  std::uint32_t value = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

/// Layer-2 identifiers are 24 bits wide throughout the simulator.
inline constexpr unsigned kL2IdBits = 24;
inline constexpr std::uint32_t kL2IdMask = (1u << kL2IdBits) - 1;

struct L2Id {
  std::uint32_t value = 0;
  friend auto operator<=>(const L2Id&, const L2Id&) = default;
};

inline std::string to_string(NodeId id) { return std::to_string(id.value); }
inline std::string to_string(L2Id id) { return std::to_string(id.value); }

}  // namespace sidelink

template <>
struct std::hash<sidelink::NodeId> {
  std::size_t operator()(sidelink::NodeId id) const noexcept { return id.value; }
};

template <>
struct std::hash<sidelink::L2Id> {
  std::size_t operator()(sidelink::L2Id id) const noexcept { return id.value; }
};
