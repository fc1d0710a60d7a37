#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sidelink/types.hpp"

namespace sidelink {

using LogValue = std::variant<std::int64_t, double, bool, std::string>;

struct LogRecord {
  Slot slot = 0;
  std::optional<NodeId> node;
  std::string kind;
  std::vector<std::pair<std::string, LogValue>> fields;

  LogRecord& with(std::string key, LogValue v) {
    fields.emplace_back(std::move(key), std::move(v));
    return *this;
  }
};

/// Line-delimited JSON event log. One object per record with keys slot, ue,
/// event, then the detail fields in insertion order.
class EventLog {
 public:
  LogRecord& add(Slot slot, std::optional<NodeId> node, std::string kind);

  const std::vector<LogRecord>& records() const { return records_; }
  std::size_t count(std::string_view kind) const;

  static std::string to_json_line(const LogRecord& r);
  void write(std::ostream& os) const;

 private:
  std::vector<LogRecord> records_;
};

}  // namespace sidelink
