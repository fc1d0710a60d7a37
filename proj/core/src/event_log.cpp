#include "sidelink/event_log.hpp"

#include <algorithm>

#include "json.hpp"

namespace sidelink {

LogRecord& EventLog::add(Slot slot, std::optional<NodeId> node, std::string kind) {
  records_.push_back(LogRecord{slot, node, std::move(kind), {}});
  return records_.back();
}

std::size_t EventLog::count(std::string_view kind) const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [&](const LogRecord& r) { return r.kind == kind; }));
}

std::string EventLog::to_json_line(const LogRecord& r) {
  nlohmann::ordered_json j;
  j["slot"] = r.slot;
  if (r.node) {
    j["ue"] = r.node->value;
  } else {
    j["ue"] = nullptr;
  }
  j["event"] = r.kind;
  for (const auto& [k, v] : r.fields) {
    std::visit([&, &key = k](const auto& x) { j[key] = x; }, v);
  }
  return j.dump();
}

void EventLog::write(std::ostream& os) const {
  for (const auto& r : records_) os << to_json_line(r) << '\n';
}

}  // namespace sidelink
