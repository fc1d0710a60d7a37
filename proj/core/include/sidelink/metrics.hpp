#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sidelink/types.hpp"

namespace sidelink {

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How a per-bucket series folds into the total.
enum class Fold { Sum, WeightedMean, Last };

struct MetricColumn {
  std::string_view name;
  Fold fold;
};

inline constexpr std::string_view kMetricsCsvVersion = "# sidelink-sim metrics v1";

/// Column order is part of the file format; append only, and bump the
/// version line when changing it.
inline constexpr std::array<MetricColumn, 24> kMetricColumns{{
    {"syncVictims", Fold::Last},
    {"candidateSetRatio", Fold::WeightedMean},  // weighted by selections
    {"collisionCount", Fold::Sum},
    {"retransmissions", Fold::Sum},
    {"senderDelivered", Fold::Sum},
    {"receiverDelivered", Fold::Sum},
    {"linkFailures", Fold::Sum},
    {"replayRejects", Fold::Sum},
    {"trackingF1", Fold::Last},
    {"airtimeOverheadBits", Fold::Sum},
    {"selections", Fold::Sum},
    {"airtimeBits", Fold::Sum},
    {"syncSwitches", Fold::Sum},
    {"feedbackDiscarded", Fold::Sum},
    {"spoofInjected", Fold::Sum},
    {"spoofFlagged", Fold::Sum},
    {"legitFlagged", Fold::Sum},
    {"legitChecked", Fold::Sum},
    {"targetedTbs", Fold::Sum},
    {"targetedTbsMaxed", Fold::Sum},
    {"pc5Discards", Fold::Sum},
    {"linksEstablished", Fold::Sum},
    {"replayAccepted", Fold::Sum},
    {"attackFrames", Fold::Sum},
}};

inline constexpr std::size_t kMetricCount = kMetricColumns.size();

/// Index of a metric column; throws MetricsError for unknown names.
std::size_t metric_index(std::string_view name);

/// nullopt prints as NA (metric not applicable to the scenario).
using MetricValues = std::array<std::optional<double>, kMetricCount>;

struct MetricsBucket {
  Slot slot_start = 0;
  Slot slot_end = 0;  // exclusive
  MetricValues values{};

  std::optional<double> get(std::string_view name) const { return values[metric_index(name)]; }
};

struct MetricsReport {
  std::vector<MetricsBucket> series;

  /// Fold of the series: sums, the selection-weighted mean of
  /// candidateSetRatio, and the last non-NA value for gauges.
  MetricsBucket total() const;
  std::optional<double> total(std::string_view name) const { return total().get(name); }

  void write_csv(std::ostream& os) const;
};

/// Parsed metrics CSV: header columns and rows (the total row included, under
/// bucket label "total").
struct MetricsTable {
  std::vector<std::string> columns;
  struct Row {
    std::string bucket;
    std::vector<std::optional<double>> values;
  };
  std::vector<Row> rows;

  const Row& total_row() const;
};

/// Throws MetricsError on a missing version line or malformed rows.
MetricsTable parse_metrics_csv(std::string_view text, const std::string& source = "<csv>");

struct MetricDelta {
  std::string name;
  std::optional<double> a;
  std::optional<double> b;
  std::optional<double> absolute;  // b - a
  std::optional<double> relative;  // (b - a) / |a|, nullopt when a is 0 or NA
};

/// Per-metric deltas between the total rows. Throws MetricsError when the
/// metric columns differ.
std::vector<MetricDelta> compare(const MetricsTable& a, const MetricsTable& b);

}  // namespace sidelink
