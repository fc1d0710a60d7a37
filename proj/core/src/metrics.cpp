#include "sidelink/metrics.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <sstream>

namespace sidelink {

namespace {

constexpr std::string_view kFixedColumns[] = {"bucket", "slot_start", "slot_end"};

std::string format(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v == 0.0 ? 0.0 : *v);
  return buf;
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.emplace_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

std::size_t metric_index(std::string_view name) {
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    if (kMetricColumns[i].name == name) return i;
  }
  throw MetricsError("unknown metric '" + std::string(name) + "'");
}

MetricsBucket MetricsReport::total() const {
  MetricsBucket t;
  if (series.empty()) return t;
  t.slot_start = series.front().slot_start;
  t.slot_end = series.back().slot_end;
  const std::size_t sel = metric_index("selections");
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    std::optional<double> acc;
    double weight = 0.0;
    for (const auto& b : series) {
      const auto& v = b.values[i];
      if (!v) continue;
      switch (kMetricColumns[i].fold) {
        case Fold::Sum:
          acc = acc.value_or(0.0) + *v;
          break;
        case Fold::Last:
          acc = *v;
          break;
        case Fold::WeightedMean: {
          const double w = b.values[sel].value_or(0.0);
          acc = acc.value_or(0.0) + *v * w;
          weight += w;
          break;
        }
      }
    }
    if (kMetricColumns[i].fold == Fold::WeightedMean) {
      t.values[i] = weight > 0.0 ? std::optional<double>(*acc / weight) : std::nullopt;
    } else {
      t.values[i] = acc;
    }
  }
  return t;
}

void MetricsReport::write_csv(std::ostream& os) const {
  os << kMetricsCsvVersion << '\n';
  os << "bucket,slot_start,slot_end";
  for (const auto& c : kMetricColumns) os << ',' << c.name;
  os << '\n';
  auto row = [&](const std::string& label, const MetricsBucket& b) {
    os << label << ',' << b.slot_start << ',' << b.slot_end;
    for (const auto& v : b.values) os << ',' << format(v);
    os << '\n';
  };
  for (std::size_t i = 0; i < series.size(); ++i) row(std::to_string(i), series[i]);
  row("total", total());
}

const MetricsTable::Row& MetricsTable::total_row() const {
  for (const auto& r : rows) {
    if (r.bucket == "total") return r;
  }
  throw MetricsError("metrics table has no total row");
}

MetricsTable parse_metrics_csv(std::string_view text, const std::string& source) {
  MetricsTable t;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw MetricsError(source + ":" + std::to_string(lineno) + ": " + what);
  };
  if (!std::getline(in, line)) fail("empty file");
  ++lineno;
  if (line.rfind("# sidelink-sim metrics ", 0) != 0) fail("missing metrics version line");
  if (line != kMetricsCsvVersion) fail("unsupported metrics version '" + line + "'");
  if (!std::getline(in, line)) fail("missing header");
  ++lineno;
  const auto header = split(line);
  if (header.size() < 3) fail("header too short");
  for (std::size_t i = 0; i < 3; ++i) {
    if (header[i] != kFixedColumns[i]) fail("expected column '" + std::string(kFixedColumns[i]) + "'");
  }
  t.columns.assign(header.begin() + 3, header.end());
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) fail("expected " + std::to_string(header.size()) + " cells");
    MetricsTable::Row r;
    r.bucket = cells[0];
    for (std::size_t i = 3; i < cells.size(); ++i) {
      if (cells[i] == "NA") {
        r.values.emplace_back();
        continue;
      }
      try {
        std::size_t used = 0;
        const double v = std::stod(cells[i], &used);
        if (used != cells[i].size()) fail("bad number '" + cells[i] + "'");
        r.values.emplace_back(v);
      } catch (const std::logic_error&) {
        fail("bad number '" + cells[i] + "'");
      }
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

std::vector<MetricDelta> compare(const MetricsTable& a, const MetricsTable& b) {
  if (a.columns != b.columns) {
    std::string msg = "metric sets differ:";
    for (const auto& c : a.columns) {
      if (std::find(b.columns.begin(), b.columns.end(), c) == b.columns.end()) msg += " -" + c;
    }
    for (const auto& c : b.columns) {
      if (std::find(a.columns.begin(), a.columns.end(), c) == a.columns.end()) msg += " +" + c;
    }
    if (a.columns.size() == b.columns.size() && msg == "metric sets differ:") msg = "metric column order differs";
    throw MetricsError(msg);
  }
  const auto& ta = a.total_row();
  const auto& tb = b.total_row();
  std::vector<MetricDelta> out;
  for (std::size_t i = 0; i < a.columns.size(); ++i) {
    MetricDelta d{a.columns[i], ta.values[i], tb.values[i], std::nullopt, std::nullopt};
    if (d.a && d.b) {
      d.absolute = *d.b - *d.a;
      if (*d.a != 0.0) d.relative = *d.absolute / std::abs(*d.a);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace sidelink
