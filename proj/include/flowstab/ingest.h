#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "flowstab/csv.h"
#include "flowstab/time.h"

namespace flowstab::ingest {

inline constexpr double kMinPlausibleHz = 45.0;
inline constexpr double kMaxPlausibleHz = 55.0;

// 1 Hz frequency recording of one synchronous area. Sample i belongs to
// start + i seconds. Gap samples hold NaN.
struct FrequencyTrace {
  std::string area_id;
  Timestamp start{};
  std::vector<double> samples;
  std::vector<bool> gap_mask;

  std::size_t size() const { return samples.size(); }
  Timestamp end() const { return start + std::chrono::seconds(samples.size()); }
  std::size_t gap_count() const;

  // Throws std::invalid_argument when an invariant does not hold.
  void validate() const;
};

// Regular grid of (timestamp, value) rows. Missing rows hold NaN.
struct TabularSeries {
  std::string name;
  std::string zone_id;
  int resolution_minutes = 60;
  Timestamp start{};
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  std::chrono::seconds step() const { return std::chrono::minutes(resolution_minutes); }
  Timestamp timestamp(std::size_t i) const {
    return start + step() * static_cast<std::int64_t>(i);
  }
  Timestamp end() const { return timestamp(values.size()); }

  // NaN when t is outside the series or not on its grid.
  double value_at(Timestamp t) const;

  void validate() const;
};

struct OutageInterval {
  Timestamp start{};
  Timestamp end{};
  std::chrono::seconds duration() const { return end - start; }
};

struct OutageCalendar {
  std::string link_id;
  std::vector<OutageInterval> intervals;
};

// Reads `timestamp,frequency_hz`. Absent seconds, non-numeric values and
// values outside [45, 55] Hz become gaps. Rows whose timestamp cannot be
// parsed are skipped. Throws ParseError for unreadable files, files without
// any usable row, non-increasing or sub-second timestamps.
FrequencyTrace parse_frequency_csv(const std::filesystem::path& path, const std::string& area_id);

// Inverse of parse_frequency_csv for non-gap samples; gap seconds are omitted.
std::string format_frequency_csv(const FrequencyTrace& trace);

// Reads `timestamp,value` at the declared resolution. Missing rows and empty
// values become NaN. Throws ParseError on duplicate or decreasing timestamps
// and on timestamps off the resolution grid.
TabularSeries parse_tabular_csv(const std::filesystem::path& path, const std::string& name,
                                const std::string& zone_id, int resolution_minutes = 60);

std::string format_tabular_csv(const TabularSeries& series);

// Hourly means. An hour with any missing constituent value is missing.
// Requires resolution_minutes <= 60 and dividing 60.
TabularSeries resample_hourly(const TabularSeries& series);

// Reads `link_id,start,end`, grouped by link.
std::map<std::string, OutageCalendar> parse_outage_csv(const std::filesystem::path& path);

}  // namespace flowstab::ingest
