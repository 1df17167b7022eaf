#include "flowstab/ingest.h"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace flowstab::ingest {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool plausible(double hz) { return hz >= kMinPlausibleHz && hz <= kMaxPlausibleHz; }

void check_resolution(int minutes) {
  if (minutes <= 0 || 60 % minutes != 0) {
    throw std::invalid_argument("resolution must divide 60 minutes, got " +
                                std::to_string(minutes));
  }
}

}  // namespace

std::size_t FrequencyTrace::gap_count() const {
  std::size_t n = 0;
  for (bool g : gap_mask) n += g ? 1 : 0;
  return n;
}

void FrequencyTrace::validate() const {
  if (gap_mask.size() != samples.size()) {
    throw std::invalid_argument("gap mask length differs from sample count");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!gap_mask[i] && !plausible(samples[i])) {
      throw std::invalid_argument("implausible non-gap sample at offset " + std::to_string(i));
    }
  }
}

double TabularSeries::value_at(Timestamp t) const {
  if (t < start) return kNaN;
  const auto offset = t - start;
  if (offset % step() != std::chrono::seconds::zero()) return kNaN;
  const auto idx = static_cast<std::size_t>(offset / step());
  return idx < values.size() ? values[idx] : kNaN;
}

void TabularSeries::validate() const {
  check_resolution(resolution_minutes);
  if (start.time_since_epoch() % step() != std::chrono::seconds::zero()) {
    throw std::invalid_argument("series start is not on the resolution grid");
  }
}

FrequencyTrace parse_frequency_csv(const std::filesystem::path& path, const std::string& area_id) {
  const csv::Table table = csv::read(path);
  csv::require_header(table, {"timestamp", "frequency_hz"}, path);

  struct Row {
    Timestamp t;
    std::optional<double> hz;
  };
  std::vector<Row> rows;
  rows.reserve(table.rows.size());
  for (const auto& [line, fields] : table.rows) {
    if (fields.empty()) continue;
    Timestamp t;
    try {
      t = parse_timestamp(fields[0]);
    } catch (const std::invalid_argument& e) {
      if (std::string_view(e.what()).find("sub-second") != std::string_view::npos) {
        throw ParseError(e.what(), line);
      }
      continue;
    }
    if (!rows.empty() && t <= rows.back().t) {
      throw ParseError("non-increasing timestamp " + format_timestamp(t) + " in " + path.string(),
                       line);
    }
    rows.push_back({t, fields.size() > 1 ? csv::parse_double(fields[1]) : std::nullopt});
  }
  if (rows.empty()) throw ParseError("no parseable rows in " + path.string());

  FrequencyTrace trace;
  trace.area_id = area_id;
  trace.start = rows.front().t;
  const auto n = static_cast<std::size_t>((rows.back().t - rows.front().t).count()) + 1;
  trace.samples.assign(n, kNaN);
  trace.gap_mask.assign(n, true);
  for (const Row& row : rows) {
    const auto i = static_cast<std::size_t>((row.t - trace.start).count());
    if (row.hz && plausible(*row.hz)) {
      trace.samples[i] = *row.hz;
      trace.gap_mask[i] = false;
    }
  }
  return trace;
}

std::string format_frequency_csv(const FrequencyTrace& trace) {
  std::string out = "timestamp,frequency_hz\n";
  out.reserve(out.size() + trace.size() * 32);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace.gap_mask[i]) continue;
    out += format_timestamp(trace.start + std::chrono::seconds(i));
    out += ',';
    out += csv::format_double(trace.samples[i]);
    out += '\n';
  }
  return out;
}

TabularSeries parse_tabular_csv(const std::filesystem::path& path, const std::string& name,
                                const std::string& zone_id, int resolution_minutes) {
  check_resolution(resolution_minutes);
  const csv::Table table = csv::read(path);
  csv::require_header(table, {"timestamp", "value"}, path);
  const std::chrono::seconds step = std::chrono::minutes(resolution_minutes);

  std::vector<std::pair<Timestamp, double>> rows;
  rows.reserve(table.rows.size());
  for (const auto& [line, fields] : table.rows) {
    Timestamp t;
    try {
      t = parse_timestamp(fields.at(0));
    } catch (const std::exception& e) {
      throw ParseError(std::string("bad timestamp: ") + e.what(), line);
    }
    if (t.time_since_epoch() % step != std::chrono::seconds::zero()) {
      throw ParseError("timestamp " + format_timestamp(t) + " inconsistent with " +
                           std::to_string(resolution_minutes) + "-minute resolution",
                       line);
    }
    if (!rows.empty()) {
      if (t == rows.back().first) {
        throw ParseError("duplicate timestamp " + format_timestamp(t) + " in " + path.string(),
                         line);
      }
      if (t < rows.back().first) {
        throw ParseError("decreasing timestamp " + format_timestamp(t) + " in " + path.string(),
                         line);
      }
    }
    const auto value = fields.size() > 1 ? csv::parse_double(fields[1]) : std::nullopt;
    rows.emplace_back(t, value && std::isfinite(*value) ? *value : kNaN);
  }
  if (rows.empty()) throw ParseError("no rows in " + path.string());

  TabularSeries series;
  series.name = name;
  series.zone_id = zone_id;
  series.resolution_minutes = resolution_minutes;
  series.start = rows.front().first;
  series.values.assign(static_cast<std::size_t>((rows.back().first - series.start) / step) + 1,
                       kNaN);
  for (const auto& [t, v] : rows) {
    series.values[static_cast<std::size_t>((t - series.start) / step)] = v;
  }
  return series;
}

std::string format_tabular_csv(const TabularSeries& series) {
  std::string out = "timestamp,value\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out += format_timestamp(series.timestamp(i));
    out += ',';
    out += csv::format_double(series.values[i]);
    out += '\n';
  }
  return out;
}

TabularSeries resample_hourly(const TabularSeries& series) {
  series.validate();
  if (series.resolution_minutes == 60) return series;

  TabularSeries out;
  out.name = series.name;
  out.zone_id = series.zone_id;
  out.resolution_minutes = 60;
  if (series.values.empty()) {
    out.start = floor_hour(series.start);
    return out;
  }
  out.start = floor_hour(series.start);
  const Timestamp last_hour = floor_hour(series.end() - std::chrono::seconds(1));
  const auto hours = static_cast<std::size_t>((last_hour - out.start) / kHour) + 1;
  const auto per_hour = static_cast<std::size_t>(60 / series.resolution_minutes);
  out.values.assign(hours, kNaN);
  for (std::size_t h = 0; h < hours; ++h) {
    const Timestamp hour = out.start + kHour * static_cast<std::int64_t>(h);
    double sum = 0.0;
    bool complete = true;
    for (std::size_t k = 0; k < per_hour && complete; ++k) {
      const double v = series.value_at(hour + series.step() * static_cast<std::int64_t>(k));
      if (std::isnan(v)) {
        complete = false;
      } else {
        sum += v;
      }
    }
    if (complete) out.values[h] = sum / static_cast<double>(per_hour);
  }
  return out;
}

std::map<std::string, OutageCalendar> parse_outage_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  csv::require_header(table, {"link_id", "start", "end"}, path);
  std::map<std::string, OutageCalendar> calendars;
  for (const auto& [line, fields] : table.rows) {
    if (fields.size() < 3) throw ParseError("outage row needs link_id,start,end", line);
    OutageInterval interval;
    try {
      interval.start = parse_timestamp(fields[1]);
      interval.end = parse_timestamp(fields[2]);
    } catch (const std::exception& e) {
      throw ParseError(std::string("bad outage timestamp: ") + e.what(), line);
    }
    if (!(interval.start < interval.end)) {
      throw ParseError("outage interval must have start < end", line);
    }
    auto& cal = calendars[fields[0]];
    cal.link_id = fields[0];
    cal.intervals.push_back(interval);
  }
  return calendars;
}

}  // namespace flowstab::ingest
