#include "flowstab/indicators.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "flowstab/csv.h"

namespace flowstab::indicators {
namespace {

constexpr std::size_t kSecondsPerHour = 3600;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t hour_length(const ingest::FrequencyTrace& trace) {
  return std::min(trace.size(), kSecondsPerHour);
}

bool is_valid(const ingest::FrequencyTrace& trace, std::size_t i) {
  return !trace.gap_mask[i] && !std::isnan(trace.samples[i]);
}

std::size_t gap_count(const ingest::FrequencyTrace& trace, std::size_t n) {
  std::size_t gaps = 0;
  for (std::size_t i = 0; i < n; ++i) gaps += is_valid(trace, i) ? 0 : 1;
  return gaps;
}

ingest::FrequencyTrace slice(const ingest::FrequencyTrace& trace, std::size_t offset,
                             std::size_t length) {
  ingest::FrequencyTrace out;
  out.area_id = trace.area_id;
  out.start = trace.start + std::chrono::seconds(offset);
  out.samples.assign(trace.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                     trace.samples.begin() + static_cast<std::ptrdiff_t>(offset + length));
  out.gap_mask.assign(trace.gap_mask.begin() + static_cast<std::ptrdiff_t>(offset),
                      trace.gap_mask.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return out;
}

}  // namespace

void IndicatorParams::validate() const {
  if (rocof_window <= 0 || smoothing_window <= 0) {
    throw std::invalid_argument("indicator windows must be positive");
  }
  if (rocof_window < 2 * smoothing_window) {
    throw std::invalid_argument("rocof_window must be at least twice smoothing_window");
  }
  if (!(max_gap_fraction >= 0.0 && max_gap_fraction <= 1.0)) {
    throw std::invalid_argument("max_gap_fraction must lie in [0, 1]");
  }
  if (rocof_window > static_cast<int>(kSecondsPerHour)) {
    throw std::invalid_argument("rocof_window longer than an hour");
  }
}

std::optional<double> compute_rocof(const ingest::FrequencyTrace& hour,
                                    const IndicatorParams& params) {
  const auto window = static_cast<std::size_t>(params.rocof_window);
  const auto smooth = static_cast<std::size_t>(params.smoothing_window);
  if (hour.size() < window) return std::nullopt;
  if (static_cast<double>(gap_count(hour, window)) >
      params.max_gap_fraction * static_cast<double>(window)) {
    return std::nullopt;
  }

  std::vector<double> times;
  std::vector<double> values;
  for (std::size_t j = 0; j + smooth <= window; ++j) {
    double sum_t = 0.0;
    double sum_d = 0.0;
    std::size_t count = 0;
    for (std::size_t k = j; k < j + smooth; ++k) {
      if (!is_valid(hour, k)) continue;
      sum_t += static_cast<double>(k);
      sum_d += hour.samples[k] - params.f_ref;
      ++count;
    }
    if (count == 0) continue;
    times.push_back(sum_t / static_cast<double>(count));
    values.push_back(sum_d / static_cast<double>(count));
  }
  if (times.size() < 2) return std::nullopt;

  const auto n = static_cast<double>(times.size());
  double mean_t = 0.0;
  double mean_v = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    mean_t += times[i];
    mean_v += values[i];
  }
  mean_t /= n;
  mean_v /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double dt = times[i] - mean_t;
    sxy += dt * (values[i] - mean_v);
    sxx += dt * dt;
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

std::optional<double> compute_nadir(const ingest::FrequencyTrace& hour,
                                    const IndicatorParams& params) {
  std::optional<double> best;
  for (std::size_t i = 0; i < hour_length(hour); ++i) {
    if (!is_valid(hour, i)) continue;
    const double d = hour.samples[i] - params.f_ref;
    if (!best || std::abs(d) > std::abs(*best)) best = d;
  }
  return best;
}

std::optional<double> compute_msd(const ingest::FrequencyTrace& hour,
                                  const IndicatorParams& params) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < hour_length(hour); ++i) {
    if (!is_valid(hour, i)) continue;
    const double d = hour.samples[i] - params.f_ref;
    sum += d * d;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

std::optional<double> compute_integral(const ingest::FrequencyTrace& hour,
                                       const IndicatorParams& params) {
  constexpr double kDt = 1.0;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < hour_length(hour); ++i) {
    if (!is_valid(hour, i)) continue;
    sum += (hour.samples[i] - params.f_ref) * kDt;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum;
}

std::vector<HourlyIndicators> compute_hourly_indicators(const ingest::FrequencyTrace& trace,
                                                        const IndicatorParams& params) {
  params.validate();
  std::vector<HourlyIndicators> out;
  if (trace.size() == 0) return out;
  Timestamp hour = floor_hour(trace.start);
  if (hour < trace.start) hour += kHour;
  for (; hour + kHour <= trace.end(); hour += kHour) {
    const auto offset = static_cast<std::size_t>((hour - trace.start).count());
    const ingest::FrequencyTrace h = slice(trace, offset, kSecondsPerHour);
    HourlyIndicators rec;
    rec.hour = hour;
    const auto rocof = compute_rocof(h, params);
    const auto nadir = compute_nadir(h, params);
    const auto msd = compute_msd(h, params);
    const auto integral = compute_integral(h, params);
    rec.rocof = rocof.value_or(kNaN);
    rec.nadir = nadir.value_or(kNaN);
    rec.msd = msd.value_or(kNaN);
    rec.integral = integral.value_or(kNaN);
    const double gap_fraction =
        static_cast<double>(gap_count(h, kSecondsPerHour)) / static_cast<double>(kSecondsPerHour);
    // Undefined indicators stay NaN; validity is about data coverage.
    rec.valid = gap_fraction <= params.max_gap_fraction;
    out.push_back(rec);
  }
  return out;
}

std::string format_indicators_csv(const std::string& area,
                                  const std::vector<HourlyIndicators>& records) {
  std::string out = "hour,area,rocof_hz_per_s,nadir_hz,msd_hz2,integral_hz_s,valid\n";
  for (const auto& r : records) {
    out += format_timestamp(r.hour);
    out += ',' + area;
    out += ',' + csv::format_double(r.rocof);
    out += ',' + csv::format_double(r.nadir);
    out += ',' + csv::format_double(r.msd);
    out += ',' + csv::format_double(r.integral);
    out += r.valid ? ",true\n" : ",false\n";
  }
  return out;
}

std::vector<HourlyIndicators> parse_indicators_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  csv::require_header(
      table, {"hour", "area", "rocof_hz_per_s", "nadir_hz", "msd_hz2", "integral_hz_s", "valid"},
      path);
  std::vector<HourlyIndicators> out;
  out.reserve(table.rows.size());
  for (const auto& [line, f] : table.rows) {
    if (f.size() < 7) throw ParseError("indicator row needs 7 fields", line);
    HourlyIndicators r;
    r.hour = parse_timestamp(f[0]);
    r.rocof = csv::parse_double(f[2]).value_or(kNaN);
    r.nadir = csv::parse_double(f[3]).value_or(kNaN);
    r.msd = csv::parse_double(f[4]).value_or(kNaN);
    r.integral = csv::parse_double(f[5]).value_or(kNaN);
    r.valid = f[6] == "true";
    out.push_back(r);
  }
  return out;
}

}  // namespace flowstab::indicators
