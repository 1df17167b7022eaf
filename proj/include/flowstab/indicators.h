#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowstab/ingest.h"
#include "flowstab/time.h"

namespace flowstab::indicators {

struct IndicatorParams {
  double f_ref = 50.0;          // Hz
  int rocof_window = 60;        // s, counted from the hour boundary
  int smoothing_window = 30;    // s, moving average length
  double max_gap_fraction = 0.1;

  void validate() const;
};

struct HourlyIndicators {
  Timestamp hour{};
  double rocof = 0.0;     // Hz/s
  double nadir = 0.0;     // Hz, signed deviation of maximal magnitude
  double msd = 0.0;       // Hz^2
  double integral = 0.0;  // Hz*s
  bool valid = false;
};

// The single-indicator functions take a trace whose first sample sits on an
// hour boundary and evaluate at most its first 3600 samples. They return
// nullopt when the data is insufficient.

// Least-squares slope of the moving-average-smoothed deviation over the first
// rocof_window seconds. Each smoothed point is the mean of the valid samples
// in its window, placed at the mean time of those samples, so the slope is
// exact on linear input even with gaps. nullopt when the window's gap
// fraction exceeds max_gap_fraction or fewer than two smoothed points exist.
std::optional<double> compute_rocof(const ingest::FrequencyTrace& hour,
                                    const IndicatorParams& params);

// Signed deviation at the first sample of maximal |f - f_ref|.
std::optional<double> compute_nadir(const ingest::FrequencyTrace& hour,
                                    const IndicatorParams& params);

// Mean of (f - f_ref)^2 over valid samples.
std::optional<double> compute_msd(const ingest::FrequencyTrace& hour,
                                  const IndicatorParams& params);

// Left Riemann sum of (f - f_ref) * 1 s over valid samples.
std::optional<double> compute_integral(const ingest::FrequencyTrace& hour,
                                       const IndicatorParams& params);

// One record per full UTC hour covered by the trace. Hours whose gap fraction
// exceeds max_gap_fraction are flagged invalid; values that could not be
// computed (e.g. RoCoF with a gappy first minute) are NaN.
std::vector<HourlyIndicators> compute_hourly_indicators(const ingest::FrequencyTrace& trace,
                                                        const IndicatorParams& params);

// `hour,area,rocof_hz_per_s,nadir_hz,msd_hz2,integral_hz_s,valid`
std::string format_indicators_csv(const std::string& area,
                                  const std::vector<HourlyIndicators>& records);
std::vector<HourlyIndicators> parse_indicators_csv(const std::filesystem::path& path);

}  // namespace flowstab::indicators
