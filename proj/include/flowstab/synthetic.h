#pragma once

#include <cstdint>
#include <filesystem>

#include "flowstab/features.h"
#include "flowstab/time.h"

namespace flowstab::synthetic {

// Small three-area fixture: areas A (zones A1, A2) and B (zone B1) with
// 1 s frequency data, area C (zone C1) without. Links L1 (A-B) and L2 (B-C).
struct FixtureSpec {
  int hours = 48;
  std::uint64_t seed = 1;
  Timestamp start = Timestamp(std::chrono::sys_days(std::chrono::year(2019) / 1 / 7));
};

// Writes data files and config.json under `dir`; returns the config path.
std::filesystem::path write_fixture(const std::filesystem::path& dir, const FixtureSpec& spec = {});

// Flow dataset where unscheduled outflow from A = coupling * A.integral +
// noise, with noise std = noise_fraction * std(coupling * integral).
struct ControlLawSpec {
  std::size_t hours = 5000;
  double coupling = 0.8;
  double noise_fraction = 0.25;
  std::uint64_t seed = 11;
};

features::FlowDatasetInput control_law_input(const ControlLawSpec& spec);

// Table with target.y = f(x1..x4) + daily profile + noise and an
// hour_of_day feature.
struct BenchmarkSpec {
  std::size_t hours = 4000;
  double profile_amplitude = 1.0;
  double noise_std = 0.3;
  std::uint64_t seed = 5;
};

features::FeatureTable benchmark_table(const BenchmarkSpec& spec);

}  // namespace flowstab::synthetic
