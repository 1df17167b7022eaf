#include "flowstab/synthetic.h"

#include <cmath>
#include <numbers>
#include <random>

#include "flowstab/csv.h"
#include "flowstab/ingest.h"
#include "json.hpp"

namespace flowstab::synthetic {
namespace {

using features::Column;
using features::ColumnRole;
using ingest::TabularSeries;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double round_to(double v, double step) { return std::round(v / step) * step; }

TabularSeries make_series(Timestamp start, int resolution, std::size_t n) {
  TabularSeries s;
  s.resolution_minutes = resolution;
  s.start = start;
  s.values.assign(n, 0.0);
  return s;
}

void write_series(const std::filesystem::path& path, const TabularSeries& s) {
  csv::write_file(path, ingest::format_tabular_csv(s));
}

// Hourly step amplitudes decaying within the hour, plus slow drift and noise.
ingest::FrequencyTrace make_trace(const std::string& area, Timestamp start, int hours,
                                  const std::vector<double>& steps, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 0.002);
  ingest::FrequencyTrace t;
  t.area_id = area;
  t.start = start;
  const std::size_t n = static_cast<std::size_t>(hours) * 3600;
  t.samples.resize(n);
  t.gap_mask.assign(n, false);
  double ar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t h = i / 3600;
    const double s = static_cast<double>(i % 3600);
    ar = 0.98 * ar + noise(rng);
    const double f = 50.0 + steps[h] * std::exp(-s / 600.0) +
                     0.01 * std::sin(kTwoPi * static_cast<double>(i) / 86400.0) + ar;
    t.samples[i] = round_to(f, 1e-4);
  }
  return t;
}

double hourly_integral(const std::vector<double>& steps, std::size_t h) {
  // Integral of steps[h] * exp(-s/600) over one hour.
  return steps[h] * 600.0 * (1.0 - std::exp(-6.0));
}

}  // namespace

std::filesystem::path write_fixture(const std::filesystem::path& dir, const FixtureSpec& spec) {
  using nlohmann::json;
  if (spec.hours < 2) throw std::invalid_argument("fixture needs at least two hours");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto hours = static_cast<std::size_t>(spec.hours);

  // Frequency.
  std::map<std::string, std::vector<double>> steps;
  for (const std::string area : {"A", "B"}) {
    auto& v = steps[area];
    for (std::size_t h = 0; h < hours; ++h) v.push_back(0.04 * unit(rng));
  }
  {
    auto a = make_trace("A", spec.start, spec.hours, steps["A"], rng);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (uni(rng) < 0.01) a.gap_mask[i] = true;
    }
    // One hour with too many gaps.
    const std::size_t bad = std::min<std::size_t>(5, hours - 1) * 3600;
    for (std::size_t i = bad; i < bad + 900; ++i) a.gap_mask[i] = true;
    csv::write_file(dir / "frequency" / "A.csv", ingest::format_frequency_csv(a));

    auto b = make_trace("B", spec.start, spec.hours, steps["B"], rng);
    // Implausible readings the parser treats as gaps.
    for (std::size_t i = 100; i < b.size(); i += 7919) b.samples[i] = 60.0;
    csv::write_file(dir / "frequency" / "B.csv", ingest::format_frequency_csv(b));
  }

  // Zone series.
  struct ZoneDef {
    std::string id;
    int load_resolution;
    double scale;
  };
  const std::vector<ZoneDef> zones = {{"A1", 15, 30000}, {"A2", 15, 12000}, {"B1", 60, 9000},
                                      {"C1", 60, 2000}};
  const std::vector<std::string> gen_types = {"nuclear", "hydro", "wind", "solar"};
  for (const auto& z : zones) {
    const int per_hour = 60 / z.load_resolution;
    TabularSeries load = make_series(spec.start, z.load_resolution, hours * per_hour);
    for (std::size_t i = 0; i < load.size(); ++i) {
      const double t = static_cast<double>(i) / per_hour;
      load.values[i] = round_to(
          z.scale * (1.0 + 0.15 * std::sin(kTwoPi * (t - 6.0) / 24.0)) + 0.01 * z.scale * unit(rng),
          0.1);
    }
    // A missing quarter-hour makes that hour missing after resampling.
    if (z.id == "A2" && load.size() > 40) load.values[40] = std::nan("");
    TabularSeries load_hourly = ingest::resample_hourly(load);
    TabularSeries load_da = make_series(spec.start, 60, hours);
    TabularSeries wind = make_series(spec.start, 60, hours);
    TabularSeries price = make_series(spec.start, 60, hours);
    double w = 0.3;
    for (std::size_t h = 0; h < hours; ++h) {
      const double actual = std::isnan(load_hourly.values[h]) ? z.scale : load_hourly.values[h];
      load_da.values[h] = round_to(actual + 0.02 * z.scale * unit(rng), 0.1);
      w = std::clamp(w + 0.05 * unit(rng), 0.0, 1.0);
      wind.values[h] = round_to(0.2 * z.scale * w, 0.1);
      price.values[h] = round_to(40.0 + 10.0 * unit(rng), 0.01);
    }
    write_series(dir / "series" / z.id / "load.csv", load);
    write_series(dir / "series" / z.id / "load_da.csv", load_da);
    write_series(dir / "series" / z.id / "wind.csv", wind);
    write_series(dir / "series" / z.id / "price.csv", price);
    for (const auto& type : gen_types) {
      TabularSeries g = make_series(spec.start, 60, hours);
      for (std::size_t h = 0; h < hours; ++h) {
        g.values[h] = round_to(std::max(0.0, 0.1 * z.scale * (1.0 + 0.2 * unit(rng))), 0.1);
      }
      write_series(dir / "generation" / z.id / (type + ".csv"), g);
    }
  }

  // Borders. L1 carries a control-like unscheduled component.
  {
    TabularSeries sched = make_series(spec.start, 60, hours);
    TabularSeries phys = make_series(spec.start, 60, hours);
    for (std::size_t h = 0; h < hours; ++h) {
      sched.values[h] = round_to(400.0 + 200.0 * std::sin(kTwoPi * static_cast<double>(h) / 24.0), 1.0);
      const double unscheduled = 0.8 * hourly_integral(steps["A"], h) + 2.0 * unit(rng);
      phys.values[h] = round_to(sched.values[h] - unscheduled, 0.1);
    }
    write_series(dir / "borders" / "A_B_scheduled.csv", sched);
    write_series(dir / "borders" / "A_B_physical.csv", phys);
  }
  {
    TabularSeries sched = make_series(spec.start, 60, hours);
    TabularSeries phys = make_series(spec.start, 60, hours);
    for (std::size_t h = 0; h < hours; ++h) {
      sched.values[h] = round_to(-150.0 + 50.0 * unit(rng), 1.0);
      phys.values[h] = round_to(sched.values[h] + 10.0 * unit(rng), 0.1);
    }
    write_series(dir / "borders" / "B_C_scheduled.csv", sched);
    write_series(dir / "borders" / "B_C_physical.csv", phys);
  }

  // A 3-hour outage on L1 and a 90-day listing on L2.
  {
    std::string text = "link_id,start,end\n";
    const Timestamp s1 = spec.start + kHour * std::min(10, spec.hours - 1);
    text += "L1," + format_timestamp(s1) + "," + format_timestamp(s1 + kHour * 3) + "\n";
    const Timestamp s2 = spec.start - std::chrono::days(30);
    text += "L2," + format_timestamp(s2) + "," + format_timestamp(s2 + std::chrono::days(90)) + "\n";
    csv::write_file(dir / "outages.csv", text);
  }

  json config = {
      {"data_dir", "."},
      {"out_dir", "out"},
      {"seed", 42},
      {"jobs", 1},
      {"sign_convention", "scheduled_minus_physical"},
      {"indicators",
       {{"f_ref", 50.0}, {"rocof_window", 60}, {"smoothing_window", 30}, {"max_gap_fraction", 0.1}}},
      {"split", {{"train", 0.64}, {"validation", 0.16}, {"test", 0.2}}},
      {"training",
       {{"folds", 3},
        {"grid", {{"learning_rate", {0.1, 0.3}}, {"max_leaves", {4, 8}}, {"min_samples_leaf", {3}}}},
        {"params", {{"max_depth", 6}, {"number_of_rounds", 200}, {"early_stopping_patience", 10}}}}},
      {"analysis", {{"top_k", 8}, {"dead_zone", 0.05}}},
      {"areas",
       {{{"id", "A"}, {"frequency", "frequency/A.csv"}, {"zones", {"A1", "A2"}}},
        {{"id", "B"}, {"frequency", "frequency/B.csv"}, {"zones", {"B1"}}},
        {{"id", "C"}, {"zones", {"C1"}}}}},
      {"series",
       {{{"name", "load"},
         {"unit", "MW"},
         {"aggregation", "sum"},
         {"resolution_minutes", 60},
         {"resolution_by_zone", {{"A1", 15}, {"A2", 15}}},
         {"ramp", true},
         {"path", "series/{zone}/load.csv"}},
        {{"name", "load_da"},
         {"unit", "MW"},
         {"aggregation", "sum"},
         {"forecast_of", "load"},
         {"path", "series/{zone}/load_da.csv"}},
        {{"name", "wind"}, {"unit", "MW"}, {"ramp", true}, {"path", "series/{zone}/wind.csv"}},
        {{"name", "price"},
         {"unit", "EUR/MWh"},
         {"aggregation", "mean"},
         {"path", "series/{zone}/price.csv"}}}},
      {"generation", {{"types", gen_types}, {"path", "generation/{zone}/{type}.csv"}}},
      {"borders",
       {{{"from", "A"},
         {"to", "B"},
         {"link", "L1"},
         {"scheduled", "borders/A_B_scheduled.csv"},
         {"physical", "borders/A_B_physical.csv"}},
        {{"from", "B"},
         {"to", "C"},
         {"link", "L2"},
         {"scheduled", "borders/B_C_scheduled.csv"},
         {"physical", "borders/B_C_physical.csv"}}}},
      {"links",
       {{{"id", "L1"}, {"reference_area", "A"}, {"terminals", {"A", "B"}}},
        {{"id", "L2"}, {"reference_area", "B"}, {"terminals", {"B", "C"}}}}},
      {"outages", "outages.csv"},
      {"ramp_speed",
       {{{"name", "L1"},
         {"series", "borders/A_B_physical.csv"},
         {"capacity_mw", 1000.0},
         {"allowed_mw", 100.0},
         {"window_minutes", 1.0}},
        {{"name", "L2"},
         {"series", "borders/B_C_physical.csv"},
         {"capacity_mw", 600.0},
         {"allowed_mw", 600.0},
         {"window_minutes", 60.0}},
        {{"name", "A1 hydro"}, {"series", "generation/A1/hydro.csv"}, {"ramp_rate_per_min", 0.5}}}},
  };
  const auto path = dir / "config.json";
  csv::write_file(path, config.dump(2) + "\n");
  return path;
}

features::FlowDatasetInput control_law_input(const ControlLawSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const Timestamp start(std::chrono::sys_days(std::chrono::year(2018) / 1 / 1));
  const std::size_t n = spec.hours;

  features::FlowDatasetInput in;
  in.link_id = "L1";
  in.reference_area = "A";
  in.convention = features::SignConvention::kScheduledMinusPhysical;

  for (const std::string area : {"A", "B"}) {
    features::FeatureTable t;
    for (std::size_t h = 0; h < n; ++h) t.hours.push_back(start + kHour * static_cast<std::int64_t>(h));
    const std::vector<std::pair<std::string, std::string>> cols = {
        {"load", "MW"}, {"wind", "MW"}, {"solar", "MW"}, {"price", "EUR/MWh"}, {"inertia_proxy", "MW"}};
    for (const auto& [name, unit_name] : cols) {
      std::vector<double> v(n);
      for (auto& x : v) x = 1000.0 + 100.0 * unit(rng);
      t.add_column({name, unit_name, "synthetic", std::move(v)});
    }
    in.terminal_features[area] = std::move(t);

    std::vector<indicators::HourlyIndicators> recs(n);
    for (std::size_t h = 0; h < n; ++h) {
      auto& r = recs[h];
      r.hour = start + kHour * static_cast<std::int64_t>(h);
      r.rocof = 0.002 * unit(rng);
      r.nadir = 0.08 * unit(rng);
      r.msd = 0.001 * std::abs(unit(rng));
      r.integral = 20.0 * unit(rng);
      r.valid = true;
    }
    in.indicators[area] = std::move(recs);
  }

  const auto& a = in.indicators["A"];
  double mean = 0.0;
  for (const auto& r : a) mean += r.integral;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& r : a) var += (r.integral - mean) * (r.integral - mean);
  const double signal_std = std::abs(spec.coupling) * std::sqrt(var / static_cast<double>(n));

  in.scheduled.name = "scheduled";
  in.scheduled.start = start;
  in.physical.name = "physical";
  in.physical.start = start;
  for (std::size_t h = 0; h < n; ++h) {
    const double sched = 500.0 + 200.0 * unit(rng);
    const double unscheduled =
        spec.coupling * a[h].integral + spec.noise_fraction * signal_std * unit(rng);
    in.scheduled.values.push_back(sched);
    in.physical.values.push_back(sched - unscheduled);
  }
  return in;
}

features::FeatureTable benchmark_table(const BenchmarkSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const Timestamp start(std::chrono::sys_days(std::chrono::year(2018) / 1 / 1));
  const std::size_t n = spec.hours;

  features::FeatureTable t;
  std::vector<std::vector<double>> x(4, std::vector<double>(n));
  std::vector<double> hod(n);
  std::vector<double> y(n);
  for (std::size_t h = 0; h < n; ++h) {
    t.hours.push_back(start + kHour * static_cast<std::int64_t>(h));
    for (auto& col : x) col[h] = uni(rng);
    hod[h] = static_cast<double>(hour_of_day(t.hours.back()));
    const double profile = spec.profile_amplitude * std::sin(kTwoPi * hod[h] / 24.0);
    const double driven = 2.0 * x[0][h] + std::sin(3.0 * x[1][h]) + (x[2][h] > 0.0 ? 1.0 : -1.0) * x[3][h];
    y[h] = driven + profile + spec.noise_std * unit(rng);
  }
  for (std::size_t k = 0; k < x.size(); ++k) {
    t.add_column({"x" + std::to_string(k + 1), "", "synthetic", x[k]});
  }
  t.add_column({"hour_of_day", "h", "synthetic", hod});
  t.add_column({"target.y", "", "synthetic", y, ColumnRole::kTarget});
  return t;
}

}  // namespace flowstab::synthetic
