#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "flowstab/csv.h"
#include "flowstab/features.h"

namespace flowstab::features {
namespace {

const Timestamp kT0 = parse_timestamp("2020-01-01T00:00:00Z");
const double kNaN = std::nan("");

TabularSeries hourly(const std::string& name, std::vector<double> v, int offset_hours = 0,
                     const std::string& zone = "Z") {
  TabularSeries s;
  s.name = name;
  s.zone_id = zone;
  s.start = kT0 + kHour * offset_hours;
  s.values = std::move(v);
  return s;
}

TEST(AggregateArea, SumIdentityMean) {
  const auto sum = aggregate_area({hourly("load", {3}, 0, "a"), hourly("load", {4}, 0, "b")}, "X");
  EXPECT_EQ(sum.values, std::vector<double>{7});
  EXPECT_EQ(sum.zone_id, "X");
  const auto single = aggregate_area({hourly("load", {1, 2, 3})}, "X");
  EXPECT_EQ(single.values, (std::vector<double>{1, 2, 3}));
  const auto price =
      aggregate_area({hourly("price", {30}, 0, "a"), hourly("price", {50}, 0, "b")}, "X", Aggregation::kMean);
  EXPECT_EQ(price.values, std::vector<double>{40});
}

TEST(AggregateArea, MissingZoneHourIsMissing) {
  const auto s = aggregate_area({hourly("load", {1, kNaN, 3}), hourly("load", {1, 1}, 1)}, "X");
  ASSERT_EQ(s.size(), 3u);
  EXPECT_TRUE(std::isnan(s.values[0]));  // second zone starts an hour later
  EXPECT_TRUE(std::isnan(s.values[1]));
  EXPECT_EQ(s.values[2], 4.0);
}

TEST(AggregateArea, Errors) {
  EXPECT_THROW(aggregate_area({}, "X"), std::invalid_argument);
  EXPECT_THROW(aggregate_area({hourly("load", {1}), hourly("wind", {1})}, "X"), std::invalid_argument);
}

TEST(Ramp, Examples) {
  const auto c = ramp(hourly("load", {5, 5, 5}));
  EXPECT_TRUE(std::isnan(c.values[0]));
  EXPECT_EQ(c.values[1], 0.0);
  const auto r = ramp(hourly("load", {10, 15, 12}));
  EXPECT_TRUE(std::isnan(r.values[0]));
  EXPECT_EQ(r.values[1], 5.0);
  EXPECT_EQ(r.values[2], -3.0);
}

TEST(Ramp, ShiftAndSubtractAndCumsum) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> d(-100, 100);
  std::vector<double> x, cum;
  double acc = 0;
  for (int i = 0; i < 200; ++i) {
    x.push_back(d(rng));
    acc += x.back();
    cum.push_back(acc);
  }
  const auto r = ramp(hourly("x", x));
  for (std::size_t i = 1; i < x.size(); ++i) EXPECT_EQ(r.values[i], x[i] - x[i - 1]);
  const auto rc = ramp(hourly("c", cum));
  for (std::size_t i = 1; i < x.size(); ++i) EXPECT_EQ(rc.values[i], x[i]);
}

TEST(ForecastError, SignAndIntersection) {
  const auto zero = forecast_error(hourly("da", {1, 2}), hourly("a", {1, 2}));
  EXPECT_EQ(zero.values, (std::vector<double>{0, 0}));
  EXPECT_EQ(forecast_error(hourly("da", {100}), hourly("a", {90})).values, std::vector<double>{10});
  const auto mis = forecast_error(hourly("da", {1, 2, 3}), hourly("a", {1, 1, 1}, 1));
  EXPECT_EQ(mis.start, kT0 + kHour);
  EXPECT_EQ(mis.values, (std::vector<double>{1, 2}));
  EXPECT_EQ(mis.name, "da_forecast_error");
}

TEST(InertiaProxy, Examples) {
  EXPECT_EQ(inertia_proxy({hourly("nuclear", {500})}, {{"nuclear", 1.0}}).values, std::vector<double>{500});
  EXPECT_EQ(inertia_proxy({hourly("nuclear", {500}), hourly("wind", {300})}, {{"nuclear", 0.0}}).values,
            std::vector<double>{0});
  EXPECT_EQ(inertia_proxy({hourly("nuclear", {600}), hourly("hydro", {400})},
                          {{"nuclear", 1.0}, {"hydro", 0.5}})
                .values,
            std::vector<double>{800});
  const auto w = default_inertia_weights({"nuclear", "fossil_gas", "hydro_reservoir", "wind_onshore", "solar"});
  EXPECT_EQ(w.at("nuclear"), 1.0);
  EXPECT_EQ(w.at("fossil_gas"), 1.0);
  EXPECT_EQ(w.at("hydro_reservoir"), 1.0);
  EXPECT_EQ(w.at("wind_onshore"), 0.0);
  EXPECT_EQ(w.at("solar"), 0.0);
}

TEST(BorderFlow, UnscheduledIdentityExact) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> d(0, 300);
  std::vector<double> s, p;
  for (int i = 0; i < 100; ++i) {
    s.push_back(d(rng));
    p.push_back(i == 7 ? kNaN : d(rng));
  }
  const auto b = make_border_flow("A", "B", hourly("s", s), hourly("p", p));
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (std::isnan(p[i])) {
      EXPECT_TRUE(std::isnan(b.unscheduled.values[i]));
      continue;
    }
    EXPECT_EQ(b.scheduled.values[i] - b.physical.values[i] - b.unscheduled.values[i], 0.0);
  }
  const auto flipped = make_border_flow("A", "B", hourly("s", s), hourly("p", p),
                                        SignConvention::kPhysicalMinusScheduled);
  EXPECT_EQ(flipped.unscheduled.values[0], -b.unscheduled.values[0]);
  EXPECT_EQ(parse_sign_convention(to_string(SignConvention::kPhysicalMinusScheduled)),
            SignConvention::kPhysicalMinusScheduled);
  EXPECT_THROW(parse_sign_convention("sideways"), std::invalid_argument);
}

TEST(NetInflow, Examples) {
  const auto in = make_border_flow("B", "A", hourly("s", {300}), hourly("p", {300}));
  const auto out = make_border_flow("A", "B", hourly("s", {100}), hourly("p", {100}));
  EXPECT_EQ(net_area_inflow({in, out}, "A", "B").scheduled.values, std::vector<double>{200});

  const auto l1 = make_border_flow("B", "A", hourly("s", {200}), hourly("p", {180}));
  const auto l2 = make_border_flow("B", "A", hourly("s", {-50}), hourly("p", {-20}));
  const auto net = net_area_inflow({l1, l2}, "A", "B");
  EXPECT_EQ(net.scheduled.values, std::vector<double>{150});
  EXPECT_EQ(net.physical.values, std::vector<double>{160});
  EXPECT_EQ(net.unscheduled.values, std::vector<double>{-10});
  EXPECT_EQ(net.unscheduled.values[0], net.scheduled.values[0] - net.physical.values[0]);
  EXPECT_EQ(net.from_area, "B");
  EXPECT_EQ(net.to_area, "A");
  EXPECT_THROW(net_area_inflow({l1}, "A", "C"), std::invalid_argument);
}

TEST(NetInflow, Antisymmetric) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d(0, 300);
  std::vector<BorderFlowSet> sets;
  for (int k = 0; k < 3; ++k) {
    std::vector<double> s, p;
    for (int i = 0; i < 50; ++i) {
      s.push_back(std::round(d(rng)));
      p.push_back(std::round(d(rng)));
    }
    sets.push_back(k == 1 ? make_border_flow("B", "A", hourly("s", s), hourly("p", p))
                          : make_border_flow("A", "B", hourly("s", s), hourly("p", p)));
  }
  const auto ab = net_area_inflow(sets, "A", "B");
  const auto ba = net_area_inflow(sets, "B", "A");
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(ab.scheduled.values[i], -ba.scheduled.values[i]);
    EXPECT_EQ(ab.unscheduled.values[i], -ba.unscheduled.values[i]);
  }
}

LinkDataset link_dataset(std::size_t hours) {
  LinkDataset d;
  d.link_id = "L1";
  d.reference_area = "A";
  std::vector<double> v;
  for (std::size_t i = 0; i < hours; ++i) {
    d.features.hours.push_back(kT0 + kHour * static_cast<int>(i));
    v.push_back(static_cast<double>(i));
    d.target.push_back(static_cast<double>(i) * 2.0);
  }
  d.features.add_column({"x", "MW", "test", v});
  return d;
}

TEST(MaskUnavailability, ThreeDayOutage) {
  const auto d = link_dataset(24 * 10);
  ingest::OutageCalendar cal{"L1", {{kT0 + std::chrono::days(2), kT0 + std::chrono::days(5)}}};
  const auto r = mask_unavailability(d, cal);
  EXPECT_EQ(r.dataset.excluded_hours.size(), 72u);
  EXPECT_EQ(r.dataset.features.num_rows(), 24u * 10 - 72);
  EXPECT_EQ(r.dataset.target.size(), r.dataset.features.num_rows());
  EXPECT_TRUE(r.review.empty());
  for (const auto& h : r.dataset.features.hours) EXPECT_FALSE(r.dataset.excluded_hours.count(h));
}

TEST(MaskUnavailability, PartialHourOverlapExcludesHour) {
  const auto d = link_dataset(10);
  ingest::OutageCalendar cal{"L1", {{kT0 + std::chrono::minutes(90), kT0 + std::chrono::minutes(150)}}};
  const auto r = mask_unavailability(d, cal);
  EXPECT_EQ(r.dataset.excluded_hours.size(), 2u);
}

TEST(MaskUnavailability, EmptyCalendarAndLongListing) {
  const auto d = link_dataset(48);
  const auto same = mask_unavailability(d, {"L1", {}});
  EXPECT_EQ(same.dataset.features.hours, d.features.hours);
  EXPECT_EQ(same.dataset.target, d.target);
  ingest::OutageCalendar cal{"L1", {{kT0 - std::chrono::days(30), kT0 + std::chrono::days(60)}}};
  const auto r = mask_unavailability(d, cal);
  EXPECT_TRUE(r.dataset.excluded_hours.empty());
  EXPECT_EQ(r.review.size(), 1u);
  EXPECT_THROW(mask_unavailability(d, {"L9", {}}), std::invalid_argument);
}

std::vector<indicators::HourlyIndicators> indicator_hours(int from, int n) {
  std::vector<indicators::HourlyIndicators> out;
  for (int i = 0; i < n; ++i) {
    indicators::HourlyIndicators r;
    r.hour = kT0 + kHour * (from + i);
    r.rocof = 0.001 * i;
    r.nadir = -0.01 * i;
    r.msd = 0.0001 * i;
    r.integral = 1.0 * i;
    r.valid = true;
    out.push_back(r);
  }
  return out;
}

TEST(StabilityDataset, DisjointHoursWarn) {
  FeatureTable t = build_table({{hourly("load", {1, 2, 3}), "MW", "test"}});
  const auto ds = assemble_stability_dataset("A", indicator_hours(100, 5), {t});
  EXPECT_EQ(ds.features.num_rows(), 0u);
  ASSERT_EQ(ds.warnings.size(), 1u);
}

TEST(StabilityDataset, PerTargetRows) {
  FeatureTable t = build_table({{hourly("load", {1, 2, 3, 4}), "MW", "test"}});
  auto inds = indicator_hours(0, 4);
  inds[2].rocof = kNaN;
  inds[3].valid = false;
  const auto ds = assemble_stability_dataset("A", inds, {t});
  ASSERT_EQ(ds.features.num_rows(), 4u);
  EXPECT_EQ(ds.targets[0].rows, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(ds.targets[3].rows, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(StabilityDataset, MatchesHandBuiltJoin) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> d(0, 1);
  std::vector<SeriesColumn> cols;
  std::vector<std::vector<double>> raw(5);
  for (int k = 0; k < 5; ++k) {
    for (int i = 0; i < 120; ++i) raw[k].push_back(d(rng));
    cols.push_back({hourly("f" + std::to_string(k), raw[k], -10), "MW", "test"});
  }
  const auto ds = assemble_stability_dataset("A", indicator_hours(0, 100), {build_table(cols)});
  ASSERT_EQ(ds.features.num_rows(), 100u);
  ASSERT_EQ(ds.features.num_columns(), 5u);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(ds.features.hours[i], kT0 + kHour * i);
    for (int k = 0; k < 5; ++k) {
      EXPECT_EQ(ds.features.column("f" + std::to_string(k)).values[i], raw[k][i + 10]);
    }
    EXPECT_EQ(ds.targets[3].values[i], 1.0 * i);
  }
}

TEST(FlowDataset, BothTerminalsAndSign) {
  FlowDatasetInput in;
  in.link_id = "L1";
  in.reference_area = "CE";
  in.terminal_features["CE"] = build_table({{hourly("load", {1, 2, 3}), "MW", "test"}});
  in.terminal_features["NO"] = build_table({{hourly("load", {4, 5, 6}), "MW", "test"}});
  in.indicators["CE"] = indicator_hours(0, 3);
  in.indicators["NO"] = indicator_hours(0, 3);
  in.scheduled = hourly("s", {500, 500, 500});
  in.physical = hourly("p", {450, 450, 450});
  const auto ds = assemble_flow_dataset(in);
  EXPECT_EQ(ds.target, (std::vector<double>{50, 50, 50}));
  for (const char* name : {"CE.load", "NO.load", "scheduled_exchange", "CE.rocof", "CE.integral", "NO.nadir",
                           "NO.msd"}) {
    EXPECT_NE(ds.features.find(name), nullptr) << name;
  }

  // Importer's view: flows negated, so target -50.
  in.reference_area = "NO";
  in.scheduled = hourly("s", {-500, -500, -500});
  in.physical = hourly("p", {-450, -450, -450});
  EXPECT_EQ(assemble_flow_dataset(in).target, (std::vector<double>{-50, -50, -50}));
}

TEST(FlowDataset, SingleTerminal) {
  FlowDatasetInput in;
  in.link_id = "L2";
  in.reference_area = "NO";
  in.terminal_features["NO"] = build_table({{hourly("load", {1, 2}), "MW", "test"}});
  in.indicators["NO"] = indicator_hours(0, 2);
  in.scheduled = hourly("s", {1, 2});
  in.physical = hourly("p", {0, 0});
  const auto ds = assemble_flow_dataset(in);
  EXPECT_NE(ds.features.find("NO.integral"), nullptr);
  EXPECT_EQ(ds.features.find("BALTIC.integral"), nullptr);
  for (const auto& c : ds.features.columns()) EXPECT_EQ(c.name.rfind("BALTIC", 0), std::string::npos);
}

TEST(TableCsv, RoundTripWithSchema) {
  FeatureTable t = build_table({{hourly("load", {1.5, kNaN, 3.25}), "MW", "sum over zones"},
                                {hourly("price", {30, 40, 50}), "EUR/MWh", "mean over zones"}});
  t.add_column({"target.y", "Hz", "indicator", {0.1, 0.2, kNaN}, ColumnRole::kTarget});
  const auto dir = std::filesystem::path(FLOWSTAB_TEST_TMP) / "features";
  csv::write_file(dir / "t.csv", format_table_csv(t));
  const auto back = parse_table_csv(dir / "t.csv", table_schema(t));
  ASSERT_EQ(back.num_rows(), 3u);
  EXPECT_EQ(back.hours, t.hours);
  EXPECT_EQ(back.column("load").unit, "MW");
  EXPECT_EQ(back.column("target.y").role, ColumnRole::kTarget);
  EXPECT_TRUE(std::isnan(back.column("load").values[1]));
  EXPECT_EQ(back.column("price").values[2], 50.0);
  EXPECT_EQ(back.feature_names(), (std::vector<std::string>{"load", "price"}));
}

TEST(FeatureTable, RejectsDuplicatesAndRaggedColumns) {
  FeatureTable t;
  t.hours = {kT0, kT0 + kHour};
  t.add_column({"a", "", "", {1, 2}});
  EXPECT_THROW(t.add_column({"a", "", "", {1, 2}}), std::invalid_argument);
  EXPECT_THROW(t.add_column({"b", "", "", {1}}), std::invalid_argument);
}

}  // namespace
}  // namespace flowstab::features
