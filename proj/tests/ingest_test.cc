#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "flowstab/csv.h"
#include "flowstab/ingest.h"

namespace flowstab::ingest {
namespace {

namespace fs = std::filesystem;

fs::path tmp(const std::string& name) {
  const fs::path dir = fs::path(FLOWSTAB_TEST_TMP) / "ingest";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write(const std::string& name, const std::string& text) {
  const auto p = tmp(name);
  csv::write_file(p, text);
  return p;
}

std::string frequency_rows(int n, double hz, int skip = -1) {
  std::string out = "timestamp,frequency_hz\n";
  const Timestamp t0 = parse_timestamp("2020-03-01T00:00:00Z");
  for (int i = 0; i < n; ++i) {
    if (i == skip) continue;
    out += format_timestamp(t0 + std::chrono::seconds(i)) + "," + csv::format_double(hz) + "\n";
  }
  return out;
}

TEST(ParseFrequency, FullHourHasNoGaps) {
  const auto t = parse_frequency_csv(write("full.csv", frequency_rows(3600, 50.0)), "CE");
  EXPECT_EQ(t.size(), 3600u);
  EXPECT_EQ(t.gap_count(), 0u);
  EXPECT_EQ(t.area_id, "CE");
  EXPECT_EQ(t.start, parse_timestamp("2020-03-01T00:00:00Z"));
}

TEST(ParseFrequency, MissingSecondIsOneGap) {
  const auto t = parse_frequency_csv(write("missing.csv", frequency_rows(3600, 50.0, 1234)), "CE");
  ASSERT_EQ(t.size(), 3600u);
  EXPECT_EQ(t.gap_count(), 1u);
  EXPECT_TRUE(t.gap_mask[1234]);
}

TEST(ParseFrequency, ImplausibleAndNonNumericValuesBecomeGaps) {
  std::string text = frequency_rows(10, 50.0);
  text += "2020-03-01T00:00:10Z,61.2\n2020-03-01T00:00:11Z,n/a\n2020-03-01T00:00:12Z,44.99\n"
          "2020-03-01T00:00:13Z,45\n";
  const auto t = parse_frequency_csv(write("implausible.csv", text), "CE");
  ASSERT_EQ(t.size(), 14u);
  EXPECT_TRUE(t.gap_mask[10]);
  EXPECT_TRUE(t.gap_mask[11]);
  EXPECT_TRUE(t.gap_mask[12]);
  EXPECT_FALSE(t.gap_mask[13]);
  EXPECT_EQ(t.gap_count(), 3u);
  t.validate();
}

TEST(ParseFrequency, Errors) {
  EXPECT_THROW(parse_frequency_csv(tmp("does_not_exist.csv"), "CE"), std::runtime_error);
  EXPECT_THROW(parse_frequency_csv(write("empty.csv", "timestamp,frequency_hz\n"), "CE"), ParseError);
  EXPECT_THROW(parse_frequency_csv(write("header.csv", "time,f\n2020-03-01T00:00:00Z,50\n"), "CE"),
               ParseError);
  const std::string back = "timestamp,frequency_hz\n2020-03-01T00:00:01Z,50\n2020-03-01T00:00:00Z,50\n";
  EXPECT_THROW(parse_frequency_csv(write("back.csv", back), "CE"), ParseError);
  const std::string frac = "timestamp,frequency_hz\n2020-03-01T00:00:00.5Z,50\n";
  EXPECT_THROW(parse_frequency_csv(write("frac.csv", frac), "CE"), ParseError);
}

TEST(ParseFrequency, RoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.02);
  FrequencyTrace t;
  t.area_id = "GB";
  t.start = parse_timestamp("2020-03-01T00:00:00Z");
  for (int i = 0; i < 500; ++i) {
    t.samples.push_back(50.0 + noise(rng));
    t.gap_mask.push_back(i % 37 == 5);
  }
  const auto back = parse_frequency_csv(write("roundtrip.csv", format_frequency_csv(t)), "GB");
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(back.gap_mask[i], t.gap_mask[i]);
    if (!t.gap_mask[i]) EXPECT_EQ(back.samples[i], t.samples[i]);
  }
}

std::string tabular_rows(int n, int minutes, const std::vector<double>& values) {
  std::string out = "timestamp,value\n";
  const Timestamp t0 = parse_timestamp("2020-03-01T00:00:00Z");
  for (int i = 0; i < n; ++i) {
    out += format_timestamp(t0 + std::chrono::minutes(minutes * i)) + "," +
           csv::format_double(values[static_cast<std::size_t>(i) % values.size()]) + "\n";
  }
  return out;
}

TEST(ParseTabular, HourlyAndQuarterHourly) {
  const auto h = parse_tabular_csv(write("h.csv", tabular_rows(24, 60, {1.0})), "load", "DE");
  EXPECT_EQ(h.size(), 24u);
  EXPECT_EQ(h.resolution_minutes, 60);
  const auto q = parse_tabular_csv(write("q.csv", tabular_rows(96, 15, {1.0})), "load", "DE", 15);
  EXPECT_EQ(q.size(), 96u);
  EXPECT_EQ(q.resolution_minutes, 15);
}

TEST(ParseTabular, DuplicateTimestampNamesIt) {
  const std::string text =
      "timestamp,value\n2020-03-01T00:00:00Z,1\n2020-03-01T01:00:00Z,2\n2020-03-01T01:00:00Z,3\n";
  try {
    parse_tabular_csv(write("dup.csv", text), "load", "DE");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("2020-03-01T01:00:00Z"), std::string::npos);
  }
}

TEST(ParseTabular, InconsistentResolution) {
  const std::string text = "timestamp,value\n2020-03-01T00:00:00Z,1\n2020-03-01T00:20:00Z,2\n";
  EXPECT_THROW(parse_tabular_csv(write("res.csv", text), "load", "DE", 15), ParseError);
  EXPECT_THROW(parse_tabular_csv(write("res2.csv", text), "load", "DE", 7), std::invalid_argument);
}

TEST(ParseTabular, AbsentRowsAreMissing) {
  const std::string text = "timestamp,value\n2020-03-01T00:00:00Z,1\n2020-03-01T03:00:00Z,4\n"
                           "2020-03-01T04:00:00Z,\n";
  const auto s = parse_tabular_csv(write("absent.csv", text), "load", "DE");
  ASSERT_EQ(s.size(), 5u);
  EXPECT_TRUE(std::isnan(s.values[1]));
  EXPECT_TRUE(std::isnan(s.values[2]));
  EXPECT_EQ(s.values[3], 4.0);
  EXPECT_TRUE(std::isnan(s.values[4]));
}

TabularSeries quarter_hours(std::vector<double> v) {
  TabularSeries s;
  s.name = "load";
  s.zone_id = "DE";
  s.resolution_minutes = 15;
  s.start = parse_timestamp("2020-03-01T00:00:00Z");
  s.values = std::move(v);
  return s;
}

TEST(ResampleHourly, MeanOfQuarterHours) {
  const auto h = resample_hourly(quarter_hours({1, 2, 3, 4}));
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h.values[0], 2.5);
  EXPECT_EQ(h.resolution_minutes, 60);
}

TEST(ResampleHourly, MissingPropagates) {
  const auto h = resample_hourly(quarter_hours({1, std::nan(""), 3, 4, 5, 6, 7, 8}));
  ASSERT_EQ(h.size(), 2u);
  EXPECT_TRUE(std::isnan(h.values[0]));
  EXPECT_EQ(h.values[1], 6.5);
}

TEST(ResampleHourly, PartialTrailingHourIsKeptAsMissing) {
  // 5 quarter hours span 1.25 h, so 2 hourly rows (ceil).
  const auto h = resample_hourly(quarter_hours({1, 2, 3, 4, 5}));
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h.values[0], 2.5);
  EXPECT_TRUE(std::isnan(h.values[1]));
}

TEST(ResampleHourly, IdempotentOnHourly) {
  const auto h = resample_hourly(quarter_hours({1, 2, 3, 4, 5, 6, 7, 8}));
  const auto again = resample_hourly(h);
  EXPECT_EQ(again.values, h.values);
  EXPECT_EQ(again.start, h.start);
}

TEST(ParseOutage, CalendarsPerLink) {
  const std::string text = "link_id,start,end\nL1,2020-01-01T00:00:00Z,2020-01-04T00:00:00Z\n"
                           "L2,2020-02-01T00:00:00Z,2020-05-01T00:00:00Z\n"
                           "L1,2020-03-01T00:00:00Z,2020-03-01T05:00:00Z\n";
  const auto cal = parse_outage_csv(write("outages.csv", text));
  ASSERT_EQ(cal.size(), 2u);
  EXPECT_EQ(cal.at("L1").intervals.size(), 2u);
  EXPECT_EQ(cal.at("L1").intervals[0].duration(), std::chrono::hours(72));
  const std::string bad = "link_id,start,end\nL1,2020-01-04T00:00:00Z,2020-01-01T00:00:00Z\n";
  EXPECT_THROW(parse_outage_csv(write("bad_outages.csv", bad)), ParseError);
}

}  // namespace
}  // namespace flowstab::ingest
