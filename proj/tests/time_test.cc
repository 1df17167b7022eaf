#include <gtest/gtest.h>

#include <cmath>

#include "flowstab/csv.h"
#include "flowstab/digest.h"
#include "flowstab/time.h"

namespace flowstab {
namespace {

TEST(Timestamp, ParsesUtcForms) {
  const Timestamp t = parse_timestamp("2019-01-07T13:45:10Z");
  EXPECT_EQ(format_timestamp(t), "2019-01-07T13:45:10Z");
  EXPECT_EQ(parse_timestamp("2019-01-07 13:45:10"), t);
  EXPECT_EQ(parse_timestamp("2019-01-07T13:45:10.000Z"), t);
  EXPECT_EQ(format_timestamp(parse_timestamp("2019-01-07T13:45Z")), "2019-01-07T13:45:00Z");
}

TEST(Timestamp, NormalizesOffsets) {
  EXPECT_EQ(parse_timestamp("2019-01-07T14:45:10+01:00"), parse_timestamp("2019-01-07T13:45:10Z"));
  EXPECT_EQ(parse_timestamp("2019-01-07T08:45:10-0500"), parse_timestamp("2019-01-07T13:45:10Z"));
}

TEST(Timestamp, RejectsGarbageAndSubSecond) {
  EXPECT_THROW(parse_timestamp("yesterday"), std::invalid_argument);
  EXPECT_THROW(parse_timestamp("2019-02-30T00:00:00Z"), std::invalid_argument);
  EXPECT_THROW(parse_timestamp("2019-01-07T13:45:10.5Z"), std::invalid_argument);
}

TEST(Timestamp, HourHelpers) {
  const Timestamp t = parse_timestamp("2019-01-07T13:45:10Z");
  EXPECT_EQ(floor_hour(t), parse_timestamp("2019-01-07T13:00:00Z"));
  EXPECT_EQ(hour_of_day(t), 13);
}

TEST(Csv, DoubleRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-7, 49.987, 1e300}) {
    EXPECT_EQ(*csv::parse_double(csv::format_double(v)), v);
  }
  EXPECT_EQ(csv::format_double(std::nan("")), "");
  EXPECT_FALSE(csv::parse_double("abc"));
  EXPECT_FALSE(csv::parse_double(""));
}

TEST(Csv, SplitKeepsEmptyFields) {
  const auto f = csv::split("a,,c,");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[1], "");
  EXPECT_EQ(f[3], "");
}

TEST(Digest, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace flowstab
