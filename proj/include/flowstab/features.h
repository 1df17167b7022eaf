#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "flowstab/indicators.h"
#include "flowstab/ingest.h"
#include "flowstab/time.h"
#include "json.hpp"

namespace flowstab::features {

using ingest::TabularSeries;

enum class Aggregation { kSum, kMean };

// Orientation of unscheduled flow. The default follows "scheduled minus
// physical"; the alternative is the more common "physical minus scheduled".
enum class SignConvention { kScheduledMinusPhysical, kPhysicalMinusScheduled };

SignConvention parse_sign_convention(const std::string& text);
std::string to_string(SignConvention convention);

enum class ColumnRole { kFeature, kTarget };

struct Column {
  std::string name;
  std::string unit;
  std::string provenance;  // source series + transform
  std::vector<double> values;  // NaN = missing
  ColumnRole role = ColumnRole::kFeature;
};

// Hourly, timestamp-indexed table. All columns share `hours`.
class FeatureTable {
 public:
  std::vector<Timestamp> hours;

  const std::vector<Column>& columns() const { return columns_; }
  std::size_t num_rows() const { return hours.size(); }
  std::size_t num_columns() const { return columns_.size(); }

  // Throws std::invalid_argument on a duplicate name or length mismatch.
  void add_column(Column column);
  const Column* find(const std::string& name) const;
  const Column& column(const std::string& name) const;
  bool missing(std::size_t column, std::size_t row) const;

  // Names of feature-role columns in insertion order.
  std::vector<std::string> feature_names() const;

  // Copy keeping only the given row indices (in that order).
  FeatureTable select_rows(const std::vector<std::size_t>& rows) const;

  void validate() const;

 private:
  std::vector<Column> columns_;
};

struct SeriesColumn {
  TabularSeries series;  // hourly
  std::string unit;
  std::string provenance;
};

// Table on the union of the series' hours; NaN where a series has no value.
FeatureTable build_table(const std::vector<SeriesColumn>& series);

// Inner join on hours; column names must be unique across tables.
FeatureTable inner_join(const std::vector<FeatureTable>& tables);

// Per-hour sum (or mean, for prices) over the area's zones. An hour is
// missing when any member zone is missing. Throws on an empty zone set or
// non-hourly input.
TabularSeries aggregate_area(const std::vector<TabularSeries>& series_by_zone,
                             const std::string& area, Aggregation rule = Aggregation::kSum);

// value(t) - value(t-1); the first hour is missing.
TabularSeries ramp(const TabularSeries& series);

// day_ahead - actual on the intersection of hours.
TabularSeries forecast_error(const TabularSeries& day_ahead, const TabularSeries& actual);

// Weighted per-hour sum of scheduled generation. Series whose name has no
// entry in `weights` carry weight 0.
TabularSeries inertia_proxy(const std::vector<TabularSeries>& scheduled_generation_by_type,
                            const std::map<std::string, double>& weights);

// Default weights: 1 for synchronous generation types, 0 otherwise.
std::map<std::string, double> default_inertia_weights(const std::vector<std::string>& types);

// Flows on one direction of a border. Positive values are outflow from
// from_area. All three series share one hourly grid.
struct BorderFlowSet {
  std::string from_area;
  std::string to_area;
  TabularSeries scheduled;
  TabularSeries physical;
  TabularSeries unscheduled;
  SignConvention convention = SignConvention::kScheduledMinusPhysical;
};

BorderFlowSet make_border_flow(const std::string& from_area, const std::string& to_area,
                               const TabularSeries& scheduled, const TabularSeries& physical,
                               SignConvention convention = SignConvention::kScheduledMinusPhysical);

// Net inflow into `area` from `neighbor`, summed over every border set
// between the two. The result has from_area = neighbor, to_area = area.
// Hours where any contributing set is missing are missing.
BorderFlowSet net_area_inflow(const std::vector<BorderFlowSet>& border_flows,
                              const std::string& area, const std::string& neighbor);

struct LinkDataset {
  std::string link_id;
  std::string reference_area;
  FeatureTable features;
  std::vector<double> target;  // unscheduled outflow from reference_area, aligned with hours
  std::map<Timestamp, std::string> excluded_hours;
};

inline constexpr std::chrono::seconds kDefaultMaxListing = std::chrono::months(2);

// Listing too long to exclude automatically.
struct ReviewEntry {
  std::string link_id;
  ingest::OutageInterval interval;
  std::string reason;
};

struct MaskResult {
  LinkDataset dataset;
  std::vector<ReviewEntry> review;
};

// Moves hours overlapping any listing shorter than max_listing into
// excluded_hours (dropping them from features and target). Longer listings
// are reported for review. Throws if the calendar belongs to another link.
MaskResult mask_unavailability(const LinkDataset& dataset, const ingest::OutageCalendar& calendar,
                               std::chrono::seconds max_listing = kDefaultMaxListing);

inline constexpr std::array<const char*, 4> kIndicatorNames = {"rocof", "nadir", "msd",
                                                               "integral"};
inline constexpr std::array<const char*, 4> kIndicatorUnits = {"Hz/s", "Hz", "Hz^2", "Hz*s"};

struct TargetRows {
  std::string name;
  std::vector<double> values;       // aligned with the feature hours, NaN if invalid
  std::vector<std::size_t> rows;    // rows usable for this target
};

struct StabilityDataset {
  std::string area;
  FeatureTable features;
  std::array<TargetRows, 4> targets;  // rocof, nadir, msd, integral
  std::vector<std::string> warnings;
};

// Inner join of the feature tables with the indicator hours. Invalid or
// missing indicator values remove the row from that target's row set only.
StabilityDataset assemble_stability_dataset(
    const std::string& area, const std::vector<indicators::HourlyIndicators>& indicators,
    const std::vector<FeatureTable>& feature_tables);

struct FlowDatasetInput {
  std::string link_id;
  std::string reference_area;  // target positive = outflow from this area
  // Techno-economic features per terminal area with data. Columns are
  // prefixed "<area>." in the result.
  std::map<std::string, FeatureTable> terminal_features;
  // Indicators for every terminal area where frequency data exist.
  std::map<std::string, std::vector<indicators::HourlyIndicators>> indicators;
  TabularSeries scheduled;  // MW, outflow from reference_area
  TabularSeries physical;   // MW, outflow from reference_area
  SignConvention convention = SignConvention::kScheduledMinusPhysical;
};

// Rows: hours present in every terminal table with both scheduled and
// physical flow present. Indicators are left-joined (invalid -> missing).
LinkDataset assemble_flow_dataset(const FlowDatasetInput& input);

// CSV with an `hour` column followed by every table column, plus a JSON
// schema sidecar describing each column.
std::string format_table_csv(const FeatureTable& table);
nlohmann::json table_schema(const FeatureTable& table);
FeatureTable parse_table_csv(const std::filesystem::path& csv_path, const nlohmann::json& schema);

// Converts a stability dataset into one persisted table (targets as
// target-role columns) and back.
FeatureTable to_table(const StabilityDataset& dataset);
FeatureTable to_table(const LinkDataset& dataset);

}  // namespace flowstab::features
