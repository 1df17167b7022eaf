#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowstab/ingest.h"
#include "flowstab/treeshap.h"
#include "json.hpp"

namespace flowstab::analysis {

struct FeatureImportance {
  std::string feature;
  double importance = 0.0;  // mean |phi| share, in [0, 1]
  int rank = 0;             // 1 = most important
};

struct ImportanceReport {
  std::string model_id;
  std::vector<FeatureImportance> entries;  // model feature order

  // Entries sorted by rank, at most k of them.
  std::vector<FeatureImportance> top(std::size_t k = 8) const;
  const FeatureImportance& at(const std::string& feature) const;
};

// importance_k = mean|phi_k| / sum_j mean|phi_j|. Ranks descend by
// importance, ties by feature order. nullopt when every attribution is zero;
// std::invalid_argument for an empty matrix.
std::optional<ImportanceReport> normalized_importance(const treeshap::ShapMatrix& shap,
                                                      const std::string& model_id);

// Tie-corrected Kendall tau-b in O(n log n). nullopt when either vector is
// constant. Throws std::invalid_argument for unequal lengths, fewer than two
// elements, or NaN input.
std::optional<double> kendall_tau(std::span<const double> x, std::span<const double> y);

enum class Direction { kControlLike, kDisturbanceLike, kInconclusive };
std::string to_string(Direction direction);

enum class FlowOrientation { kOutflowPositive, kInflowPositive };

struct FlowCorrelation {
  std::optional<double> tau;
  Direction direction = Direction::kInconclusive;
};

inline constexpr double kDefaultDeadZone = 0.05;

// Direction of the dependency between a frequency integral and the
// unscheduled outflow of that area: Kendall tau between the integral and its
// SHAP contribution to the outflow. `phi_integral` is the contribution to the
// model target; kInflowPositive negates it for the area on the far side of
// the link. tau above the dead zone is control-like, below its negative
// disturbance-like. Rows with a NaN in either input are skipped.
FlowCorrelation shap_flow_correlation(std::span<const double> phi_integral,
                                      std::span<const double> integral,
                                      FlowOrientation orientation = FlowOrientation::kOutflowPositive,
                                      double dead_zone = kDefaultDeadZone);

// Share of full load per minute: allowed_mw per `window_minutes`, over capacity.
double ramp_rate_per_min(double capacity_mw, double allowed_mw, double window_minutes = 1.0);

// Mean absolute hour-to-hour change, skipping missing pairs.
double mean_abs_hourly_change(const ingest::TabularSeries& series);

struct RampEntry {
  std::string name;
  double delta_p_mw = 0.0;
  double ramp_rate_per_min = 0.0;
};

struct RampSpeedRow {
  std::string name;
  double delta_p_mw = 0.0;
  double ramp_rate_per_min = 0.0;
  double rocop_mw_per_min = 0.0;
  double s = 0.0;
};

// RoCoP = delta_p * r; s = RoCoP / max RoCoP. Throws on an empty table,
// negative delta_p, non-positive r, or an all-zero RoCoP column.
std::vector<RampSpeedRow> ramp_speed(const std::vector<RampEntry>& entries);

struct DependencyTable {
  std::string feature;
  std::string color_feature;  // empty without color column
  std::vector<double> feature_values;
  std::vector<double> shap_values;
  std::vector<double> color_values;
  std::optional<double> tau;  // over rows with a present feature value
};

// Rows are sorted by (feature, shap, color) so the table does not depend on
// input order.
DependencyTable dependency_table(const std::string& feature, std::span<const double> feature_values,
                                 std::span<const double> shap_values,
                                 const std::string& color_feature = {},
                                 std::span<const double> color_values = {});

struct BenchmarkReport {
  std::string label;
  double model_r2 = 0.0;
  double baseline_r2 = 0.0;
  std::optional<double> factor;  // undefined for a non-positive baseline
  double difference = 0.0;
};

BenchmarkReport benchmark_comparison(double model_r2, double baseline_r2,
                                     const std::string& label = {});

// `model_id,feature,importance,rank`
std::string format_importance_csv(const ImportanceReport& report);
// `feature_value,shap_value,color_value` and its JSON header.
std::string format_dependency_csv(const DependencyTable& table);
nlohmann::json dependency_header(const DependencyTable& table);
// `name,delta_p_mw,ramp_rate_per_min,rocop_mw_per_min,s`
std::string format_ramp_speed_csv(const std::vector<RampSpeedRow>& rows);

nlohmann::json to_json(const BenchmarkReport& report);

}  // namespace flowstab::analysis
