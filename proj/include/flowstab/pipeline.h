#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowstab/analysis.h"
#include "flowstab/features.h"
#include "flowstab/gbdt.h"
#include "flowstab/indicators.h"
#include "flowstab/treeshap.h"
#include "json.hpp"

namespace flowstab::pipeline {

struct SeriesSpec {
  std::string name;
  std::string unit = "MW";
  features::Aggregation aggregation = features::Aggregation::kSum;
  int resolution_minutes = 60;
  std::map<std::string, int> resolution_by_zone;
  bool ramp = false;
  std::string forecast_of;  // actual series this one forecasts
  std::string path;         // "{zone}" is substituted

  int resolution(const std::string& zone) const;
};

struct AreaSpec {
  std::string id;
  std::string frequency;  // empty without frequency data
  std::vector<std::string> zones;
};

struct GenerationSpec {
  std::vector<std::string> types;
  std::string path;  // "{zone}" and "{type}" are substituted
  int resolution_minutes = 60;
  std::map<std::string, double> weights;  // empty: synchronous types weigh 1
};

struct BorderSpec {
  std::string from;
  std::string to;
  std::string link;
  std::string scheduled;
  std::string physical;
  int resolution_minutes = 60;
};

struct LinkSpec {
  std::string id;
  std::string reference_area;
  std::vector<std::string> terminals;  // areas with feature data
};

// Either delta_p_mw or a series (mean absolute hourly change), and either
// ramp_rate_per_min or capacity/allowed/window.
struct RampSpec {
  std::string name;
  std::string series;
  std::optional<double> delta_p_mw;
  std::optional<double> ramp_rate_per_min;
  std::optional<double> capacity_mw;
  std::optional<double> allowed_mw;
  double window_minutes = 1.0;
};

struct TrainingSpec {
  gbdt::HyperParams base;
  std::vector<double> learning_rates = {0.05, 0.1};
  std::vector<int> max_leaves = {15, 31, 63};
  std::vector<int> min_samples_leaf = {20, 100};
  int folds = 5;

  std::vector<gbdt::HyperParams> grid() const;
};

struct PipelineConfig {
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
  indicators::IndicatorParams indicators;
  gbdt::SplitSpec split;
  TrainingSpec training;
  features::SignConvention convention = features::SignConvention::kScheduledMinusPhysical;
  std::chrono::seconds max_listing = features::kDefaultMaxListing;
  std::size_t top_k = 8;
  double dead_zone = analysis::kDefaultDeadZone;
  std::vector<AreaSpec> areas;
  std::vector<SeriesSpec> series;
  std::optional<GenerationSpec> generation;
  std::vector<BorderSpec> borders;
  std::vector<LinkSpec> links;
  std::string outages;
  std::vector<RampSpec> ramp_speed;
  std::string digest;  // sha256 of the config text

  // Relative paths resolve against base_dir.
  static PipelineConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
  // Reads the file and applies FLOWSTAB_DATA_DIR / FLOWSTAB_OUT_DIR.
  static PipelineConfig load(const std::filesystem::path& path);

  // Throws std::invalid_argument on dangling references or missing inputs.
  void validate() const;

  std::filesystem::path input(const std::string& relative) const;
  std::vector<std::string> input_files() const;  // relative to data_dir
  const AreaSpec& area(const std::string& id) const;
};

// Per-stage seed from the global seed (splitmix64 of seed ^ fnv1a(stage)).
std::uint64_t stage_seed(std::uint64_t global_seed, std::string_view stage);

// Rows of `table` with a present target, as a learner dataset.
gbdt::Dataset make_dataset(const features::FeatureTable& table, const std::vector<std::string>& names,
                           const std::string& target);

struct TrainedModel {
  std::string model_id;
  std::string target;
  gbdt::FitResult fit;
  gbdt::GridSearchResult search;
  std::size_t rows = 0;
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
  std::vector<Timestamp> test_hours;  // ascending
  std::optional<double> test_r2;
  std::optional<double> baseline_r2;
  std::vector<std::string> warnings;

  nlohmann::json report() const;
};

// Split, grid-search CV, final fit, test R2 and daily-profile baseline.
TrainedModel train_model(const std::string& model_id, const features::FeatureTable& table,
                         const std::vector<std::string>& names, const std::string& target,
                         const gbdt::SplitSpec& split, const TrainingSpec& training,
                         std::uint64_t seed, int jobs = 1);

struct Explanation {
  treeshap::ShapMatrix shap;
  std::vector<Timestamp> hours;
  std::optional<analysis::ImportanceReport> importance;
  std::vector<analysis::DependencyTable> dependencies;  // top features by rank
  std::map<std::string, analysis::FlowCorrelation> flow_tau;  // "<area>.integral" features
};

// SHAP on the given hours. With a reference area, every "<area>.integral"
// feature gets a tau between the integral and its SHAP contribution,
// oriented so positive means outflow from that area.
Explanation explain_model(const std::string& model_id, const gbdt::TreeEnsemble& ensemble,
                          const features::FeatureTable& table,
                          const std::vector<Timestamp>& hours, const std::string& reference_area,
                          std::size_t top_k, double dead_zone, int jobs = 1);

void cmd_indicators(const PipelineConfig& config);
void cmd_build_datasets(const PipelineConfig& config);
void cmd_train(const PipelineConfig& config, const std::string& model = {});
void cmd_explain(const PipelineConfig& config, const std::string& model = {});
void cmd_report(const PipelineConfig& config);

struct RunManifest {
  std::string config_sha256;
  std::map<std::string, std::string> inputs;     // relative path -> sha256
  std::map<std::string, std::string> artifacts;  // relative to out_dir
  std::map<std::string, double> timings;         // stage -> seconds

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& doc);
};

RunManifest read_manifest(const std::filesystem::path& out_dir);

// Throws std::invalid_argument when the report bundle is malformed.
void validate_bundle(const nlohmann::json& bundle);

}  // namespace flowstab::pipeline
