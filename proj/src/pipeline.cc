#include "flowstab/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

#include "flowstab/csv.h"
#include "flowstab/digest.h"
#include "flowstab/ingest.h"

namespace flowstab::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using features::FeatureTable;
using ingest::TabularSeries;

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kCrossAreaProvenance = "net_area_inflow";

std::string substitute(std::string pattern, const std::string& key, const std::string& value) {
  const std::string token = "{" + key + "}";
  for (auto pos = pattern.find(token); pos != std::string::npos; pos = pattern.find(token, pos)) {
    pattern.replace(pos, token.size(), value);
    pos += value.size();
  }
  return pattern;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_double(const json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  return doc.at(key).get<double>();
}

features::Aggregation parse_aggregation(const std::string& text) {
  if (text == "sum") return features::Aggregation::kSum;
  if (text == "mean") return features::Aggregation::kMean;
  throw std::invalid_argument("unknown aggregation '" + text + "'");
}

// Column schema for plain CSV artifacts.
json simple_schema(const std::vector<std::pair<std::string, std::string>>& columns, std::size_t rows) {
  json cols = json::array();
  for (const auto& [name, unit] : columns) cols.push_back({{"name", name}, {"unit", unit}});
  return {{"rows", rows}, {"columns", cols}};
}

void write_json(const fs::path& path, const json& doc) { csv::write_file(path, doc.dump(2) + "\n"); }

void write_table(const fs::path& csv_path, const std::string& text, const json& schema) {
  csv::write_file(csv_path, text);
  fs::path schema_path = csv_path;
  schema_path.replace_extension(".schema.json");
  write_json(schema_path, schema);
}

json read_json(const fs::path& path) {
  try {
    return json::parse(csv::read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void update_manifest(const PipelineConfig& config, const std::string& stage, double seconds) {
  RunManifest m;
  const fs::path path = config.out_dir / kManifestFile;
  if (fs::exists(path)) m = RunManifest::from_json(read_json(path));
  m.config_sha256 = config.digest;
  m.inputs.clear();
  for (const auto& rel : config.input_files()) m.inputs[rel] = sha256_file(config.input(rel));
  m.artifacts.clear();
  for (const auto& entry : fs::recursive_directory_iterator(config.out_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), config.out_dir).generic_string();
    if (rel == kManifestFile) continue;
    m.artifacts[rel] = sha256_file(entry.path());
  }
  m.timings[stage] = seconds;
  write_json(path, m.to_json());
}

// Hourly series per area, cached across datasets.
class AreaData {
 public:
  explicit AreaData(const PipelineConfig& config) : config_(config) {}

  // Techno-economic features of one area; with_flows adds the cross-area
  // net inflow columns.
  FeatureTable table(const std::string& area_id, bool with_flows) {
    const AreaSpec& area = config_.area(area_id);
    std::vector<features::SeriesColumn> columns;
    std::map<std::string, TabularSeries> aggregated;
    for (const auto& s : config_.series) {
      std::vector<TabularSeries> zones;
      for (const auto& z : area.zones) {
        const auto raw = ingest::parse_tabular_csv(config_.input(substitute(s.path, "zone", z)),
                                                   s.name, z, s.resolution(z));
        zones.push_back(ingest::resample_hourly(raw));
      }
      aggregated[s.name] = features::aggregate_area(zones, area.id, s.aggregation);
    }
    for (const auto& s : config_.series) {
      const TabularSeries& agg = aggregated.at(s.name);
      const std::string rule =
          s.aggregation == features::Aggregation::kSum ? "sum" : "mean";
      columns.push_back({agg, s.unit, s.name + " (" + rule + " over zones)"});
      if (s.ramp) {
        TabularSeries r = features::ramp(agg);
        r.name = s.name + "_ramp";
        columns.push_back({r, s.unit + "/h", "ramp(" + s.name + ")"});
      }
      if (!s.forecast_of.empty()) {
        const TabularSeries fe = features::forecast_error(agg, aggregated.at(s.forecast_of));
        columns.push_back({fe, s.unit, "forecast_error(" + s.name + ", " + s.forecast_of + ")"});
      }
    }
    if (config_.generation) {
      const auto& g = *config_.generation;
      std::vector<TabularSeries> by_type;
      for (const auto& type : g.types) {
        std::vector<TabularSeries> zones;
        for (const auto& z : area.zones) {
          const std::string rel = substitute(substitute(g.path, "zone", z), "type", type);
          zones.push_back(ingest::resample_hourly(
              ingest::parse_tabular_csv(config_.input(rel), type, z, g.resolution_minutes)));
        }
        by_type.push_back(features::aggregate_area(zones, area.id));
      }
      const auto weights = g.weights.empty() ? features::default_inertia_weights(g.types) : g.weights;
      columns.push_back({features::inertia_proxy(by_type, weights), "MW", "inertia_proxy"});
    }
    if (with_flows) {
      std::set<std::string> neighbors;
      for (const auto& b : config_.borders) {
        if (b.from == area.id) neighbors.insert(b.to);
        if (b.to == area.id) neighbors.insert(b.from);
      }
      for (const auto& n : neighbors) {
        const auto net = features::net_area_inflow(border_sets(), area.id, n);
        TabularSeries sched = net.scheduled;
        sched.name = n + "_net_scheduled_inflow";
        columns.push_back({sched, "MW", std::string(kCrossAreaProvenance) + " scheduled from " + n});
        TabularSeries unsched = net.unscheduled;
        unsched.name = n + "_net_unscheduled_inflow";
        columns.push_back(
            {unsched, "MW", std::string(kCrossAreaProvenance) + " unscheduled from " + n});
      }
    }
    return features::build_table(columns);
  }

  std::pair<TabularSeries, TabularSeries> border_series(const BorderSpec& b) {
    auto sched = ingest::resample_hourly(
        ingest::parse_tabular_csv(config_.input(b.scheduled), "scheduled", b.link, b.resolution_minutes));
    auto phys = ingest::resample_hourly(
        ingest::parse_tabular_csv(config_.input(b.physical), "physical", b.link, b.resolution_minutes));
    return {sched, phys};
  }

  const std::vector<features::BorderFlowSet>& border_sets() {
    if (!sets_) {
      sets_.emplace();
      for (const auto& b : config_.borders) {
        auto [sched, phys] = border_series(b);
        sets_->push_back(features::make_border_flow(b.from, b.to, sched, phys, config_.convention));
      }
    }
    return *sets_;
  }

 private:
  const PipelineConfig& config_;
  std::optional<std::vector<features::BorderFlowSet>> sets_;
};

std::vector<indicators::HourlyIndicators> load_indicators(const PipelineConfig& config,
                                                          const std::string& area) {
  const fs::path path = config.out_dir / "indicators" / (area + ".csv");
  if (!fs::exists(path)) {
    throw std::runtime_error("missing " + path.string() + "; run the indicators command first");
  }
  return indicators::parse_indicators_csv(path);
}

FeatureTable load_table(const fs::path& csv_path) {
  fs::path schema_path = csv_path;
  schema_path.replace_extension(".schema.json");
  return features::parse_table_csv(csv_path, read_json(schema_path));
}

json read_index(const PipelineConfig& config, const std::string& rel, const std::string& hint) {
  const fs::path path = config.out_dir / rel;
  if (!fs::exists(path)) {
    throw std::runtime_error("missing " + path.string() + "; run the " + hint + " command first");
  }
  return read_json(path);
}

std::vector<std::size_t> rows_for_hours(const FeatureTable& table, const std::vector<Timestamp>& hours) {
  std::vector<std::size_t> rows;
  for (const auto& h : hours) {
    const auto it = std::lower_bound(table.hours.begin(), table.hours.end(), h);
    if (it == table.hours.end() || *it != h) {
      throw std::runtime_error("test hour " + format_timestamp(h) + " missing from dataset");
    }
    rows.push_back(static_cast<std::size_t>(it - table.hours.begin()));
  }
  return rows;
}

}  // namespace

int SeriesSpec::resolution(const std::string& zone) const {
  const auto it = resolution_by_zone.find(zone);
  return it == resolution_by_zone.end() ? resolution_minutes : it->second;
}

std::vector<gbdt::HyperParams> TrainingSpec::grid() const {
  return gbdt::expand_grid(base, learning_rates, max_leaves, min_samples_leaf);
}

PipelineConfig PipelineConfig::from_json(const json& doc, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    auto resolve = [&](const std::string& p) {
      const fs::path path(p);
      return path.is_absolute() ? path : base_dir / path;
    };
    c.data_dir = resolve(doc.value("data_dir", "."));
    c.out_dir = resolve(doc.value("out_dir", "out"));
    c.seed = doc.value("seed", std::uint64_t{0});
    c.jobs = doc.value("jobs", 1);
    c.convention = features::parse_sign_convention(
        doc.value("sign_convention", std::string("scheduled_minus_physical")));
    if (doc.contains("max_listing_days")) {
      c.max_listing = std::chrono::days(doc.at("max_listing_days").get<int>());
    }
    if (doc.contains("indicators")) {
      const auto& i = doc.at("indicators");
      c.indicators.f_ref = i.value("f_ref", c.indicators.f_ref);
      c.indicators.rocof_window = i.value("rocof_window", c.indicators.rocof_window);
      c.indicators.smoothing_window = i.value("smoothing_window", c.indicators.smoothing_window);
      c.indicators.max_gap_fraction = i.value("max_gap_fraction", c.indicators.max_gap_fraction);
    }
    if (doc.contains("split")) {
      const auto& s = doc.at("split");
      c.split.train_fraction = s.value("train", c.split.train_fraction);
      c.split.validation_fraction = s.value("validation", c.split.validation_fraction);
      c.split.test_fraction = s.value("test", c.split.test_fraction);
    }
    if (doc.contains("training")) {
      const auto& t = doc.at("training");
      c.training.base = gbdt::hyperparams_from_json(t.value("params", json::object()), c.training.base);
      const json grid = t.value("grid", json::object());
      c.training.learning_rates = grid.value("learning_rate", c.training.learning_rates);
      c.training.max_leaves = grid.value("max_leaves", c.training.max_leaves);
      c.training.min_samples_leaf = grid.value("min_samples_leaf", c.training.min_samples_leaf);
      c.training.folds = t.value("folds", c.training.folds);
    }
    if (doc.contains("analysis")) {
      const auto& a = doc.at("analysis");
      c.top_k = a.value("top_k", c.top_k);
      c.dead_zone = a.value("dead_zone", c.dead_zone);
    }
    for (const auto& a : doc.value("areas", json::array())) {
      c.areas.push_back({a.at("id").get<std::string>(), a.value("frequency", std::string()),
                         a.at("zones").get<std::vector<std::string>>()});
    }
    for (const auto& s : doc.value("series", json::array())) {
      SeriesSpec spec;
      spec.name = s.at("name").get<std::string>();
      spec.unit = s.value("unit", spec.unit);
      spec.aggregation = parse_aggregation(s.value("aggregation", std::string("sum")));
      spec.resolution_minutes = s.value("resolution_minutes", 60);
      spec.resolution_by_zone = s.value("resolution_by_zone", std::map<std::string, int>{});
      spec.ramp = s.value("ramp", false);
      spec.forecast_of = s.value("forecast_of", std::string());
      spec.path = s.at("path").get<std::string>();
      c.series.push_back(spec);
    }
    if (doc.contains("generation")) {
      const auto& g = doc.at("generation");
      GenerationSpec spec;
      spec.types = g.at("types").get<std::vector<std::string>>();
      spec.path = g.at("path").get<std::string>();
      spec.resolution_minutes = g.value("resolution_minutes", 60);
      spec.weights = g.value("weights", std::map<std::string, double>{});
      c.generation = spec;
    }
    for (const auto& b : doc.value("borders", json::array())) {
      c.borders.push_back({b.at("from").get<std::string>(), b.at("to").get<std::string>(),
                           b.value("link", std::string()), b.at("scheduled").get<std::string>(),
                           b.at("physical").get<std::string>(), b.value("resolution_minutes", 60)});
    }
    for (const auto& l : doc.value("links", json::array())) {
      c.links.push_back({l.at("id").get<std::string>(), l.at("reference_area").get<std::string>(),
                         l.at("terminals").get<std::vector<std::string>>()});
    }
    c.outages = doc.value("outages", std::string());
    for (const auto& r : doc.value("ramp_speed", json::array())) {
      RampSpec spec;
      spec.name = r.at("name").get<std::string>();
      spec.series = r.value("series", std::string());
      spec.delta_p_mw = optional_double(r, "delta_p_mw");
      spec.ramp_rate_per_min = optional_double(r, "ramp_rate_per_min");
      spec.capacity_mw = optional_double(r, "capacity_mw");
      spec.allowed_mw = optional_double(r, "allowed_mw");
      spec.window_minutes = r.value("window_minutes", 1.0);
      c.ramp_speed.push_back(spec);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.split.seed = stage_seed(c.seed, "split");
  c.training.base.seed = stage_seed(c.seed, "fit");
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  const std::string text = csv::read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  if (const char* d = std::getenv("FLOWSTAB_DATA_DIR")) doc["data_dir"] = d;
  if (const char* o = std::getenv("FLOWSTAB_OUT_DIR")) doc["out_dir"] = o;
  PipelineConfig c = from_json(doc, path.parent_path());
  c.digest = sha256_hex(text);
  return c;
}

const AreaSpec& PipelineConfig::area(const std::string& id) const {
  for (const auto& a : areas) {
    if (a.id == id) return a;
  }
  throw std::invalid_argument("unknown area '" + id + "'");
}

fs::path PipelineConfig::input(const std::string& relative) const { return data_dir / relative; }

std::vector<std::string> PipelineConfig::input_files() const {
  std::set<std::string> files;
  for (const auto& a : areas) {
    if (!a.frequency.empty()) files.insert(a.frequency);
    for (const auto& z : a.zones) {
      for (const auto& s : series) files.insert(substitute(s.path, "zone", z));
      if (generation) {
        for (const auto& t : generation->types) {
          files.insert(substitute(substitute(generation->path, "zone", z), "type", t));
        }
      }
    }
  }
  for (const auto& b : borders) {
    files.insert(b.scheduled);
    files.insert(b.physical);
  }
  if (!outages.empty()) files.insert(outages);
  for (const auto& r : ramp_speed) {
    if (!r.series.empty()) files.insert(r.series);
  }
  return {files.begin(), files.end()};
}

void PipelineConfig::validate() const {
  indicators.validate();
  training.base.validate();
  if (jobs < 1) throw std::invalid_argument("jobs must be positive");
  if (training.folds < 2) throw std::invalid_argument("training.folds must be at least 2");
  if (top_k == 0) throw std::invalid_argument("analysis.top_k must be positive");
  if (!(dead_zone >= 0.0 && dead_zone < 1.0)) throw std::invalid_argument("dead_zone must lie in [0, 1)");
  std::set<std::string> ids;
  for (const auto& a : areas) {
    if (!ids.insert(a.id).second) throw std::invalid_argument("duplicate area '" + a.id + "'");
    if (a.zones.empty()) throw std::invalid_argument("area '" + a.id + "' has no zones");
  }
  std::set<std::string> names;
  for (const auto& s : series) names.insert(s.name);
  for (const auto& s : series) {
    if (!s.forecast_of.empty() && !names.count(s.forecast_of)) {
      throw std::invalid_argument("series '" + s.name + "' forecasts unknown series '" + s.forecast_of + "'");
    }
  }
  for (const auto& b : borders) {
    area(b.from);
    area(b.to);
  }
  for (const auto& l : links) {
    area(l.reference_area);
    for (const auto& t : l.terminals) area(t);
    const auto n = std::count_if(borders.begin(), borders.end(),
                                 [&](const BorderSpec& b) { return b.link == l.id; });
    if (n != 1) throw std::invalid_argument("link '" + l.id + "' needs exactly one border entry");
  }
  for (const auto& r : ramp_speed) {
    if (!r.delta_p_mw && r.series.empty()) {
      throw std::invalid_argument("ramp entry '" + r.name + "' needs delta_p_mw or series");
    }
    if (!r.ramp_rate_per_min && !(r.capacity_mw && r.allowed_mw)) {
      throw std::invalid_argument("ramp entry '" + r.name + "' needs a ramp rate");
    }
  }
  for (const auto& rel : input_files()) {
    if (!fs::exists(input(rel))) throw std::invalid_argument("missing input " + input(rel).string());
  }
}

std::uint64_t stage_seed(std::uint64_t global_seed, std::string_view stage) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : stage) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = global_seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

gbdt::Dataset make_dataset(const FeatureTable& table, const std::vector<std::string>& names,
                           const std::string& target) {
  const auto& y = table.column(target).values;
  std::vector<const std::vector<double>*> cols;
  for (const auto& n : names) cols.push_back(&table.column(n).values);
  gbdt::Dataset d;
  d.feature_names = names;
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    if (!std::isnan(y[r])) rows.push_back(r);
  }
  d.x = gbdt::Matrix(rows.size(), names.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) d.x.at(i, j) = (*cols[j])[rows[i]];
    d.y.push_back(y[rows[i]]);
    d.hours.push_back(table.hours[rows[i]]);
  }
  return d;
}

json TrainedModel::report() const {
  json hours = json::array();
  for (const auto& h : test_hours) hours.push_back(format_timestamp(h));
  return {{"model_id", model_id},
          {"target", target},
          {"features", fit.ensemble.feature_names},
          {"rows", rows},
          {"train_rows", train_rows},
          {"validation_rows", validation_rows},
          {"test_rows", test_hours.size()},
          {"best_params", gbdt::to_json(search.best)},
          {"grid_search", gbdt::to_json(search)},
          {"history", gbdt::to_json(fit.history)},
          {"trees", fit.ensemble.trees.size()},
          {"test_r2", optional_json(test_r2)},
          {"baseline_r2", optional_json(baseline_r2)},
          {"warnings", warnings},
          {"test_hours", hours}};
}

TrainedModel train_model(const std::string& model_id, const FeatureTable& table,
                         const std::vector<std::string>& names, const std::string& target,
                         const gbdt::SplitSpec& split, const TrainingSpec& training,
                         std::uint64_t seed, int jobs) {
  const gbdt::Dataset data = make_dataset(table, names, target);
  gbdt::SplitSpec spec = split;
  spec.seed = stage_seed(seed, "split:" + model_id);
  const gbdt::Split parts = gbdt::split_shuffled(data.size(), spec);
  const gbdt::Dataset train = data.subset(parts.train);
  const gbdt::Dataset validation = data.subset(parts.validation);
  const gbdt::Dataset test = data.subset(parts.test);

  TrainedModel m;
  m.model_id = model_id;
  m.target = target;
  m.rows = data.size();
  m.train_rows = train.size();
  m.validation_rows = validation.size();

  TrainingSpec ts = training;
  ts.base.seed = stage_seed(seed, "fit:" + model_id);
  const auto grid = ts.grid();
  const int folds = std::min<int>(ts.folds, static_cast<int>(train.size()));
  if (folds >= 2) {
    m.search = gbdt::grid_search_cv(train, validation, grid, folds, jobs);
  } else {
    m.search.best = grid.front();
    m.warnings.push_back("too few training rows for cross-validation; using the first grid entry");
  }
  m.fit = gbdt::fit(train, validation, m.search.best);
  for (const auto& w : m.fit.history.warnings) m.warnings.push_back(w);

  std::vector<std::size_t> order(test.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return test.hours[a] < test.hours[b]; });
  for (std::size_t i : order) m.test_hours.push_back(test.hours[i]);

  if (test.size() > 0) {
    const auto pred = gbdt::predict(m.fit.ensemble, test.x);
    m.test_r2 = gbdt::r2_score(pred, test.y);
    std::vector<int> train_hod;
    for (const auto& h : train.hours) train_hod.push_back(hour_of_day(h));
    std::vector<int> test_hod;
    for (const auto& h : test.hours) test_hod.push_back(hour_of_day(h));
    const auto baseline = gbdt::DailyProfilePredictor::fit(train.y, train_hod);
    m.baseline_r2 = gbdt::r2_score(baseline.predict(test_hod), test.y);
    if (!m.test_r2) m.warnings.push_back("test target is constant; R2 undefined");
  } else {
    m.warnings.push_back("empty test set");
  }
  return m;
}

Explanation explain_model(const std::string& model_id, const gbdt::TreeEnsemble& ensemble,
                          const FeatureTable& table,
                          const std::vector<Timestamp>& hours, const std::string& reference_area,
                          std::size_t top_k, double dead_zone, int jobs) {
  const auto rows = rows_for_hours(table, hours);
  const auto& names = ensemble.feature_names;
  gbdt::Matrix x(rows.size(), names.size());
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto& col = table.column(names[j]).values;
    for (std::size_t i = 0; i < rows.size(); ++i) x.at(i, j) = col[rows[i]];
  }
  Explanation e;
  e.hours = hours;
  e.shap = treeshap::shap_batch(ensemble, x, jobs);
  if (rows.empty() || names.empty()) return e;
  e.importance = analysis::normalized_importance(e.shap, model_id);
  if (!e.importance) return e;

  const auto top = e.importance->top(top_k);
  for (const auto& f : top) {
    const auto j = static_cast<std::size_t>(
        std::find(names.begin(), names.end(), f.feature) - names.begin());
    // Color by the most important other feature.
    const auto& color = top.front().feature == f.feature ? (top.size() > 1 ? top[1] : top[0])
                                                         : top.front();
    std::vector<double> fv(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) fv[i] = x.at(i, j);
    const auto phi = e.shap.column(j);
    if (color.feature == f.feature) {
      e.dependencies.push_back(analysis::dependency_table(f.feature, fv, phi));
    } else {
      const auto cj = static_cast<std::size_t>(
          std::find(names.begin(), names.end(), color.feature) - names.begin());
      std::vector<double> cv(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) cv[i] = x.at(i, cj);
      e.dependencies.push_back(analysis::dependency_table(f.feature, fv, phi, color.feature, cv));
    }
  }

  if (!reference_area.empty()) {
    const std::string suffix = ".integral";
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto& n = names[j];
      if (n.size() <= suffix.size() || n.compare(n.size() - suffix.size(), suffix.size(), suffix) != 0) {
        continue;
      }
      const std::string area = n.substr(0, n.size() - suffix.size());
      const auto orientation = area == reference_area ? analysis::FlowOrientation::kOutflowPositive
                                                      : analysis::FlowOrientation::kInflowPositive;
      std::vector<double> integral(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) integral[i] = x.at(i, j);
      e.flow_tau[n] = analysis::shap_flow_correlation(e.shap.column(j), integral, orientation, dead_zone);
    }
  }
  return e;
}

void cmd_indicators(const PipelineConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  for (const auto& a : config.areas) {
    if (a.frequency.empty()) continue;
    const auto trace = ingest::parse_frequency_csv(config.input(a.frequency), a.id);
    const auto records = indicators::compute_hourly_indicators(trace, config.indicators);
    write_table(config.out_dir / "indicators" / (a.id + ".csv"),
                indicators::format_indicators_csv(a.id, records),
                simple_schema({{"hour", "UTC"},
                               {"area", ""},
                               {"rocof_hz_per_s", "Hz/s"},
                               {"nadir_hz", "Hz"},
                               {"msd_hz2", "Hz^2"},
                               {"integral_hz_s", "Hz*s"},
                               {"valid", "bool"}},
                              records.size()));
  }
  update_manifest(config, "indicators", seconds_since(t0));
}

void cmd_build_datasets(const PipelineConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  AreaData data(config);
  const fs::path dir = config.out_dir / "datasets";
  json index = {{"stability", json::array()}, {"flow", json::array()}};
  json warnings = json::array();

  std::map<std::string, std::vector<indicators::HourlyIndicators>> inds;
  for (const auto& a : config.areas) {
    if (!a.frequency.empty()) inds[a.id] = load_indicators(config, a.id);
  }

  for (const auto& a : config.areas) {
    if (a.frequency.empty()) continue;
    const auto ds = features::assemble_stability_dataset(a.id, inds.at(a.id), {data.table(a.id, true)});
    for (const auto& w : ds.warnings) warnings.push_back(a.id + ": " + w);
    const FeatureTable table = features::to_table(ds);
    const std::string file = "stability_" + a.id + ".csv";
    write_table(dir / file, features::format_table_csv(table), features::table_schema(table));
    index["stability"].push_back({{"area", a.id}, {"file", file}});
  }

  std::map<std::string, ingest::OutageCalendar> calendars;
  if (!config.outages.empty()) calendars = ingest::parse_outage_csv(config.input(config.outages));

  std::string excluded = "link_id,hour,reason\n";
  std::size_t excluded_rows = 0;
  std::string review = "link_id,start,end,reason\n";
  std::size_t review_rows = 0;
  for (const auto& l : config.links) {
    const auto border = std::find_if(config.borders.begin(), config.borders.end(),
                                     [&](const BorderSpec& b) { return b.link == l.id; });
    features::FlowDatasetInput in;
    in.link_id = l.id;
    in.reference_area = l.reference_area;
    in.convention = config.convention;
    for (const auto& t : l.terminals) {
      in.terminal_features[t] = data.table(t, false);
      if (inds.count(t)) in.indicators[t] = inds.at(t);
    }
    auto [sched, phys] = data.border_series(*border);
    if (border->from != l.reference_area) {
      for (auto& v : sched.values) v = -v;
      for (auto& v : phys.values) v = -v;
    }
    in.scheduled = sched;
    in.physical = phys;
    features::LinkDataset ds = features::assemble_flow_dataset(in);
    if (const auto it = calendars.find(l.id); it != calendars.end()) {
      auto masked = features::mask_unavailability(ds, it->second, config.max_listing);
      ds = std::move(masked.dataset);
      for (const auto& r : masked.review) {
        review += r.link_id + "," + format_timestamp(r.interval.start) + "," +
                  format_timestamp(r.interval.end) + "," + r.reason + "\n";
        ++review_rows;
      }
    }
    for (const auto& [hour, reason] : ds.excluded_hours) {
      excluded += l.id + "," + format_timestamp(hour) + "," + reason + "\n";
      ++excluded_rows;
    }
    if (ds.features.num_rows() == 0) warnings.push_back(l.id + ": flow dataset is empty");
    const FeatureTable table = features::to_table(ds);
    const std::string file = "flow_" + l.id + ".csv";
    write_table(dir / file, features::format_table_csv(table), features::table_schema(table));
    index["flow"].push_back({{"link", l.id}, {"reference_area", l.reference_area}, {"file", file}});
  }
  write_table(dir / "excluded_hours.csv", excluded,
              simple_schema({{"link_id", ""}, {"hour", "UTC"}, {"reason", ""}}, excluded_rows));
  write_table(dir / "review.csv", review,
              simple_schema({{"link_id", ""}, {"start", "UTC"}, {"end", "UTC"}, {"reason", ""}},
                            review_rows));
  index["warnings"] = warnings;
  write_json(dir / "index.json", index);
  update_manifest(config, "build-datasets", seconds_since(t0));
}

void cmd_train(const PipelineConfig& config, const std::string& model) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  const json index = read_index(config, "datasets/index.json", "build-datasets");
  const fs::path dir = config.out_dir / "models";

  struct Job {
    std::string id;
    std::string kind;
    std::string file;
    std::string target;
    std::string reference_area;
    std::vector<std::string> features;
  };
  std::vector<Job> jobs;
  for (const auto& s : index.at("stability")) {
    const std::string area = s.at("area");
    const std::string file = s.at("file");
    const FeatureTable table = load_table(config.out_dir / "datasets" / file);
    const auto all = table.feature_names();
    std::vector<std::string> no_flows;
    for (const auto& n : all) {
      if (table.column(n).provenance.rfind(kCrossAreaProvenance, 0) != 0) no_flows.push_back(n);
    }
    for (const char* ind : features::kIndicatorNames) {
      const std::string id = "stability_" + area + "_" + ind;
      jobs.push_back({id, "stability", file, std::string("target.") + ind, "", all});
      if (no_flows.size() != all.size()) {
        jobs.push_back({id + "_nohvdc", "stability_nohvdc", file, std::string("target.") + ind, "",
                        no_flows});
      }
    }
  }
  for (const auto& f : index.at("flow")) {
    const std::string file = f.at("file");
    const FeatureTable table = load_table(config.out_dir / "datasets" / file);
    jobs.push_back({"flow_" + f.at("link").get<std::string>(), "flow", file,
                    "target.unscheduled_outflow", f.at("reference_area"), table.feature_names()});
  }

  json models = json::array();
  bool matched = model.empty();
  for (const auto& job : jobs) {
    if (!model.empty() && job.id != model) continue;
    matched = true;
    const FeatureTable table = load_table(config.out_dir / "datasets" / job.file);
    const TrainedModel m = train_model(job.id, table, job.features, job.target, config.split,
                                       config.training, config.seed, config.jobs);
    write_json(dir / (job.id + ".json"), gbdt::to_json(m.fit.ensemble));
    json report = m.report();
    report["kind"] = job.kind;
    report["dataset"] = job.file;
    report["reference_area"] = job.reference_area;
    write_json(dir / (job.id + ".report.json"), report);
    models.push_back({{"model_id", job.id},
                      {"kind", job.kind},
                      {"dataset", job.file},
                      {"target", job.target},
                      {"reference_area", job.reference_area}});
  }
  if (!matched) throw std::invalid_argument("no model named '" + model + "'");
  if (!model.empty() && fs::exists(dir / "index.json")) {
    // keep previously trained models, in job order
    std::set<std::string> listed;
    for (const auto& e : read_json(dir / "index.json").at("models")) listed.insert(e.at("model_id"));
    json merged = json::array();
    for (const auto& job : jobs) {
      if (job.id == model) {
        merged.push_back(models.front());
      } else if (listed.count(job.id) != 0) {
        merged.push_back({{"model_id", job.id},
                          {"kind", job.kind},
                          {"dataset", job.file},
                          {"target", job.target},
                          {"reference_area", job.reference_area}});
      }
    }
    models = std::move(merged);
  }
  write_json(dir / "index.json", {{"models", models}});
  update_manifest(config, "train", seconds_since(t0));
}

void cmd_explain(const PipelineConfig& config, const std::string& model) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  const json index = read_index(config, "models/index.json", "train");
  bool matched = model.empty();
  for (const auto& entry : index.at("models")) {
    const std::string id = entry.at("model_id");
    if (!model.empty() && id != model) continue;
    matched = true;
    const auto ensemble = gbdt::ensemble_from_json(read_json(config.out_dir / "models" / (id + ".json")));
    const json report = read_json(config.out_dir / "models" / (id + ".report.json"));
    const FeatureTable table =
        load_table(config.out_dir / "datasets" / entry.at("dataset").get<std::string>());
    std::vector<Timestamp> hours;
    for (const auto& h : report.at("test_hours")) hours.push_back(parse_timestamp(h.get<std::string>()));
    const std::string target = entry.at("target");
    const Explanation e = explain_model(id, ensemble, table, hours,
                                        entry.at("reference_area").get<std::string>(), config.top_k,
                                        config.dead_zone, config.jobs);
    const fs::path dir = config.out_dir / "explain" / id;

    std::vector<std::pair<std::string, std::string>> shap_cols = {{"hour", "UTC"}};
    const std::string unit = table.column(target).unit;
    for (const auto& n : ensemble.feature_names) shap_cols.push_back({"phi_" + n, unit});
    shap_cols.push_back({"base_value", unit});
    shap_cols.push_back({"prediction", unit});
    write_table(dir / "shap.csv", treeshap::format_shap_csv(e.shap, e.hours),
                simple_schema(shap_cols, e.hours.size()));

    json summary = {{"model_id", id}, {"rows", e.hours.size()}, {"importance_defined", e.importance.has_value()}};
    if (e.importance) {
      write_table(dir / "importance.csv", analysis::format_importance_csv(*e.importance),
                  simple_schema({{"model_id", ""}, {"feature", ""}, {"importance", ""}, {"rank", ""}},
                                e.importance->entries.size()));
    } else {
      summary["warning"] = "all SHAP values are zero; importance undefined";
    }
    json deps = json::array();
    for (std::size_t k = 0; k < e.dependencies.size(); ++k) {
      const auto& d = e.dependencies[k];
      const std::string file = "dependency_" + std::to_string(k + 1) + ".csv";
      csv::write_file(dir / file, analysis::format_dependency_csv(d));
      json header = analysis::dependency_header(d);
      header["units"] = {table.column(d.feature).unit, unit,
                         d.color_feature.empty() ? "" : table.column(d.color_feature).unit};
      write_json(dir / ("dependency_" + std::to_string(k + 1) + ".schema.json"), header);
      deps.push_back({{"rank", k + 1}, {"feature", d.feature}, {"file", file},
                      {"kendall_tau", header.at("kendall_tau")}});
    }
    summary["dependencies"] = deps;
    json taus = json::array();
    for (const auto& [feature, c] : e.flow_tau) {
      taus.push_back({{"feature", feature},
                      {"tau", optional_json(c.tau)},
                      {"direction", analysis::to_string(c.direction)}});
    }
    summary["flow_tau"] = taus;
    write_json(dir / "summary.json", summary);
  }
  if (!matched) throw std::invalid_argument("no model named '" + model + "'");
  update_manifest(config, "explain", seconds_since(t0));
}

void cmd_report(const PipelineConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  const fs::path index_path = config.out_dir / "models" / "index.json";
  if (!fs::exists(index_path) || !fs::exists(config.out_dir / "explain")) {
    throw std::runtime_error("run directory " + config.out_dir.string() +
                             " has no trained and explained models");
  }
  const json index = read_json(index_path);
  const fs::path dir = config.out_dir / "report";

  json bundle = {{"format", "flowstab.report"},
                 {"version", 1},
                 {"config_sha256", config.digest},
                 {"models", json::array()},
                 {"hvdc_comparisons", json::array()},
                 {"importance", json::array()},
                 {"dependency_tables", json::array()},
                 {"flow_tau", json::array()},
                 {"ramp_speed", json::array()}};
  std::string r2_csv = "model_id,kind,test_r2,baseline_r2,factor,difference\n";
  std::string imp_csv = "model_id,feature,importance,rank\n";
  std::string tau_csv = "model_id,feature,tau,direction\n";
  std::string hvdc_csv = "label,model_r2,baseline_r2,factor,difference\n";
  std::size_t r2_rows = 0, imp_rows = 0, tau_rows = 0, hvdc_rows = 0;
  auto num = [](const json& v) { return v.is_null() ? std::string() : csv::format_double(v.get<double>()); };

  std::map<std::string, double> r2_by_id;
  for (const auto& entry : index.at("models")) {
    const std::string id = entry.at("model_id");
    const json report = read_json(config.out_dir / "models" / (id + ".report.json"));
    if (!fs::exists(config.out_dir / "explain" / id / "summary.json")) {
      throw std::runtime_error("model " + id + " has not been explained");
    }
    const json summary = read_json(config.out_dir / "explain" / id / "summary.json");
    const json test_r2 = report.at("test_r2");
    const json base_r2 = report.at("baseline_r2");
    json bench = nullptr;
    if (!test_r2.is_null() && !base_r2.is_null()) {
      bench = analysis::to_json(analysis::benchmark_comparison(test_r2.get<double>(),
                                                               base_r2.get<double>(), "daily_profile"));
      r2_by_id[id] = test_r2.get<double>();
    }
    bundle["models"].push_back({{"model_id", id},
                                {"kind", entry.at("kind")},
                                {"target", entry.at("target")},
                                {"test_r2", test_r2},
                                {"baseline_r2", base_r2},
                                {"benchmark", bench}});
    r2_csv += id + "," + entry.at("kind").get<std::string>() + "," + num(test_r2) + "," + num(base_r2) +
              "," + (bench.is_null() ? "" : num(bench.at("factor"))) + "," +
              (bench.is_null() ? "" : num(bench.at("difference"))) + "\n";
    ++r2_rows;

    const fs::path imp_path = config.out_dir / "explain" / id / "importance.csv";
    json ranking = json::array();
    if (fs::exists(imp_path)) {
      const auto t = csv::read(imp_path);
      for (const auto& [line, f] : t.rows) {
        const int rank = std::stoi(f.at(3));
        if (static_cast<std::size_t>(rank) > config.top_k) continue;
        ranking.push_back({{"feature", f.at(1)}, {"importance", std::stod(f.at(2))}, {"rank", rank}});
        imp_csv += f.at(0) + "," + f.at(1) + "," + f.at(2) + "," + f.at(3) + "\n";
        ++imp_rows;
      }
    }
    bundle["importance"].push_back({{"model_id", id}, {"top", ranking}});
    for (const auto& d : summary.at("dependencies")) {
      bundle["dependency_tables"].push_back({{"model_id", id},
                                             {"feature", d.at("feature")},
                                             {"file", "explain/" + id + "/" + d.at("file").get<std::string>()},
                                             {"kendall_tau", d.at("kendall_tau")}});
    }
    for (const auto& t : summary.at("flow_tau")) {
      bundle["flow_tau"].push_back({{"model_id", id},
                                    {"feature", t.at("feature")},
                                    {"tau", t.at("tau")},
                                    {"direction", t.at("direction")}});
      tau_csv += id + "," + t.at("feature").get<std::string>() + "," + num(t.at("tau")) + "," +
                 t.at("direction").get<std::string>() + "\n";
      ++tau_rows;
    }
  }

  // With vs. without cross-area flow features.
  for (const auto& [id, r2] : r2_by_id) {
    const std::string suffix = "_nohvdc";
    if (id.size() > suffix.size() && id.compare(id.size() - suffix.size(), suffix.size(), suffix) == 0) {
      continue;
    }
    const auto it = r2_by_id.find(id + suffix);
    if (it == r2_by_id.end()) continue;
    const auto cmp = analysis::benchmark_comparison(r2, it->second, id);
    bundle["hvdc_comparisons"].push_back(analysis::to_json(cmp));
    hvdc_csv += id + "," + csv::format_double(cmp.model_r2) + "," + csv::format_double(cmp.baseline_r2) +
                "," + (cmp.factor ? csv::format_double(*cmp.factor) : std::string()) + "," +
                csv::format_double(cmp.difference) + "\n";
    ++hvdc_rows;
  }

  std::vector<analysis::RampSpeedRow> ramps;
  if (!config.ramp_speed.empty()) {
    std::vector<analysis::RampEntry> entries;
    for (const auto& r : config.ramp_speed) {
      analysis::RampEntry e;
      e.name = r.name;
      if (r.delta_p_mw) {
        e.delta_p_mw = *r.delta_p_mw;
      } else {
        e.delta_p_mw = analysis::mean_abs_hourly_change(
            ingest::resample_hourly(ingest::parse_tabular_csv(config.input(r.series), r.name, "")));
      }
      e.ramp_rate_per_min = r.ramp_rate_per_min
                                ? *r.ramp_rate_per_min
                                : analysis::ramp_rate_per_min(*r.capacity_mw, *r.allowed_mw, r.window_minutes);
      entries.push_back(e);
    }
    ramps = analysis::ramp_speed(entries);
    for (const auto& r : ramps) {
      bundle["ramp_speed"].push_back({{"name", r.name},
                                      {"delta_p_mw", r.delta_p_mw},
                                      {"ramp_rate_per_min", r.ramp_rate_per_min},
                                      {"rocop_mw_per_min", r.rocop_mw_per_min},
                                      {"s", r.s}});
    }
  }

  validate_bundle(bundle);
  write_json(dir / "bundle.json", bundle);
  write_table(dir / "r2.csv", r2_csv,
              simple_schema({{"model_id", ""}, {"kind", ""}, {"test_r2", ""}, {"baseline_r2", ""},
                             {"factor", ""}, {"difference", ""}},
                            r2_rows));
  write_table(dir / "importance.csv", imp_csv,
              simple_schema({{"model_id", ""}, {"feature", ""}, {"importance", ""}, {"rank", ""}}, imp_rows));
  write_table(dir / "tau.csv", tau_csv,
              simple_schema({{"model_id", ""}, {"feature", ""}, {"tau", ""}, {"direction", ""}}, tau_rows));
  write_table(dir / "hvdc.csv", hvdc_csv,
              simple_schema({{"label", ""}, {"model_r2", ""}, {"baseline_r2", ""}, {"factor", ""},
                             {"difference", ""}},
                            hvdc_rows));
  write_table(dir / "ramp_speed.csv", analysis::format_ramp_speed_csv(ramps),
              simple_schema({{"name", ""},
                             {"delta_p_mw", "MW"},
                             {"ramp_rate_per_min", "1/min"},
                             {"rocop_mw_per_min", "MW/min"},
                             {"s", ""}},
                            ramps.size()));
  update_manifest(config, "report", seconds_since(t0));
}

json RunManifest::to_json() const {
  return {{"config_sha256", config_sha256}, {"inputs", inputs}, {"artifacts", artifacts}, {"timings", timings}};
}

RunManifest RunManifest::from_json(const json& doc) {
  RunManifest m;
  m.config_sha256 = doc.value("config_sha256", std::string());
  m.inputs = doc.value("inputs", std::map<std::string, std::string>{});
  m.artifacts = doc.value("artifacts", std::map<std::string, std::string>{});
  m.timings = doc.value("timings", std::map<std::string, double>{});
  return m;
}

RunManifest read_manifest(const fs::path& out_dir) {
  const fs::path path = out_dir / kManifestFile;
  if (!fs::exists(path)) throw std::runtime_error("no manifest in " + out_dir.string());
  return RunManifest::from_json(read_json(path));
}

void validate_bundle(const json& bundle) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("report bundle: " + what); };
  auto need = [&](const json& obj, const char* key, json::value_t type) -> const json& {
    if (!obj.is_object() || !obj.contains(key)) fail(std::string("missing '") + key + "'");
    const json& v = obj.at(key);
    const bool number = type == json::value_t::number_float;
    if (number ? !v.is_number() : v.type() != type) fail(std::string("'") + key + "' has the wrong type");
    return v;
  };
  auto number_or_null = [&](const json& obj, const char* key) {
    if (!obj.contains(key)) fail(std::string("missing '") + key + "'");
    const json& v = obj.at(key);
    if (!v.is_null() && !v.is_number()) fail(std::string("'") + key + "' must be a number or null");
  };
  if (need(bundle, "format", json::value_t::string) != "flowstab.report") fail("unknown format");
  need(bundle, "version", json::value_t::number_float);
  for (const auto& m : need(bundle, "models", json::value_t::array)) {
    need(m, "model_id", json::value_t::string);
    number_or_null(m, "test_r2");
    number_or_null(m, "baseline_r2");
  }
  for (const auto& c : need(bundle, "hvdc_comparisons", json::value_t::array)) {
    need(c, "label", json::value_t::string);
    number_or_null(c, "factor");
    need(c, "difference", json::value_t::number_float);
  }
  for (const auto& imp : need(bundle, "importance", json::value_t::array)) {
    need(imp, "model_id", json::value_t::string);
    for (const auto& e : need(imp, "top", json::value_t::array)) {
      const double v = need(e, "importance", json::value_t::number_float).get<double>();
      if (!(v >= 0.0 && v <= 1.0)) fail("importance outside [0, 1]");
    }
  }
  for (const auto& d : need(bundle, "dependency_tables", json::value_t::array)) {
    need(d, "file", json::value_t::string);
    number_or_null(d, "kendall_tau");
  }
  for (const auto& t : need(bundle, "flow_tau", json::value_t::array)) {
    number_or_null(t, "tau");
    const std::string dir = need(t, "direction", json::value_t::string);
    if (dir != "control-like" && dir != "disturbance-like" && dir != "inconclusive") fail("bad direction");
  }
  bool has_max = false;
  const auto& ramps = need(bundle, "ramp_speed", json::value_t::array);
  for (const auto& r : ramps) {
    const double s = need(r, "s", json::value_t::number_float).get<double>();
    if (!(s >= 0.0 && s <= 1.0)) fail("ramp speed s outside [0, 1]");
    if (s == 1.0) has_max = true;
  }
  if (!ramps.empty() && !has_max) fail("no ramp speed entry with s = 1");
}

}  // namespace flowstab::pipeline
