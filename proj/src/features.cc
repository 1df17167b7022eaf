#include "flowstab/features.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "flowstab/csv.h"

namespace flowstab::features {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_hourly(const TabularSeries& s) {
  if (s.resolution_minutes != 60) {
    throw std::invalid_argument("series '" + s.name + "' is not hourly; resample first");
  }
}

struct Grid {
  Timestamp start{};
  std::size_t hours = 0;
  Timestamp at(std::size_t i) const { return start + kHour * static_cast<std::int64_t>(i); }
};

Grid union_grid(const std::vector<const TabularSeries*>& series) {
  Grid g;
  bool first = true;
  Timestamp end{};
  for (const auto* s : series) {
    if (s->size() == 0) continue;
    if (first) {
      g.start = s->start;
      end = s->end();
      first = false;
    } else {
      g.start = std::min(g.start, s->start);
      end = std::max(end, s->end());
    }
  }
  if (!first) g.hours = static_cast<std::size_t>((end - g.start) / kHour);
  return g;
}

TabularSeries on_grid(const TabularSeries& like, const Grid& g) {
  TabularSeries out;
  out.name = like.name;
  out.zone_id = like.zone_id;
  out.resolution_minutes = 60;
  out.start = g.start;
  out.values.assign(g.hours, kNaN);
  return out;
}

const char* role_name(ColumnRole role) { return role == ColumnRole::kTarget ? "target" : "feature"; }

}  // namespace

SignConvention parse_sign_convention(const std::string& text) {
  if (text == "scheduled_minus_physical") return SignConvention::kScheduledMinusPhysical;
  if (text == "physical_minus_scheduled") return SignConvention::kPhysicalMinusScheduled;
  throw std::invalid_argument("unknown sign convention '" + text + "'");
}

std::string to_string(SignConvention convention) {
  return convention == SignConvention::kScheduledMinusPhysical ? "scheduled_minus_physical"
                                                               : "physical_minus_scheduled";
}

void FeatureTable::add_column(Column column) {
  if (column.values.size() != hours.size()) {
    throw std::invalid_argument("column '" + column.name + "' has " +
                                std::to_string(column.values.size()) + " rows, table has " +
                                std::to_string(hours.size()));
  }
  if (find(column.name) != nullptr) {
    throw std::invalid_argument("duplicate column name '" + column.name + "'");
  }
  columns_.push_back(std::move(column));
}

const Column* FeatureTable::find(const std::string& name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const Column& FeatureTable::column(const std::string& name) const {
  const Column* c = find(name);
  if (c == nullptr) throw std::out_of_range("no column '" + name + "'");
  return *c;
}

bool FeatureTable::missing(std::size_t column, std::size_t row) const {
  return std::isnan(columns_.at(column).values.at(row));
}

std::vector<std::string> FeatureTable::feature_names() const {
  std::vector<std::string> names;
  for (const auto& c : columns_) {
    if (c.role == ColumnRole::kFeature) names.push_back(c.name);
  }
  return names;
}

FeatureTable FeatureTable::select_rows(const std::vector<std::size_t>& rows) const {
  FeatureTable out;
  out.hours.reserve(rows.size());
  for (std::size_t r : rows) out.hours.push_back(hours.at(r));
  for (const auto& c : columns_) {
    Column copy{c.name, c.unit, c.provenance, {}, c.role};
    copy.values.reserve(rows.size());
    for (std::size_t r : rows) copy.values.push_back(c.values[r]);
    out.columns_.push_back(std::move(copy));
  }
  return out;
}

void FeatureTable::validate() const {
  for (std::size_t i = 1; i < hours.size(); ++i) {
    if (!(hours[i - 1] < hours[i])) throw std::invalid_argument("table hours not sorted");
  }
  std::set<std::string> names;
  for (const auto& c : columns_) {
    if (c.values.size() != hours.size()) throw std::invalid_argument("ragged column " + c.name);
    if (!names.insert(c.name).second) throw std::invalid_argument("duplicate column " + c.name);
  }
}

FeatureTable build_table(const std::vector<SeriesColumn>& series) {
  std::vector<const TabularSeries*> ptrs;
  for (const auto& s : series) {
    require_hourly(s.series);
    ptrs.push_back(&s.series);
  }
  const Grid g = union_grid(ptrs);
  FeatureTable table;
  for (std::size_t i = 0; i < g.hours; ++i) table.hours.push_back(g.at(i));
  for (const auto& s : series) {
    Column c{s.series.name, s.unit, s.provenance, std::vector<double>(g.hours, kNaN)};
    for (std::size_t i = 0; i < g.hours; ++i) c.values[i] = s.series.value_at(g.at(i));
    table.add_column(std::move(c));
  }
  return table;
}

FeatureTable inner_join(const std::vector<FeatureTable>& tables) {
  FeatureTable out;
  if (tables.empty()) return out;
  std::vector<Timestamp> common = tables.front().hours;
  for (std::size_t t = 1; t < tables.size(); ++t) {
    std::vector<Timestamp> next;
    std::set_intersection(common.begin(), common.end(), tables[t].hours.begin(),
                          tables[t].hours.end(), std::back_inserter(next));
    common = std::move(next);
  }
  out.hours = common;
  for (const auto& table : tables) {
    std::unordered_map<std::int64_t, std::size_t> index;
    for (std::size_t i = 0; i < table.hours.size(); ++i) {
      index.emplace(table.hours[i].time_since_epoch().count(), i);
    }
    std::vector<std::size_t> rows;
    rows.reserve(common.size());
    for (const auto& h : common) rows.push_back(index.at(h.time_since_epoch().count()));
    for (const auto& c : table.columns()) {
      Column copy{c.name, c.unit, c.provenance, {}, c.role};
      copy.values.reserve(rows.size());
      for (std::size_t r : rows) copy.values.push_back(c.values[r]);
      out.add_column(std::move(copy));
    }
  }
  return out;
}

TabularSeries aggregate_area(const std::vector<TabularSeries>& series_by_zone,
                             const std::string& area, Aggregation rule) {
  if (series_by_zone.empty()) {
    throw std::invalid_argument("area '" + area + "' has no member zone series");
  }
  std::vector<const TabularSeries*> ptrs;
  for (const auto& s : series_by_zone) {
    require_hourly(s);
    if (s.name != series_by_zone.front().name) {
      throw std::invalid_argument("cannot aggregate different quantities '" + s.name + "' and '" +
                                  series_by_zone.front().name + "'");
    }
    ptrs.push_back(&s);
  }
  const Grid g = union_grid(ptrs);
  TabularSeries out = on_grid(series_by_zone.front(), g);
  out.zone_id = area;
  for (std::size_t i = 0; i < g.hours; ++i) {
    double sum = 0.0;
    bool complete = true;
    for (const auto* s : ptrs) {
      const double v = s->value_at(g.at(i));
      if (std::isnan(v)) {
        complete = false;
        break;
      }
      sum += v;
    }
    if (!complete) continue;
    out.values[i] = rule == Aggregation::kMean ? sum / static_cast<double>(ptrs.size()) : sum;
  }
  return out;
}

TabularSeries ramp(const TabularSeries& series) {
  require_hourly(series);
  TabularSeries out = series;
  for (std::size_t i = 0; i < series.size(); ++i) {
    out.values[i] = i == 0 ? kNaN : series.values[i] - series.values[i - 1];
  }
  return out;
}

TabularSeries forecast_error(const TabularSeries& day_ahead, const TabularSeries& actual) {
  require_hourly(day_ahead);
  require_hourly(actual);
  TabularSeries out;
  out.name = day_ahead.name + "_forecast_error";
  out.zone_id = day_ahead.zone_id;
  out.resolution_minutes = 60;
  out.start = std::max(day_ahead.start, actual.start);
  const Timestamp end = std::min(day_ahead.end(), actual.end());
  if (end <= out.start) return out;
  const auto n = static_cast<std::size_t>((end - out.start) / kHour);
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Timestamp t = out.timestamp(i);
    out.values[i] = day_ahead.value_at(t) - actual.value_at(t);
  }
  return out;
}

TabularSeries inertia_proxy(const std::vector<TabularSeries>& scheduled_generation_by_type,
                            const std::map<std::string, double>& weights) {
  if (scheduled_generation_by_type.empty()) {
    throw std::invalid_argument("inertia proxy needs at least one generation series");
  }
  std::vector<const TabularSeries*> all;
  std::vector<std::pair<const TabularSeries*, double>> weighted;
  for (const auto& s : scheduled_generation_by_type) {
    require_hourly(s);
    all.push_back(&s);
    const auto it = weights.find(s.name);
    const double w = it == weights.end() ? 0.0 : it->second;
    if (w != 0.0) weighted.emplace_back(&s, w);
  }
  const Grid g = union_grid(all);
  TabularSeries out = on_grid(scheduled_generation_by_type.front(), g);
  out.name = "inertia_proxy";
  for (std::size_t i = 0; i < g.hours; ++i) {
    double sum = 0.0;
    bool complete = true;
    for (const auto& [s, w] : weighted) {
      const double v = s->value_at(g.at(i));
      if (std::isnan(v)) {
        complete = false;
        break;
      }
      sum += w * v;
    }
    out.values[i] = complete ? sum : kNaN;
  }
  return out;
}

std::map<std::string, double> default_inertia_weights(const std::vector<std::string>& types) {
  static const std::vector<std::string> kSynchronous = {"nuclear", "fossil", "hydro", "biomass",
                                                        "lignite", "coal", "gas", "oil"};
  std::map<std::string, double> weights;
  for (const auto& t : types) {
    double w = 0.0;
    for (const auto& key : kSynchronous) {
      if (t.find(key) != std::string::npos) w = 1.0;
    }
    weights[t] = w;
  }
  return weights;
}

namespace {

TabularSeries unscheduled_of(const TabularSeries& scheduled, const TabularSeries& physical,
                             SignConvention convention) {
  TabularSeries out = scheduled;
  out.name = "unscheduled";
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double s = scheduled.values[i];
    const double p = physical.values[i];
    out.values[i] = convention == SignConvention::kScheduledMinusPhysical ? s - p : p - s;
  }
  return out;
}

}  // namespace

BorderFlowSet make_border_flow(const std::string& from_area, const std::string& to_area,
                               const TabularSeries& scheduled, const TabularSeries& physical,
                               SignConvention convention) {
  require_hourly(scheduled);
  require_hourly(physical);
  const Grid g = union_grid({&scheduled, &physical});
  BorderFlowSet set;
  set.from_area = from_area;
  set.to_area = to_area;
  set.convention = convention;
  set.scheduled = on_grid(scheduled, g);
  set.scheduled.name = "scheduled";
  set.physical = on_grid(physical, g);
  set.physical.name = "physical";
  for (std::size_t i = 0; i < g.hours; ++i) {
    set.scheduled.values[i] = scheduled.value_at(g.at(i));
    set.physical.values[i] = physical.value_at(g.at(i));
  }
  set.unscheduled = unscheduled_of(set.scheduled, set.physical, convention);
  return set;
}

BorderFlowSet net_area_inflow(const std::vector<BorderFlowSet>& border_flows,
                              const std::string& area, const std::string& neighbor) {
  std::vector<std::pair<const BorderFlowSet*, double>> members;
  for (const auto& b : border_flows) {
    if (b.from_area == neighbor && b.to_area == area) members.emplace_back(&b, 1.0);
    if (b.from_area == area && b.to_area == neighbor) members.emplace_back(&b, -1.0);
  }
  if (members.empty()) {
    throw std::invalid_argument("no border flows between '" + area + "' and '" + neighbor + "'");
  }
  const SignConvention convention = members.front().first->convention;
  std::vector<const TabularSeries*> ptrs;
  for (const auto& [b, sign] : members) {
    if (b->convention != convention) {
      throw std::invalid_argument("border flow sets use different sign conventions");
    }
    ptrs.push_back(&b->scheduled);
  }
  const Grid g = union_grid(ptrs);

  BorderFlowSet net;
  net.from_area = neighbor;
  net.to_area = area;
  net.convention = convention;
  net.scheduled = on_grid(members.front().first->scheduled, g);
  net.scheduled.zone_id = area;
  net.physical = on_grid(members.front().first->physical, g);
  net.physical.zone_id = area;
  for (std::size_t i = 0; i < g.hours; ++i) {
    double sched = 0.0;
    double phys = 0.0;
    for (const auto& [b, sign] : members) {
      sched += sign * b->scheduled.value_at(g.at(i));
      phys += sign * b->physical.value_at(g.at(i));
    }
    net.scheduled.values[i] = sched;
    net.physical.values[i] = phys;
  }
  net.unscheduled = unscheduled_of(net.scheduled, net.physical, convention);
  return net;
}

MaskResult mask_unavailability(const LinkDataset& dataset, const ingest::OutageCalendar& calendar,
                               std::chrono::seconds max_listing) {
  if (!calendar.link_id.empty() && calendar.link_id != dataset.link_id) {
    throw std::invalid_argument("calendar for link '" + calendar.link_id +
                                "' applied to dataset '" + dataset.link_id + "'");
  }
  MaskResult result;
  std::vector<const ingest::OutageInterval*> short_listings;
  for (const auto& interval : calendar.intervals) {
    if (interval.duration() < max_listing) {
      short_listings.push_back(&interval);
    } else {
      result.review.push_back({dataset.link_id, interval,
                               "listing of " + std::to_string(interval.duration() / kHour) +
                                   " h is not shorter than the exclusion threshold"});
    }
  }

  std::vector<std::size_t> keep;
  std::map<Timestamp, std::string> excluded = dataset.excluded_hours;
  const auto& hours = dataset.features.hours;
  for (std::size_t i = 0; i < hours.size(); ++i) {
    const ingest::OutageInterval* hit = nullptr;
    for (const auto* interval : short_listings) {
      if (hours[i] < interval->end && hours[i] + kHour > interval->start) {
        hit = interval;
        break;
      }
    }
    if (hit == nullptr) {
      keep.push_back(i);
    } else {
      excluded[hours[i]] = "unavailability " + format_timestamp(hit->start) + "/" +
                           format_timestamp(hit->end);
    }
  }
  result.dataset.link_id = dataset.link_id;
  result.dataset.reference_area = dataset.reference_area;
  result.dataset.features = dataset.features.select_rows(keep);
  result.dataset.target.reserve(keep.size());
  for (std::size_t i : keep) result.dataset.target.push_back(dataset.target[i]);
  result.dataset.excluded_hours = std::move(excluded);
  return result;
}

StabilityDataset assemble_stability_dataset(
    const std::string& area, const std::vector<indicators::HourlyIndicators>& indicators,
    const std::vector<FeatureTable>& feature_tables) {
  StabilityDataset out;
  out.area = area;

  FeatureTable indicator_hours;
  for (const auto& rec : indicators) indicator_hours.hours.push_back(rec.hour);
  std::vector<FeatureTable> tables = feature_tables;
  tables.push_back(indicator_hours);
  out.features = inner_join(tables);
  if (out.features.num_rows() == 0) {
    out.warnings.push_back("stability dataset for '" + area +
                           "' is empty: feature and indicator hours do not overlap");
  }

  std::unordered_map<std::int64_t, const indicators::HourlyIndicators*> by_hour;
  for (const auto& rec : indicators) by_hour.emplace(rec.hour.time_since_epoch().count(), &rec);
  for (std::size_t k = 0; k < 4; ++k) out.targets[k].name = kIndicatorNames[k];
  for (std::size_t row = 0; row < out.features.num_rows(); ++row) {
    const auto* rec = by_hour.at(out.features.hours[row].time_since_epoch().count());
    const std::array<double, 4> values = {rec->rocof, rec->nadir, rec->msd, rec->integral};
    for (std::size_t k = 0; k < 4; ++k) {
      const bool usable = rec->valid && std::isfinite(values[k]);
      out.targets[k].values.push_back(usable ? values[k] : kNaN);
      if (usable) out.targets[k].rows.push_back(row);
    }
  }
  return out;
}

LinkDataset assemble_flow_dataset(const FlowDatasetInput& input) {
  require_hourly(input.scheduled);
  require_hourly(input.physical);
  if (input.terminal_features.empty()) {
    throw std::invalid_argument("link '" + input.link_id + "' has no terminal feature table");
  }

  // Prefix terminal columns by area.
  std::vector<FeatureTable> tables;
  for (const auto& [area, table] : input.terminal_features) {
    FeatureTable prefixed;
    prefixed.hours = table.hours;
    for (const auto& c : table.columns()) {
      if (c.role != ColumnRole::kFeature) continue;
      prefixed.add_column({area + "." + c.name, c.unit, area + ":" + c.provenance, c.values});
    }
    tables.push_back(std::move(prefixed));
  }
  const BorderFlowSet flow =
      make_border_flow(input.reference_area, "", input.scheduled, input.physical, input.convention);
  FeatureTable flow_table;
  for (std::size_t i = 0; i < flow.scheduled.size(); ++i) {
    if (!std::isnan(flow.unscheduled.values[i])) {
      flow_table.hours.push_back(flow.scheduled.timestamp(i));
    }
  }
  {
    std::vector<double> sched;
    for (const auto& h : flow_table.hours) sched.push_back(flow.scheduled.value_at(h));
    flow_table.add_column({"scheduled_exchange", "MW",
                           "scheduled commercial exchange, outflow from " + input.reference_area,
                           std::move(sched)});
    std::vector<double> target;
    for (const auto& h : flow_table.hours) target.push_back(flow.unscheduled.value_at(h));
    flow_table.add_column({"unscheduled_outflow", "MW",
                           to_string(input.convention) + ", outflow from " + input.reference_area,
                           std::move(target), ColumnRole::kTarget});
  }
  tables.push_back(std::move(flow_table));
  FeatureTable joined = inner_join(tables);

  for (const auto& [area, records] : input.indicators) {
    std::unordered_map<std::int64_t, const indicators::HourlyIndicators*> by_hour;
    for (const auto& rec : records) by_hour.emplace(rec.hour.time_since_epoch().count(), &rec);
    for (std::size_t k = 0; k < 4; ++k) {
      std::vector<double> values(joined.num_rows(), kNaN);
      for (std::size_t row = 0; row < joined.num_rows(); ++row) {
        const auto it = by_hour.find(joined.hours[row].time_since_epoch().count());
        if (it == by_hour.end() || !it->second->valid) continue;
        const auto* r = it->second;
        const std::array<double, 4> v = {r->rocof, r->nadir, r->msd, r->integral};
        values[row] = v[k];
      }
      joined.add_column({area + "." + kIndicatorNames[k], kIndicatorUnits[k],
                         "frequency indicator of " + area, std::move(values)});
    }
  }

  LinkDataset out;
  out.link_id = input.link_id;
  out.reference_area = input.reference_area;
  out.target = joined.column("unscheduled_outflow").values;
  FeatureTable features;
  features.hours = joined.hours;
  for (const auto& c : joined.columns()) {
    if (c.role == ColumnRole::kFeature) features.add_column(c);
  }
  out.features = std::move(features);
  return out;
}

std::string format_table_csv(const FeatureTable& table) {
  std::string out = "hour";
  for (const auto& c : table.columns()) out += "," + c.name;
  out += '\n';
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    out += format_timestamp(table.hours[r]);
    for (const auto& c : table.columns()) {
      out += ',';
      out += csv::format_double(c.values[r]);
    }
    out += '\n';
  }
  return out;
}

nlohmann::json table_schema(const FeatureTable& table) {
  nlohmann::json columns = nlohmann::json::array();
  columns.push_back({{"name", "hour"}, {"unit", "UTC"}, {"role", "index"}, {"provenance", ""}});
  for (const auto& c : table.columns()) {
    columns.push_back({{"name", c.name},
                       {"unit", c.unit},
                       {"role", role_name(c.role)},
                       {"provenance", c.provenance}});
  }
  return {{"rows", table.num_rows()}, {"columns", columns}};
}

FeatureTable parse_table_csv(const std::filesystem::path& csv_path, const nlohmann::json& schema) {
  const csv::Table raw = csv::read(csv_path);
  const auto& cols = schema.at("columns");
  if (raw.header.size() != cols.size()) {
    throw ParseError("column count of " + csv_path.string() + " disagrees with its schema");
  }
  std::vector<std::string> expected;
  for (const auto& c : cols) expected.push_back(c.at("name").get<std::string>());
  csv::require_header(raw, expected, csv_path);

  FeatureTable table;
  std::vector<std::vector<double>> values(cols.size());
  for (const auto& [line, fields] : raw.rows) {
    if (fields.size() != cols.size()) throw ParseError("ragged row", line);
    table.hours.push_back(parse_timestamp(fields[0]));
    for (std::size_t c = 1; c < fields.size(); ++c) {
      values[c].push_back(csv::parse_double(fields[c]).value_or(kNaN));
    }
  }
  for (std::size_t c = 1; c < cols.size(); ++c) {
    const auto& meta = cols[c];
    table.add_column({meta.at("name").get<std::string>(), meta.at("unit").get<std::string>(),
                      meta.at("provenance").get<std::string>(), std::move(values[c]),
                      meta.at("role").get<std::string>() == "target" ? ColumnRole::kTarget
                                                                     : ColumnRole::kFeature});
  }
  table.validate();
  return table;
}

FeatureTable to_table(const StabilityDataset& dataset) {
  FeatureTable table = dataset.features;
  for (std::size_t k = 0; k < 4; ++k) {
    table.add_column({std::string("target.") + kIndicatorNames[k], kIndicatorUnits[k],
                      "frequency indicator of " + dataset.area, dataset.targets[k].values,
                      ColumnRole::kTarget});
  }
  return table;
}

FeatureTable to_table(const LinkDataset& dataset) {
  FeatureTable table = dataset.features;
  table.add_column({"target.unscheduled_outflow", "MW",
                    "unscheduled flow, outflow from " + dataset.reference_area, dataset.target,
                    ColumnRole::kTarget});
  return table;
}

}  // namespace flowstab::features
