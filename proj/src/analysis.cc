#include "flowstab/analysis.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

#include "flowstab/csv.h"

namespace flowstab::analysis {
namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

// Ties counted as t*(t-1)/2 over runs of equal values in a sorted sequence.
template <typename Equal>
std::int64_t tied_pairs(std::size_t n, Equal equal) {
  std::int64_t total = 0;
  std::int64_t run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (equal(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total + run * (run - 1) / 2;
}

// Sorts `idx` by y, returning the number of inversions (swaps).
std::int64_t merge_count(std::vector<std::size_t>& idx, std::vector<std::size_t>& tmp,
                         std::span<const double> y, std::size_t b, std::size_t e) {
  if (e - b < 2) return 0;
  const std::size_t m = b + (e - b) / 2;
  std::int64_t swaps = merge_count(idx, tmp, y, b, m) + merge_count(idx, tmp, y, m, e);
  std::size_t i = b;
  std::size_t j = m;
  std::size_t k = b;
  while (i < m && j < e) {
    if (y[idx[j]] < y[idx[i]]) {
      swaps += static_cast<std::int64_t>(m - i);
      tmp[k++] = idx[j++];
    } else {
      tmp[k++] = idx[i++];
    }
  }
  while (i < m) tmp[k++] = idx[i++];
  while (j < e) tmp[k++] = idx[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(b), tmp.begin() + static_cast<std::ptrdiff_t>(e),
            idx.begin() + static_cast<std::ptrdiff_t>(b));
  return swaps;
}

}  // namespace

std::vector<FeatureImportance> ImportanceReport::top(std::size_t k) const {
  std::vector<FeatureImportance> sorted = entries;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.rank < b.rank; });
  if (sorted.size() > k) sorted.resize(k);
  return sorted;
}

const FeatureImportance& ImportanceReport::at(const std::string& feature) const {
  for (const auto& e : entries) {
    if (e.feature == feature) return e;
  }
  throw std::out_of_range("no importance entry for '" + feature + "'");
}

std::optional<ImportanceReport> normalized_importance(const treeshap::ShapMatrix& shap,
                                                      const std::string& model_id) {
  const std::size_t n = shap.rows();
  const std::size_t p = shap.phi.cols;
  if (n == 0 || p == 0) throw std::invalid_argument("importance of an empty SHAP matrix");
  std::vector<double> mean_abs(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::abs(shap.phi.at(i, j));
    mean_abs[j] = sum / static_cast<double>(n);
  }
  double total = 0.0;
  for (double v : mean_abs) total += v;
  if (!(total > 0.0)) return std::nullopt;

  ImportanceReport report;
  report.model_id = model_id;
  for (std::size_t j = 0; j < p; ++j) {
    const std::string name = j < shap.feature_names.size() ? shap.feature_names[j]
                                                           : "f" + std::to_string(j);
    report.entries.push_back({name, mean_abs[j] / total, 0});
  }
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.entries[a].importance > report.entries[b].importance;
  });
  for (std::size_t r = 0; r < p; ++r) report.entries[order[r]].rank = static_cast<int>(r + 1);
  return report;
}

std::optional<double> kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("kendall_tau needs equal lengths");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("kendall_tau needs at least two pairs");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) throw std::invalid_argument("kendall_tau on NaN");
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  const std::int64_t n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t ties_x = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return x[idx[a]] == x[idx[b]];
  });
  const std::int64_t ties_xy = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return x[idx[a]] == x[idx[b]] && y[idx[a]] == y[idx[b]];
  });
  std::vector<std::size_t> tmp(n);
  const std::int64_t swaps = merge_count(idx, tmp, y, 0, n);
  const std::int64_t ties_y = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return y[idx[a]] == y[idx[b]];
  });

  const std::int64_t untied_x = n0 - ties_x;
  const std::int64_t untied_y = n0 - ties_y;
  if (untied_x == 0 || untied_y == 0) return std::nullopt;
  const std::int64_t score = n0 - ties_x - ties_y + ties_xy - 2 * swaps;
  return static_cast<double>(score) /
         std::sqrt(static_cast<double>(untied_x) * static_cast<double>(untied_y));
}

std::string to_string(Direction direction) {
  switch (direction) {
    case Direction::kControlLike:
      return "control-like";
    case Direction::kDisturbanceLike:
      return "disturbance-like";
    case Direction::kInconclusive:
      break;
  }
  return "inconclusive";
}

FlowCorrelation shap_flow_correlation(std::span<const double> phi_integral,
                                      std::span<const double> integral,
                                      FlowOrientation orientation, double dead_zone) {
  if (phi_integral.size() != integral.size()) {
    throw std::invalid_argument("SHAP column and integral differ in length");
  }
  std::vector<double> x;
  std::vector<double> phi;
  for (std::size_t i = 0; i < phi_integral.size(); ++i) {
    if (std::isnan(phi_integral[i]) || std::isnan(integral[i])) continue;
    x.push_back(integral[i]);
    phi.push_back(orientation == FlowOrientation::kOutflowPositive ? phi_integral[i] : -phi_integral[i]);
  }
  FlowCorrelation out;
  if (x.size() < 2) return out;
  out.tau = kendall_tau(x, phi);
  if (out.tau && *out.tau > dead_zone) out.direction = Direction::kControlLike;
  if (out.tau && *out.tau < -dead_zone) out.direction = Direction::kDisturbanceLike;
  return out;
}

double ramp_rate_per_min(double capacity_mw, double allowed_mw, double window_minutes) {
  if (!(capacity_mw > 0.0) || !(window_minutes > 0.0) || allowed_mw < 0.0) {
    throw std::invalid_argument("ramp rate needs positive capacity and window");
  }
  return allowed_mw / (capacity_mw * window_minutes);
}

double mean_abs_hourly_change(const ingest::TabularSeries& series) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 1; i < series.size(); ++i) {
    const double d = series.values[i] - series.values[i - 1];
    if (std::isnan(d)) continue;
    sum += std::abs(d);
    ++count;
  }
  if (count == 0) throw std::invalid_argument("series '" + series.name + "' has no hourly changes");
  return sum / static_cast<double>(count);
}

std::vector<RampSpeedRow> ramp_speed(const std::vector<RampEntry>& entries) {
  if (entries.empty()) throw std::invalid_argument("ramp speed table is empty");
  std::vector<RampSpeedRow> rows;
  double max_rocop = 0.0;
  for (const auto& e : entries) {
    if (!(e.delta_p_mw >= 0.0)) throw std::invalid_argument("negative delta P for " + e.name);
    if (!(e.ramp_rate_per_min > 0.0)) throw std::invalid_argument("non-positive r for " + e.name);
    RampSpeedRow row{e.name, e.delta_p_mw, e.ramp_rate_per_min, e.delta_p_mw * e.ramp_rate_per_min, 0.0};
    max_rocop = std::max(max_rocop, row.rocop_mw_per_min);
    rows.push_back(row);
  }
  if (!(max_rocop > 0.0)) throw std::invalid_argument("every RoCoP is zero");
  for (auto& row : rows) row.s = row.rocop_mw_per_min / max_rocop;
  return rows;
}

DependencyTable dependency_table(const std::string& feature, std::span<const double> feature_values,
                                 std::span<const double> shap_values,
                                 const std::string& color_feature,
                                 std::span<const double> color_values) {
  const std::size_t n = feature_values.size();
  if (shap_values.size() != n || (!color_values.empty() && color_values.size() != n)) {
    throw std::invalid_argument("dependency table columns differ in length");
  }
  const bool has_color = !color_values.empty();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // NaN sorts last; (a < b) is false for NaN, so compare via a key.
  auto key_less = [](double a, double b) {
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
    return a < b;
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (key_less(feature_values[a], feature_values[b])) return true;
    if (key_less(feature_values[b], feature_values[a])) return false;
    if (shap_values[a] != shap_values[b]) return shap_values[a] < shap_values[b];
    if (has_color) return key_less(color_values[a], color_values[b]);
    return false;
  });

  DependencyTable t;
  t.feature = feature;
  t.color_feature = has_color ? color_feature : std::string();
  std::vector<double> fx;
  std::vector<double> fy;
  for (std::size_t i : order) {
    t.feature_values.push_back(feature_values[i]);
    t.shap_values.push_back(shap_values[i]);
    if (has_color) t.color_values.push_back(color_values[i]);
    if (!std::isnan(feature_values[i]) && !std::isnan(shap_values[i])) {
      fx.push_back(feature_values[i]);
      fy.push_back(shap_values[i]);
    }
  }
  if (fx.size() >= 2) t.tau = kendall_tau(fx, fy);
  return t;
}

BenchmarkReport benchmark_comparison(double model_r2, double baseline_r2, const std::string& label) {
  BenchmarkReport r;
  r.label = label;
  r.model_r2 = model_r2;
  r.baseline_r2 = baseline_r2;
  r.difference = model_r2 - baseline_r2;
  if (baseline_r2 > 0.0) r.factor = model_r2 / baseline_r2;
  return r;
}

std::string format_importance_csv(const ImportanceReport& report) {
  std::string out = "model_id,feature,importance,rank\n";
  for (const auto& e : report.top(report.entries.size())) {
    out += report.model_id + "," + e.feature + "," + csv::format_double(e.importance) + "," +
           std::to_string(e.rank) + "\n";
  }
  return out;
}

std::string format_dependency_csv(const DependencyTable& table) {
  std::string out = "feature_value,shap_value,color_value\n";
  for (std::size_t i = 0; i < table.feature_values.size(); ++i) {
    out += csv::format_double(table.feature_values[i]) + "," +
           csv::format_double(table.shap_values[i]) + "," +
           (table.color_values.empty() ? std::string() : csv::format_double(table.color_values[i])) +
           "\n";
  }
  return out;
}

nlohmann::json dependency_header(const DependencyTable& table) {
  return {{"feature", table.feature},
          {"color_feature", table.color_feature},
          {"rows", table.feature_values.size()},
          {"kendall_tau", optional_json(table.tau)},
          {"columns", {"feature_value", "shap_value", "color_value"}}};
}

std::string format_ramp_speed_csv(const std::vector<RampSpeedRow>& rows) {
  std::string out = "name,delta_p_mw,ramp_rate_per_min,rocop_mw_per_min,s\n";
  for (const auto& r : rows) {
    out += r.name + "," + csv::format_double(r.delta_p_mw) + "," +
           csv::format_double(r.ramp_rate_per_min) + "," + csv::format_double(r.rocop_mw_per_min) +
           "," + csv::format_double(r.s) + "\n";
  }
  return out;
}

nlohmann::json to_json(const BenchmarkReport& report) {
  return {{"label", report.label},
          {"model_r2", report.model_r2},
          {"baseline_r2", report.baseline_r2},
          {"factor", optional_json(report.factor)},
          {"difference", report.difference}};
}

}  // namespace flowstab::analysis
