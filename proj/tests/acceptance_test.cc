// Acceptance criteria AC1-AC10. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <thread>

#include "flowstab/analysis.h"
#include "flowstab/features.h"
#include "flowstab/gbdt.h"
#include "flowstab/indicators.h"
#include "flowstab/pipeline.h"
#include "flowstab/synthetic.h"
#include "flowstab/treeshap.h"
#include "generators.h"
#include "oracles.h"

namespace {

using namespace flowstab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int jobs() { return static_cast<int>(std::max(1u, std::min(8u, std::thread::hardware_concurrency()))); }

Outcome ac1_local_accuracy() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  const auto data = gen::regression_data(rng, 3000, 8, 0.05);
  gbdt::HyperParams p;
  p.learning_rate = 0.1;
  p.max_leaves = 31;
  p.min_samples_leaf = 10;
  p.number_of_rounds = 300;
  p.early_stopping_patience = 0;
  const auto model = gbdt::fit(data, {}, p).ensemble;
  const auto fit_time = seconds_since(t0);

  const auto t1 = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto row = gen::random_row(rng, 8, 0.1);
    const auto r = treeshap::shap_exact(model, row);
    double sum = r.base_value;
    for (double v : r.phi) sum += v;
    const double pred = gbdt::predict_row(model, row);
    worst = std::max(worst, std::abs(sum - pred) / std::max(1.0, std::abs(pred)));
  }
  const double shap_time = seconds_since(t1);
  const bool ok = worst <= 1e-9 && shap_time < 10.0;
  return {ok, "worst rel err " + fmt("%.3g", worst) + ", 1000 rows in " + fmt("%.2f s", shap_time) +
                  " (" + std::to_string(model.trees.size()) + " trees, fit " + fmt("%.1f s", fit_time) + ")"};
}

Outcome ac2_bruteforce() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int p = 1 + static_cast<int>(rng() % 8);
    const int depth = 1 + static_cast<int>(rng() % 4);
    const int trees = 1 + static_cast<int>(rng() % 20);
    const auto e = gen::random_ensemble(rng, p, depth, trees);
    for (int i = 0; i < 100; ++i) {
      const auto row = gen::random_row(rng, p, 0.1);
      const auto a = treeshap::shap_exact(e, row);
      const auto b = treeshap::shap_bruteforce(e, row);
      for (int j = 0; j < p; ++j) worst = std::max(worst, std::abs(a.phi[j] - b.phi[j]));
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 120.0, "max |exact - brute| " + fmt("%.3g", worst) + " in " + fmt("%.2f s", t)};
}

Outcome ac3_importance_sum() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  int reports = 0;
  for (int k = 0; k < 200; ++k) {
    const int p = 1 + static_cast<int>(rng() % 12);
    const auto e = gen::random_ensemble(rng, p, 1 + static_cast<int>(rng() % 6), 1 + static_cast<int>(rng() % 30));
    gbdt::Matrix rows(50, static_cast<std::size_t>(p));
    for (std::size_t i = 0; i < rows.rows; ++i) {
      const auto r = gen::random_row(rng, p, 0.1);
      for (int j = 0; j < p; ++j) rows.at(i, static_cast<std::size_t>(j)) = r[static_cast<std::size_t>(j)];
    }
    const auto report = analysis::normalized_importance(treeshap::shap_batch(e, rows), "m");
    if (!report) continue;
    double sum = 0.0;
    for (const auto& entry : report->entries) sum += entry.importance;
    worst = std::max(worst, std::abs(sum - 1.0));
    ++reports;
  }
  return {worst <= 1e-12 && reports > 150,
          std::to_string(reports) + " reports, max |sum - 1| " + fmt("%.3g", worst)};
}

struct ControlRun {
  int rank = 0;
  double importance = 0.0;
  std::optional<double> tau;
  analysis::Direction direction = analysis::Direction::kInconclusive;
};

ControlRun control_law(double coupling) {
  synthetic::ControlLawSpec spec;
  spec.coupling = coupling;
  const auto input = synthetic::control_law_input(spec);
  const auto table = features::to_table(features::assemble_flow_dataset(input));
  const auto names = table.feature_names();
  const std::string target = "target.unscheduled_outflow";
  pipeline::TrainingSpec training;
  const auto model = pipeline::train_model("control", table, names, target, {}, training, 2024, jobs());
  const auto e = pipeline::explain_model("control", model.fit.ensemble, table, model.test_hours,
                                         input.reference_area, 8, analysis::kDefaultDeadZone, jobs());
  ControlRun r;
  if (e.importance) {
    const auto& entry = e.importance->at("A.integral");
    r.rank = entry.rank;
    r.importance = entry.importance;
  }
  const auto it = e.flow_tau.find("A.integral");
  if (it != e.flow_tau.end()) {
    r.tau = it->second.tau;
    r.direction = it->second.direction;
  }
  return r;
}

Outcome ac4_control_law() {
  const auto t0 = Clock::now();
  const auto pos = control_law(0.8);
  const auto neg = control_law(-0.8);
  const double t = seconds_since(t0);
  const bool ok = pos.rank == 1 && pos.importance > 0.4 && pos.tau && *pos.tau > 0.9 && neg.tau &&
                  *neg.tau < -0.9 && t < 300.0;
  return {ok, "integral rank " + std::to_string(pos.rank) + ", importance " + fmt("%.3f", pos.importance) +
                  ", tau " + fmt("%.3f", pos.tau.value_or(NAN)) + " (" + analysis::to_string(pos.direction) +
                  "), mirror tau " + fmt("%.3f", neg.tau.value_or(NAN)) + " (" +
                  analysis::to_string(neg.direction) + "), " + fmt("%.1f s", t)};
}

Outcome ac5_benchmark() {
  const auto table = synthetic::benchmark_table({});
  auto names = table.feature_names();
  const auto model =
      pipeline::train_model("bench", table, names, "target.y", {}, pipeline::TrainingSpec{}, 7, jobs());
  if (!model.test_r2 || !model.baseline_r2) return {false, "R2 undefined"};
  const double margin = *model.test_r2 - *model.baseline_r2;
  return {margin >= 0.1, "model R2 " + fmt("%.3f", *model.test_r2) + ", daily profile R2 " +
                             fmt("%.3f", *model.baseline_r2) + ", margin " + fmt("%.3f", margin)};
}

Outcome ac6_indicators() {
  std::mt19937_64 rng(606);
  const indicators::IndicatorParams params;
  const double rates[] = {0.0, 0.01, 0.05, 0.2};
  double worst = 0.0;
  int mismatch = 0, checked = 0;
  auto compare = [&](std::optional<double> got, std::optional<double> want, bool exact) {
    if (got.has_value() != want.has_value()) {
      ++mismatch;
      return;
    }
    if (!got) return;
    ++checked;
    if (exact) {
      if (*got != *want) ++mismatch;
      return;
    }
    const double scale = std::max(std::abs(*got), std::abs(*want));
    const double err = scale == 0.0 ? std::abs(*got - *want) : std::abs(*got - *want) / scale;
    worst = std::max(worst, err);
    if (err > 1e-9) ++mismatch;
  };
  for (int k = 0; k < 1000; ++k) {
    const double gap_rate = rates[static_cast<std::size_t>(k / 4) % 4];
    const auto t = gen::random_hour(rng, k, gap_rate);
    std::vector<double> tt, vv;
    std::optional<double> rocof;
    std::size_t window_gaps = 0;
    for (int i = 0; i < params.rocof_window; ++i) window_gaps += t.gap_mask[static_cast<std::size_t>(i)];
    if (static_cast<double>(window_gaps) <= params.max_gap_fraction * params.rocof_window &&
        oracle::smoothed_points(t.samples, t.gap_mask, params.f_ref, params.rocof_window,
                                params.smoothing_window, tt, vv)) {
      rocof = oracle::normal_equation_slope(tt, vv);
    }
    compare(indicators::compute_rocof(t, params), rocof, false);
    compare(indicators::compute_nadir(t, params), oracle::nadir_scan(t.samples, t.gap_mask, params.f_ref), true);
    compare(indicators::compute_msd(t, params), oracle::msd_kahan(t.samples, t.gap_mask, params.f_ref), false);
    compare(indicators::compute_integral(t, params), oracle::integral_kahan(t.samples, t.gap_mask, params.f_ref), false);
  }
  return {mismatch == 0, std::to_string(checked) + " values, " + std::to_string(mismatch) +
                             " mismatches, worst rel err " + fmt("%.3g", worst)};
}

Outcome ac7_ramp_rates() {
  const double gb = analysis::ramp_rate_per_min(1000, 100);
  const double nordic = analysis::ramp_rate_per_min(600, 600, 60);
  const bool printed = std::round(gb * 10) / 10 == 0.1 && std::round(nordic * 1000) / 1000 == 0.017;
  const double r_ratio = gb / nordic;
  // s ratio over a sweep of equal delta P; one rounding in s = RoCoP / max
  // is allowed (1/60 has no binary representation)
  double worst_ulps = 0.0;
  for (double dp : {1.0, 60.0, 100.0, 123.4, 500.0, 1000.0, 3600.0}) {
    const auto rows = analysis::ramp_speed({{"GB", dp, gb}, {"Nordic", dp, nordic}});
    if (rows[0].s != 1.0) return {false, "GB is not the fastest entry"};
    const double s_ratio = rows[0].s / rows[1].s;
    worst_ulps = std::max(worst_ulps, std::abs(s_ratio - r_ratio) / (r_ratio * std::numeric_limits<double>::epsilon()));
  }
  const bool ok = printed && gb == 0.1 && r_ratio == 6.0 && worst_ulps <= 2.0;
  return {ok, "r(GB) " + fmt("%.4g", gb) + ", r(Nordic) " + fmt("%.4g", nordic) + ", r ratio " +
                  fmt("%.17g", r_ratio) + ", s ratio within " + fmt("%.0f", worst_ulps) + " ulp"};
}

Outcome ac8_monotone_training() {
  std::mt19937_64 rng(808);
  int violations = 0, fits = 0;
  for (double lr : {0.01, 0.1, 0.5, 1.0}) {
    for (int k = 0; k < 3; ++k) {
      const auto data = gen::regression_data(rng, 300 + 200 * k, 2 + k * 2, 0.1 * k);
      gbdt::HyperParams p;
      p.learning_rate = lr;
      p.max_leaves = 4 + 12 * k;
      p.min_samples_leaf = 1 + 5 * k;
      p.number_of_rounds = 200;
      p.early_stopping_patience = 0;
      const auto r = gbdt::fit(data, {}, p);
      ++fits;
      for (std::size_t i = 1; i < r.history.rounds.size(); ++i) {
        if (r.history.rounds[i].train_mse > r.history.rounds[i - 1].train_mse) ++violations;
      }
    }
  }
  return {violations == 0, std::to_string(fits) + " fits, " + std::to_string(violations) + " increases"};
}

Outcome ac9_kendall() {
  std::mt19937_64 rng(909);
  int mismatch = 0, undefined = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 2 + rng() % 199;
    const std::uint64_t levels = 1 + rng() % 40;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng() % levels) * 0.5;
      y[i] = (rng() % 4 == 0) ? x[i] : static_cast<double>(rng() % levels) - 3.0;
    }
    const auto a = analysis::kendall_tau(x, y);
    const auto b = oracle::kendall_pairs(x, y);
    if (a.has_value() != b.has_value() || (a && *a != *b)) ++mismatch;
    if (!a) ++undefined;
  }
  return {mismatch == 0, "1000 pairs, " + std::to_string(mismatch) + " mismatches (" + std::to_string(undefined) +
                             " undefined on both sides)"};
}

Outcome ac10_determinism() {
  const fs::path dir = fs::path(FLOWSTAB_TEST_TMP) / "acceptance" / "determinism";
  fs::remove_all(dir);
  const auto config_path = synthetic::write_fixture(dir);
  auto run = [&](const std::string& out, int j) {
    auto c = pipeline::PipelineConfig::load(config_path);
    c.out_dir = dir / out;
    c.jobs = j;
    pipeline::cmd_indicators(c);
    pipeline::cmd_build_datasets(c);
    pipeline::cmd_train(c);
    pipeline::cmd_explain(c);
    pipeline::cmd_report(c);
    return pipeline::read_manifest(c.out_dir).artifacts;
  };
  const auto a = run("run1", 1);
  const auto b = run("run2", jobs());
  return {!a.empty() && a == b, std::to_string(a.size()) + " artifacts, digests " + (a == b ? "identical" : "differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"AC1", ac1_local_accuracy}, {"AC2", ac2_bruteforce},     {"AC3", ac3_importance_sum},
      {"AC4", ac4_control_law},    {"AC5", ac5_benchmark},      {"AC6", ac6_indicators},
      {"AC7", ac7_ramp_rates},     {"AC8", ac8_monotone_training}, {"AC9", ac9_kendall},
      {"AC10", ac10_determinism}};
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %s  %s\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
