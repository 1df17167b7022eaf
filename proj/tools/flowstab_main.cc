// flowstab command line: indicators | build-datasets | train | explain | report

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "flowstab/pipeline.h"
#include "flowstab/synthetic.h"

namespace {

namespace fs = std::filesystem;
using flowstab::pipeline::PipelineConfig;

struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string sign_convention;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--seed", args.seed, "global seed");
  cmd->add_option("--jobs", args.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--sign-convention", args.sign_convention,
                  "scheduled_minus_physical or physical_minus_scheduled");
}

PipelineConfig load(const CommonArgs& args) {
  PipelineConfig c = PipelineConfig::load(args.config);
  if (!args.out.empty()) c.out_dir = args.out;
  if (args.seed) c.seed = *args.seed;
  if (args.jobs) c.jobs = *args.jobs;
  if (!args.sign_convention.empty()) {
    c.convention = flowstab::features::parse_sign_convention(args.sign_convention);
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency stability and HVDC flow analysis pipeline"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string model;
  auto* indicators = app.add_subcommand("indicators", "hourly frequency indicators per area");
  add_common(indicators, args);
  auto* build = app.add_subcommand("build-datasets", "stability and flow datasets");
  add_common(build, args);
  auto* train = app.add_subcommand("train", "grid search, fit and test each model");
  add_common(train, args);
  train->add_option("--model", model, "train only this model id");
  auto* explain = app.add_subcommand("explain", "SHAP values, importances, dependency tables");
  add_common(explain, args);
  explain->add_option("--model", model, "explain only this model id");
  auto* report = app.add_subcommand("report", "consolidated JSON/CSV bundle");
  add_common(report, args);

  std::string fixture_dir;
  flowstab::synthetic::FixtureSpec fixture;
  int fixture_hours = fixture.hours;
  std::uint64_t fixture_seed = fixture.seed;
  auto* synth = app.add_subcommand("synth", "write a small synthetic input fixture");
  synth->add_option("dir", fixture_dir, "target directory")->required();
  synth->add_option("--hours", fixture_hours, "hours of data")->check(CLI::Range(2, 100000));
  synth->add_option("--seed", fixture_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      fixture.hours = fixture_hours;
      fixture.seed = fixture_seed;
      std::cout << flowstab::synthetic::write_fixture(fixture_dir, fixture).string() << "\n";
      return 0;
    }
    const PipelineConfig config = load(args);
    if (indicators->parsed()) flowstab::pipeline::cmd_indicators(config);
    if (build->parsed()) flowstab::pipeline::cmd_build_datasets(config);
    if (train->parsed()) flowstab::pipeline::cmd_train(config, model);
    if (explain->parsed()) flowstab::pipeline::cmd_explain(config, model);
    if (report->parsed()) flowstab::pipeline::cmd_report(config);
  } catch (const std::exception& e) {
    std::cerr << "flowstab: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
