// dalvq: run experiments, validate schedules, dump phi tables, compare run directories.

#include "dalvq/artifacts.hpp"
#include "dalvq/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

dalvq::ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed,
                             const std::optional<std::string>& out) {
  dalvq::ExperimentConfig c = dalvq::parse_config(path);
  if (seed) {
    c.run.seed = *seed;
    c.run.schedule.seed = *seed;
  }
  if (out) c.output_dir = *out;
  return c;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed asynchronous learning vector quantization"};
  app.set_version_flag("--version", DALVQ_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool allow_invalid = false;
  std::size_t phi_t = 0;
  std::vector<std::string> run_dirs;

  auto* run = app.add_subcommand("run", "run the configured experiment and write its artifacts");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--seed", seed, "override the run and schedule seed");
  run->add_option("--out", out_dir, "override output_dir");
  run->add_flag("--allow-invalid-schedule", allow_invalid, "run even if the schedule fails its assumptions");

  auto* validate = app.add_subcommand("validate-schedule", "print the validation report of the configured schedule");
  validate->add_option("--config", config_path, "experiment config (JSON)")->required();
  validate->add_option("--seed", seed, "override the run and schedule seed");

  auto* phi = app.add_subcommand("phi-table", "print phi^{i,j}(t, tau) for the configured schedule");
  phi->add_option("--config", config_path, "experiment config (JSON)")->required();
  phi->add_option("--seed", seed, "override the run and schedule seed");
  phi->add_option("--t", phi_t, "tick t")->required();

  auto* report = app.add_subcommand("report", "compare run directories as CSV");
  report->add_option("dirs", run_dirs, "run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dalvq::kExitConfig;
  }

  try {
    if (*run) return dalvq::cmd_run(load(config_path, seed, out_dir), allow_invalid, std::cerr);
    if (*validate) return dalvq::cmd_validate_schedule(load(config_path, seed, std::nullopt), std::cout);
    if (*phi) {
      dalvq::cmd_phi_table(load(config_path, seed, std::nullopt), phi_t, std::cout);
      return dalvq::kExitOk;
    }
    if (*report) {
      std::cout << dalvq::cmd_report(run_dirs);
      return dalvq::kExitOk;
    }
  } catch (const dalvq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return dalvq::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dalvq::kExitRuntime;
  }
  return dalvq::kExitRuntime;
}
