#include "dalvq/artifacts.hpp"
#include "dalvq/config.hpp"
#include "dalvq/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dalvq;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(DALVQ_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

ExperimentConfig small(const fs::path& out, RunMode mode = RunMode::Dalvq) {
  ExperimentConfig c;
  c.mode = mode;
  c.output_dir = out.string();
  c.run.processors = 3;
  c.run.kappa = 3;
  c.run.distribution.lower = {0.0, 0.0};
  c.run.distribution.upper = {1.0, 1.0};
  c.run.horizon = 400;
  c.run.n_ref = 300;
  c.run.cadence = 20;
  c.run.steps.c = 5.0;
  c.run.schedule.b1 = 2;
  c.run.schedule.delay_law = DelayLaw::Uniform;
  c.run.schedule.seed = 1;
  return c;
}

} // namespace

TEST_CASE("a minimal config takes the defaults") {
  const auto c = parse_config_text("{}");
  CHECK(c.mode == RunMode::Dalvq);
  CHECK(c.run.processors == 4);
  CHECK(c.run.distribution.dim == 2);
  CHECK(c.run.distribution.upper == std::vector<double>{1.0, 1.0});
  CHECK(c.run.schedule.seed == c.run.seed);
}

TEST_CASE("strict parsing names the offending key") {
  CHECK(error_of(R"({"foo": 1})").find("foo") != std::string::npos);
  CHECK(error_of(R"({"schedule": {"topolgy": "ring"}})").find("schedule.topolgy") != std::string::npos);
  CHECK(error_of(R"({"kappa": "ten"})").find("kappa") != std::string::npos);
  CHECK(error_of(R"({"schedule": {"topology": "star"}})").find("schedule.topology") != std::string::npos);
  CHECK(error_of(R"({"steps": {"k1": 0.5, "k2": 0.2}})").find("A8") != std::string::npos);
  CHECK(error_of("{not json").size() > 0);
}

TEST_CASE("emitted configs parse back to the same value") {
  ExperimentConfig c = small("x");
  c.mode = RunMode::AgreementOnly;
  c.run.distribution.kind = DistributionKind::UniformDiskUnion;
  c.run.distribution.disks = {{{0.0, 0.0}, 1.0}, {{2.5, 0.0}, 1.0}};
  c.run.distribution.lower.clear();
  c.run.distribution.upper.clear();
  c.run.steps.k1 = 0.1;
  c.run.steps.k2 = 5.0;
  c.run.schedule.declared.b2 = 7;
  c.audit_schedule = true;
  CHECK(parse_config_text(emit_config(c)) == c);

  const auto defaults = parse_config_text("{}");
  CHECK(parse_config_text(emit_config(defaults)) == defaults);
}

TEST_CASE("run writes every artifact, deterministically") {
  const fs::path a = scratch("run_a");
  const fs::path b = scratch("run_b");
  std::ostringstream log;
  ExperimentConfig c = small(a);
  c.audit_schedule = true;
  REQUIRE(cmd_run(c, false, log) == kExitOk);
  for (const char* name : {"effective-config.json", "metrics.csv", "report.json", "final-quantizers.json",
                           "schedule-trace.jsonl"}) {
    CHECK(fs::exists(a / name));
  }
  c.output_dir = b.string();
  REQUIRE(cmd_run(c, false, log) == kExitOk);
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(slurp(a / "final-quantizers.json") == slurp(b / "final-quantizers.json"));
  CHECK(slurp(a / "metrics.csv").rfind(kMetricsHeader, 0) == 0);
  CHECK(parse_config(a / "effective-config.json").run == c.run);
}

TEST_CASE("validate-only on a failing schedule") {
  const fs::path d = scratch("invalid");
  ExperimentConfig c = small(d, RunMode::ValidateOnly);
  c.run.schedule.activity = ActivityLaw::None;
  std::ostringstream log;
  CHECK(cmd_run(c, false, log) == kExitValidation);
  CHECK(log.str().find("A9") != std::string::npos);
  const std::string rep = slurp(d / "report.json");
  CHECK(rep.find("\"assumptions_violated\": true") != std::string::npos);
  CHECK_FALSE(fs::exists(d / "metrics.csv"));

  std::ostringstream out;
  CHECK(cmd_validate_schedule(c, out) == kExitValidation);
  c.mode = RunMode::AgreementOnly;
  CHECK(cmd_validate_schedule(c, out) == kExitOk);
}

TEST_CASE("report aggregates run directories") {
  const fs::path root = scratch("report");
  std::ostringstream log;
  std::vector<std::string> dirs;
  for (RunMode mode : {RunMode::Dalvq, RunMode::ClvqBaseline, RunMode::LloydBaseline}) {
    const fs::path d = root / to_string(mode);
    REQUIRE(cmd_run(small(d, mode), false, log) == kExitOk);
    dirs.push_back(d.string());
  }
  const std::string one = cmd_report({dirs.front()});
  CHECK(std::count(one.begin(), one.end(), '\n') == 2);

  std::istringstream rows(cmd_report(dirs));
  std::string line;
  std::getline(rows, line);
  CHECK(line == "run,mode,data,final_distortion,final_consensus_gap,grad_norm_slope,wall_time");
  std::vector<std::string> data;
  while (std::getline(rows, line)) {
    std::vector<std::string> cells;
    std::istringstream cs(line);
    for (std::string cell; std::getline(cs, cell, ',');) cells.push_back(cell);
    REQUIRE(cells.size() == 7);
    data.push_back(cells[2]);
  }
  REQUIRE(data.size() == 3);
  CHECK(data[0] == data[1]);
  CHECK(data[1] == data[2]);

  const fs::path empty = scratch("empty_run");
  try {
    cmd_report({empty.string()});
    FAIL("expected ArtifactError");
  } catch (const ArtifactError& e) {
    CHECK(std::string(e.what()).find("effective-config.json") != std::string::npos);
  }
}
