#pragma once

// Experiment configuration files: strict JSON parsing and the effective-config snapshot.

#include "dalvq/engine.hpp"

#include <cstddef>
#include <string>

namespace dalvq {

enum class RunMode { Dalvq, ClvqBaseline, LloydBaseline, AgreementOnly, ValidateOnly };

std::string to_string(RunMode m);
RunMode run_mode_from_string(const std::string& s);

struct ExperimentConfig {
  RunConfig run;
  RunMode mode = RunMode::Dalvq;
  std::string output_dir = "out";
  bool audit_schedule = false;  // also write schedule-trace.jsonl for generated schedules
  std::size_t lloyd_max_iterations = 1000;
  double lloyd_tolerance = 1e-10;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Strict: unknown keys and type mismatches throw ConfigError naming the key path.
/// Missing keys take their defaults. Runs check_run_config on the result, so semantic
/// violations (K2 < K1, infeasible schedules) surface here.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);

/// Every field, defaults included. parse_config_text(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& c);

/// The RunConfig a mode actually executes (clvq-baseline forces M = 1 on a complete
/// all-active schedule; agreement-only turns descent off).
RunConfig effective_run_config(const ExperimentConfig& c);

} // namespace dalvq
