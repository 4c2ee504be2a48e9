#pragma once

// Run directories: what `run` writes, what `report` reads back.

#include "dalvq/config.hpp"
#include "dalvq/diagnostics.hpp"
#include "dalvq/engine.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace dalvq {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitRuntime = 4;

/// A run directory is missing a file or holds one that does not parse.
class ArtifactError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal that reads back to the same double; "nan", "inf", "-inf" otherwise.
std::string format_double(double x);

void write_metrics_csv(const std::vector<MetricsRecord>& rows, std::ostream& out);
void write_quantizers_json(const std::vector<QuantizerVec>& versions, const std::optional<QuantizerVec>& agreement,
                           std::ostream& out);
/// Validation report as JSON: per assumption pass/fail and witness tick.
std::string validation_json(const ValidationReport& v, bool required_hold);

/// Writes effective-config.json, metrics.csv, report.json, final-quantizers.json and, for
/// custom or audited schedules, schedule-trace.jsonl into c.output_dir. Returns an exit code;
/// progress and failures go to `log`.
int cmd_run(const ExperimentConfig& c, bool allow_invalid_schedule, std::ostream& log);

/// One CSV row per run directory: run, mode, data, final_distortion, final_consensus_gap,
/// grad_norm_slope, wall_time. Throws ArtifactError naming the missing or corrupt file.
std::string cmd_report(const std::vector<std::string>& run_dirs);

/// Generates the configured schedule and prints its validation report. Returns kExitOk or
/// kExitValidation.
int cmd_validate_schedule(const ExperimentConfig& c, std::ostream& out);

/// phi^{i,j}(t, tau) of the configured schedule as JSON (adjoint pass).
void cmd_phi_table(const ExperimentConfig& c, std::size_t t, std::ostream& out);

} // namespace dalvq
