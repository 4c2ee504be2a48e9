#pragma once

// The DALVQ iterations w^i(t+1) = sum_j a^{i,j}(t) w^j(tau^{i,j}(t)) + s^i(t) with CLVQ
// descent terms, and a full run with per-record diagnostics.

#include "dalvq/agreement.hpp"
#include "dalvq/diagnostics.hpp"
#include "dalvq/measures.hpp"
#include "dalvq/schedule.hpp"
#include "dalvq/steps.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dalvq {

enum class SampleMode { ReplayFromBatch, FreshStream };
enum class InitMode { Shared, PerProcessor };

std::string to_string(SampleMode m);
std::string to_string(InitMode m);
SampleMode sample_mode_from_string(const std::string& s);
InitMode init_mode_from_string(const std::string& s);

struct RunConfig {
  std::size_t processors = 4;
  std::size_t kappa = 10;
  std::size_t dim = 2;
  std::size_t horizon = 1000;
  DistributionSpec distribution;
  ScheduleSpec schedule;
  StepPolicy steps;
  std::uint64_t seed = 1;
  std::size_t n_ref = 5000;
  std::size_t cadence = 10;
  SampleMode sampling = SampleMode::ReplayFromBatch;
  InitMode init = InitMode::Shared;
  bool diagnostics = true;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Throws ConfigError on anything a run would trip over before tick 0.
void check_run_config(const RunConfig& c);

/// Per-processor bookkeeping besides its versions (kept in the shared history).
struct ProcessorState {
  std::size_t local_count = 0;  // active ticks in [0, t]
  StreamHandle stream;
};

struct Descent {
  QuantizerVec s;  // s^i(t)
  std::vector<double> z;
  double eps = 0.0;
  bool active = false;
};

/// s^i(t) = -eps^i_{t+1} H(z^i_{t+1}, w) when i is active at t, zero otherwise. Only an
/// active processor advances its stream and local count.
Descent descent_term(ProcessorState& p, std::size_t i, std::size_t t, const CommSchedule& s, const QuantizerVec& w,
                     const SampleSource& source, const StepPolicy& steps);

/// Steps the processors through a schedule. The schedule must outlive the engine.
class DalvqEngine {
public:
  DalvqEngine(const CommSchedule& schedule, std::vector<QuantizerVec> initial, SampleSource source, StepPolicy steps,
              std::uint64_t seed);

  std::size_t now() const noexcept { return history_.now(); }
  const VersionHistory& history() const noexcept { return history_; }
  std::vector<QuantizerVec> versions() const { return history_.current_all(); }
  const std::vector<ProcessorState>& processors() const noexcept { return procs_; }
  /// Descent terms, samples and steps of the last tick.
  const std::vector<Descent>& last_tick() const noexcept { return last_; }

  /// With descent disabled, every tick is a pure agreement iteration.
  void set_descent_enabled(bool on) noexcept { descent_ = on; }

  /// w(t) -> w(t + 1).
  void tick();

private:
  const CommSchedule* schedule_;
  VersionHistory history_;
  std::vector<ProcessorState> procs_;
  SampleSource source_;
  StepPolicy steps_;
  std::vector<Descent> last_;
  bool descent_ = true;
};

/// Step eps^j_{t+1} each processor would take at t in [0, ticks), by local count.
std::vector<std::vector<double>> step_table(const CommSchedule& s, const StepPolicy& steps, std::size_t ticks);

/// K1, K2 measured on the steps actually emitted over [0, ticks); K2 is at least 1.
StepBounds derive_step_bounds(const CommSchedule& s, const std::vector<std::vector<double>>& table, std::size_t ticks,
                              const StepPolicy& steps);

struct PhiEstimates {
  bool available = false;  // limits resolved through the final tick and converged
  double a_hat = 0.0;
  double rho_hat = 0.0;
  double eta_hat = 0.0;
  bool converged = false;
  std::size_t tail = 0;  // extra schedule ticks used to resolve the limits
  std::size_t residual_count = 0;
  double fit_rms = 0.0;
};

struct RunArtifacts {
  RunConfig config;
  CommSchedule schedule;
  ValidationReport validation;
  SampleBatch reference;
  std::vector<QuantizerVec> initial;
  std::vector<QuantizerVec> final_versions;
  std::optional<QuantizerVec> final_star;
  StepBounds step_bounds;
  PhiEstimates phi;
  std::vector<MetricsRecord> metrics;
  SummaryInputs summary_inputs;
  double wall_seconds = 0.0;
};

/// Longest tail tried when resolving the limits phi^j(tau) past the horizon.
inline constexpr std::size_t kMaxPhiTail = 65536;

/// Deterministic in the config. Assumption failures do not stop the run; the caller
/// decides from `validation`.
RunArtifacts run(const RunConfig& config);
/// Same, reusing `schedule` = generate(config.schedule, M, T) built by the caller.
RunArtifacts run(const RunConfig& config, CommSchedule schedule);

/// Same, on a caller-supplied schedule (prefix of `extended`, which may be longer).
RunArtifacts run_on_schedule(const RunConfig& config, const CommSchedule& schedule,
                             const std::optional<CommSchedule>& extended);

/// Initial versions for a config: one shared draw, or one draw per processor.
std::vector<QuantizerVec> initial_versions(const RunConfig& config);

} // namespace dalvq
