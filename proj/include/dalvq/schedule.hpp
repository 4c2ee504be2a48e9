#pragma once

// Deterministic communication schedules: combining coefficients a^{i,j}(t), delays
// t - tau^{i,j}(t), descent activity sets, and checks of the consensus assumptions.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dalvq {

enum class Topology { Complete, Ring, RandomSymmetricGossip, CustomTrace };
enum class DelayLaw { Zero, Fixed, Uniform };
enum class ActivityLaw { AllActive, RoundRobin, RandomSubset, None };

std::string to_string(Topology t);
std::string to_string(DelayLaw d);
std::string to_string(ActivityLaw a);
Topology topology_from_string(const std::string& s);
DelayLaw delay_law_from_string(const std::string& s);
ActivityLaw activity_law_from_string(const std::string& s);

/// Constants a schedule is checked against: threshold alpha, delay bound B1, communication
/// interval B2 and symmetry window B3.
struct AssumptionConstants {
  double alpha = 1.0;
  std::size_t b1 = 1;
  std::size_t b2 = 1;
  std::size_t b3 = 1;

  friend bool operator==(const AssumptionConstants&, const AssumptionConstants&) = default;
};

/// User overrides; unset fields are derived from the generated schedule.
struct DeclaredConstants {
  std::optional<double> alpha;
  std::optional<std::size_t> b2;
  std::optional<std::size_t> b3;

  friend bool operator==(const DeclaredConstants&, const DeclaredConstants&) = default;
};

struct ScheduleSpec {
  Topology topology = Topology::Ring;
  std::size_t period = 1;  // merge on ticks with t % period == 0
  DelayLaw delay_law = DelayLaw::Zero;
  std::size_t fixed_delay = 0;  // k, used by DelayLaw::Fixed
  std::size_t b1 = 1;           // delays are drawn below this bound
  ActivityLaw activity = ActivityLaw::RoundRobin;
  double activity_probability = 0.5;  // RandomSubset only
  std::uint64_t seed = 0;
  /// Active processors keep an identity row: no merge while a descent term is added.
  bool separate_merge_descent = true;
  std::string trace_path;  // CustomTrace only
  DeclaredConstants declared;

  friend bool operator==(const ScheduleSpec&, const ScheduleSpec&) = default;
};

/// Immutable once built. Dense per-tick M x M coefficient and delay matrices.
class CommSchedule {
public:
  CommSchedule() = default;
  CommSchedule(std::size_t processors, std::size_t horizon);

  std::size_t processors() const noexcept { return m_; }
  std::size_t horizon() const noexcept { return t_; }

  double coeff(std::size_t t, std::size_t i, std::size_t j) const { return coeff_[index(t, i, j)]; }
  /// t - tau^{i,j}(t)
  std::uint32_t delay(std::size_t t, std::size_t i, std::size_t j) const { return delay_[index(t, i, j)]; }
  bool active(std::size_t t, std::size_t i) const { return active_[t * m_ + i] != 0; }

  std::span<const double> coeff_row(std::size_t t, std::size_t i) const {
    return {coeff_.data() + index(t, i, 0), m_};
  }
  std::span<const std::uint32_t> delay_row(std::size_t t, std::size_t i) const {
    return {delay_.data() + index(t, i, 0), m_};
  }
  std::vector<std::size_t> active_set(std::size_t t) const;
  /// Row i at tick t is e_i with zero delays.
  bool identity_row(std::size_t t, std::size_t i) const;

  std::size_t max_delay() const;

  void set_coeff(std::size_t t, std::size_t i, std::size_t j, double a) { coeff_[index(t, i, j)] = a; }
  void set_delay(std::size_t t, std::size_t i, std::size_t j, std::uint32_t d) { delay_[index(t, i, j)] = d; }
  void set_active(std::size_t t, std::size_t i, bool on) { active_[t * m_ + i] = on ? 1 : 0; }

  /// First `horizon` ticks.
  CommSchedule prefix(std::size_t horizon) const;

  AssumptionConstants constants;
  bool separate_merge_descent = true;

  friend bool operator==(const CommSchedule&, const CommSchedule&) = default;

private:
  std::size_t index(std::size_t t, std::size_t i, std::size_t j) const { return (t * m_ + i) * m_ + j; }

  std::size_t m_ = 0;
  std::size_t t_ = 0;
  std::vector<double> coeff_;
  std::vector<std::uint32_t> delay_;
  std::vector<std::uint8_t> active_;
};

/// Builds the schedule for ticks 0..T-1. Deterministic in (spec, M) and prefix-stable:
/// generate(spec, M, T) equals generate(spec, M, T').prefix(T) for T' > T.
/// Throws ConfigError for infeasible specs (ring or gossip with M = 1, no merge tick
/// within the horizon, a fixed delay not below B1, all-active with separated merges
/// and M > 1, a missing trace).
CommSchedule generate(const ScheduleSpec& spec, std::size_t processors, std::size_t horizon);

/// The feasibility checks of generate() without building anything. Throws ConfigError.
void check_schedule_spec(const ScheduleSpec& spec, std::size_t processors, std::size_t horizon);

/// Constants measured on a schedule: alpha = min nonzero coefficient, B1 = max delay + 1,
/// B2 = smallest window satisfying bounded intervals and windowed connectivity,
/// B3 = smallest symmetry window (horizon + 1 when some edge is never reciprocated).
AssumptionConstants measure_constants(const CommSchedule& s);

struct Edge {
  std::size_t from = 0;  // j
  std::size_t to = 0;    // i
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// (j, i) is an edge iff a^{i,j}(t) > 0. Includes self-loops. Throws UsageError if t >= T.
std::vector<Edge> communication_graph(const CommSchedule& s, std::size_t t);

struct AssumptionCheck {
  std::string name;
  bool holds = true;
  std::optional<std::size_t> witness_tick;
  std::string detail;
};

struct ValidationReport {
  AssumptionConstants constants;
  AssumptionCheck bounded_delays{"A3 bounded communication delays", true, std::nullopt, ""};
  AssumptionCheck convex_threshold{"A4 convex combination and threshold", true, std::nullopt, ""};
  AssumptionCheck connectivity{"A5 graph connectivity", true, std::nullopt, ""};
  AssumptionCheck bounded_intervals{"A6 bounded communication intervals", true, std::nullopt, ""};
  AssumptionCheck symmetry{"A7 symmetry", true, std::nullopt, ""};
  AssumptionCheck some_active{"A9 some processor active at every tick", true, std::nullopt, ""};
  AssumptionCheck separation{"merge/descent separation", true, std::nullopt, ""};
  std::vector<Edge> never_communicating;  // ordered pairs i != j with no edge in the horizon
  std::vector<Edge> communicating_once;

  bool asy1() const { return bounded_delays.holds && convex_threshold.holds && connectivity.holds && bounded_intervals.holds; }
  bool asy2() const { return bounded_delays.holds && convex_threshold.holds && connectivity.holds && symmetry.holds; }
  bool consensus_assumptions() const { return asy1() || asy2(); }
  /// Everything a DALVQ run relies on: (AsY)1 or (AsY)2, A9, and separation when requested.
  bool all_hold() const { return consensus_assumptions() && some_active.holds && separation.holds; }
  std::vector<const AssumptionCheck*> checks() const;
};

/// Report-style validation against s.constants; never throws.
ValidationReport validate(const CommSchedule& s);

/// One JSON object per tick: {"t", "coeff", "delay", "active"}. Doubles use the shortest
/// round-trip representation, so write/read is bit-exact.
void write_trace_jsonl(const CommSchedule& s, std::ostream& out);
/// Constants are measured from the trace. Throws ConfigError on malformed input.
CommSchedule read_trace_jsonl(std::istream& in);
CommSchedule read_trace_jsonl_file(const std::string& path);

} // namespace dalvq
