#pragma once

// Descent-free agreement iterations, impulse-response coefficients phi^{i,j}(t, tau)
// and the agreement vector w*(t).

#include "dalvq/geometry.hpp"
#include "dalvq/schedule.hpp"

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace dalvq {

/// Versions x^i(s) of every processor for the last `depth` ticks.
class VersionHistory {
public:
  VersionHistory() = default;
  VersionHistory(std::vector<QuantizerVec> initial, std::size_t depth);

  std::size_t processors() const noexcept { return m_; }
  std::size_t depth() const noexcept { return depth_; }
  /// Tick of the newest versions.
  std::size_t now() const noexcept { return now_; }

  const QuantizerVec& current(std::size_t i) const { return at(i, 0); }
  /// x^i(now - delay). Throws InternalError if delay >= depth or delay > now.
  const QuantizerVec& at(std::size_t i, std::size_t delay) const;
  std::vector<QuantizerVec> current_all() const;

  /// Appends x(now + 1), evicting the oldest slot.
  void push(std::vector<QuantizerVec> next);

private:
  std::size_t m_ = 0;
  std::size_t depth_ = 0;
  std::size_t now_ = 0;
  std::size_t head_ = 0;                         // slot of x(now)
  std::vector<std::vector<QuantizerVec>> ring_;  // [slot][processor]
};

/// sum_j a^{i,j}(t) x^j(t - delay^{i,j}(t)), skipping zero coefficients, in increasing j.
/// Shared by the agreement iterations and the DALVQ engine so the two agree bit for bit.
QuantizerVec combine(const CommSchedule& s, std::size_t t, std::size_t i, const VersionHistory& h);

/// One agreement iteration x(t) -> x(t + 1). Requires h.now() == t.
void agreement_step(VersionHistory& h, const CommSchedule& s, std::size_t t);

/// max over i, j of |x^i - x^j|.
double max_spread(const std::vector<QuantizerVec>& versions);

/// phi^{i,j}(t, tau) for tau in [tau_begin, t - 1]; tau = -1 is the weight of x^j(0).
struct PhiTable {
  std::size_t t = 0;
  long tau_begin = -1;
  std::size_t processors = 0;
  std::vector<double> values;  // [(i * M + j) * width + (tau - tau_begin)]

  std::size_t width() const noexcept { return static_cast<std::size_t>(static_cast<long>(t) - tau_begin); }
  double operator()(std::size_t i, std::size_t j, long tau) const {
    return values[(i * processors + j) * width() + static_cast<std::size_t>(tau - tau_begin)];
  }
  double& operator()(std::size_t i, std::size_t j, long tau) {
    return values[(i * processors + j) * width() + static_cast<std::size_t>(tau - tau_begin)];
  }
};

/// Forward impulse responses: a unit payload in x^j(0) (tau = -1) or in s^j(tau) run
/// through the iterations up to tick t. Throws UsageError if t exceeds the horizon.
PhiTable compute_phi(const CommSchedule& s, std::size_t t);

/// Tables for every t in [0, t_max] from a single forward pass.
std::vector<PhiTable> phi_history(const CommSchedule& s, std::size_t t_max);

/// Same coefficients by a backward (adjoint) pass per receiver, restricted to
/// tau >= tau_begin. Cost O((t - tau_begin) * M^3).
PhiTable compute_phi_adjoint(const CommSchedule& s, std::size_t t, long tau_begin = -1);

/// Estimated limits phi^j(tau) and the geometric envelope |phi^{i,j}(t,tau) - phi^j(tau)| <= A rho^(t - tau).
struct PhiLimits {
  std::size_t processors = 0;
  std::size_t t = 0;      // tick of the table the limits come from
  long tau_begin = -1;
  std::vector<double> phi_star;  // [j * width + (tau - tau_begin)]
  std::vector<char> resolved;    // receiver spread below 1e-9
  double a_hat = 0.0;
  double rho_hat = 0.0;
  double eta_hat = 0.0;
  bool converged = false;
  std::size_t residual_count = 0;
  double fit_rms = 0.0;  // rms of the log-residual fit

  std::size_t width() const noexcept { return static_cast<std::size_t>(static_cast<long>(t) - tau_begin); }
  double operator()(std::size_t j, long tau) const {
    return phi_star[j * width() + static_cast<std::size_t>(tau - tau_begin)];
  }
  bool is_resolved(std::size_t j, long tau) const {
    return resolved[j * width() + static_cast<std::size_t>(tau - tau_begin)] != 0;
  }
  /// Every phi^j(tau) for tau in [tau_begin, last_tau] is resolved.
  bool resolved_through(long last_tau) const;
};

inline constexpr double kPhiResolveTol = 1e-9;
inline constexpr double kResidualFloor = 1e-14;
inline constexpr double kEnvelopeSafety = 1.1;

/// Limits from the table with the largest t; the other tables supply residuals for the
/// envelope fit. Non-convergent schedules give converged = false and rho_hat = 1.
/// Throws UsageError with fewer than 3 distinct t values.
PhiLimits estimate_phi_limits(const std::vector<PhiTable>& tables);

/// Limits for tau in [-1, horizon - 1] of `run_horizon`, using the schedule's extra ticks
/// beyond `run_horizon` to let the receivers agree.
PhiLimits phi_limits_for_run(const CommSchedule& extended, std::size_t run_horizon);

/// w*(t) maintained through w*(t + 1) = w*(t) + sum_j phi^j(t) s^j(t).
class AgreementVectorTracker {
public:
  AgreementVectorTracker(const PhiLimits& limits, const std::vector<QuantizerVec>& initial);

  const QuantizerVec& value() const noexcept { return w_; }
  std::size_t now() const noexcept { return now_; }
  /// descents[j] = s^j(now). All-zero terms are skipped.
  void advance(const std::vector<QuantizerVec>& descents);

private:
  PhiLimits limits_;
  QuantizerVec w_;
  std::size_t now_ = 0;
};

/// Direct sum sum_j phi^j(-1) w^j(0) + sum_{tau < t} sum_j phi^j(tau) s^j(tau).
/// descent_history[tau][j]; same summation order as the tracker, so the two agree exactly.
QuantizerVec agreement_vector(const PhiLimits& limits, const std::vector<QuantizerVec>& initial,
                              const std::vector<std::vector<QuantizerVec>>& descent_history, std::size_t t);

/// JSON array of {"t", "tau", "i", "j", "value"} records.
void write_phi_table_json(const PhiTable& table, std::ostream& out);

} // namespace dalvq
