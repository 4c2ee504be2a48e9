#pragma once

// Quantities used to check consensus and convergence of a run: theta_t, eps*, the
// perturbation terms Delta M^(1), Delta M^(2), per-record metrics and the final report.

#include "dalvq/agreement.hpp"
#include "dalvq/geometry.hpp"
#include "dalvq/schedule.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dalvq {

/// sum_{tau=-1}^{t-1} rho^(t - tau) / (tau v 1), by direct summation.
/// Throws UsageError unless 0 < rho < 1.
double theta(double rho, std::size_t t);

/// theta_t for t = 0, 1, ... by the recursion theta_{t+1} = rho theta_t + rho / (t v 1).
class ThetaSeries {
public:
  explicit ThetaSeries(double rho);
  double rho() const noexcept { return rho_; }
  std::size_t t() const noexcept { return t_; }
  double value() const noexcept { return value_; }
  void advance();

  /// theta_0 .. theta_{t_max}.
  static std::vector<double> values(double rho, std::size_t t_max);

private:
  double rho_;
  std::size_t t_ = 0;
  double value_;
};

/// eps*_{t+1} = sum over processors active at t of phi^j(t) eps^j_{t+1}; eps[j] is the
/// step processor j would use at t. nullopt when a needed limit is unresolved.
std::optional<double> eps_star(const CommSchedule& s, const PhiLimits& limits, std::size_t t,
                               std::span<const double> eps);

/// sum over active j of phi^j(t) eps^j (h(w*(t)) - h(w^j(t))); h_star = h(w*(t)).
QuantizerVec delta_m1(const CommSchedule& s, const PhiLimits& limits, std::size_t t, std::span<const double> eps,
                      const std::vector<QuantizerVec>& versions, const QuantizerVec& h_star, const SampleBatch& batch);

/// sum over active j of phi^j(t) eps^j (h(w^j(t)) - H(z^j_{t+1}, w^j(t))); samples[j] is
/// the point processor j consumed at tick t (ignored for idle processors).
QuantizerVec delta_m2(const CommSchedule& s, const PhiLimits& limits, std::size_t t, std::span<const double> eps,
                      const std::vector<QuantizerVec>& versions, const std::vector<std::vector<double>>& samples,
                      const SampleBatch& batch);

/// One row of metrics.csv.
struct MetricsRecord {
  std::size_t t = 0;
  double consensus_gap = 0.0;
  double agreement_gap = 0.0;
  double bound_normmaj = 0.0;
  double distortion_star = 0.0;
  double grad_norm_star = 0.0;
  double eps_star = 0.0;
  double min_sep_star = 0.0;
  double sum_eps_grad2 = 0.0;
  double sum_dm1 = 0.0;
  double dm2_partial_norm = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "t,consensus_gap,agreement_gap,bound_normmaj,distortion_star,grad_norm_star,eps_star,min_sep_star,"
    "sum_eps_grad2,sum_dm1,dm2_partial_norm";

/// Run-level facts the report needs besides the metric rows.
struct SummaryInputs {
  std::size_t horizon = 0;
  std::size_t processors = 1;
  std::size_t kappa = 1;
  double diameter = 0.0;
  double k1 = 0.0;
  double k2 = 1.0;
  bool phi_available = false;
  double eta_hat = 0.0;
  /// min and max of eps*_{t+1} (t v 1) over every tick, and sum_{t<=T} eps*_t.
  double eps_star_scaled_min = 0.0;
  double eps_star_scaled_max = 0.0;
  double eps_star_sum = 0.0;
  std::vector<QuantizerVec> dm2_samples;  // Delta M^(2) at recorded ticks t < T
  std::vector<std::size_t> dm2_ticks;
  std::optional<double> lloyd_distortion;
  std::optional<double> clvq_distortion;
};

struct ConvergenceReport {
  // (a) consensus trend over the last half of the records
  double consensus_slope = 0.0;  // per tick, of log consensus_gap
  double consensus_rate = 0.0;   // exp(slope)
  double final_consensus_gap = 0.0;
  bool consensus_exact = false;  // gap reached exactly 0
  // (b) agreement gap under the fitted envelope bound
  bool normmaj_available = false;
  std::size_t normmaj_violations = 0;
  double normmaj_max_ratio = 0.0;
  // (c) Cauchy tail of sum eps* |h(w*)|^2
  double sum_eps_grad2_total = 0.0;
  double sum_eps_grad2_tail = 0.0;  // last-quarter increment
  double cauchy_ratio = 0.0;
  // (d)
  double min_sep_min = 0.0;
  // (e)
  double final_distortion = 0.0;
  std::optional<double> lloyd_distortion;
  std::optional<double> clvq_distortion;
  std::optional<double> ratio_to_lloyd;
  // descent trend
  double grad_norm_at_100 = 0.0;
  double grad_norm_final = 0.0;
  double grad_ratio = 0.0;
  double grad_norm_slope = 0.0;  // log-log, last half
  double distortion_first_quarter = 0.0;
  double distortion_last_quarter = 0.0;
  // eps*
  bool eps_star_available = false;
  double eps_star_lower = 0.0;  // eta_hat K1
  double eps_star_upper = 0.0;  // M K2
  double eps_star_scaled_min = 0.0;
  double eps_star_scaled_max = 0.0;
  double eps_star_sum = 0.0;
  double eps_star_sum_floor = 0.0;  // eta_hat K1 ln(T) / 2
  // Delta M^(2)
  std::size_t dm2_used = 0;
  double dm2_mean_norm = 0.0;
  double dm2_std = 0.0;
  double dm2_envelope = 0.0;
  double dm2_max_partial_norm = 0.0;
  double dm2_sum_sq = 0.0;
  double dm2_sum_sq_bound = 0.0;
  bool triangle_ok = true;

  bool consensus_decreasing() const { return consensus_exact || consensus_slope < 0.0; }
  bool normmaj_holds() const { return normmaj_available && normmaj_violations == 0; }
  bool eps_star_within_bounds() const {
    return eps_star_available && eps_star_scaled_min >= eps_star_lower * (1 - 1e-12) &&
           eps_star_scaled_max <= eps_star_upper * (1 + 1e-12);
  }
  bool eps_star_diverges() const { return eps_star_available && eps_star_sum >= eps_star_sum_floor; }
  bool dm2_centered() const { return dm2_used > 1 && dm2_mean_norm < 3.0 * dm2_std / std::sqrt(static_cast<double>(dm2_used)); }
  bool dm2_bounded() const { return dm2_max_partial_norm <= dm2_envelope && dm2_sum_sq <= dm2_sum_sq_bound; }
};

/// Upper bound on the Delta M^(2) samples used for the centering check (evenly strided).
inline constexpr std::size_t kDm2SampleLimit = 10000;

ConvergenceReport summarize(const std::vector<MetricsRecord>& metrics, const SummaryInputs& in);

/// Least-squares slope of ys against xs; 0 with fewer than two points.
double ls_slope(std::span<const double> xs, std::span<const double> ys);

} // namespace dalvq
