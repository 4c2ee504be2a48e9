#include "dalvq/diagnostics.hpp"

#include "dalvq/errors.hpp"

#include <algorithm>
#include <limits>

namespace dalvq {

namespace {
void require_rho(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw UsageError("theta: rho must lie in (0, 1)");
}
} // namespace

double theta(double rho, std::size_t t) {
  require_rho(rho);
  double sum = 0.0;
  double power = 1.0;
  // tau from t-1 down to -1: power = rho^(t - tau)
  for (long tau = static_cast<long>(t) - 1; tau >= -1; --tau) {
    power *= rho;
    sum += power / static_cast<double>(std::max<long>(tau, 1));
  }
  return sum;
}

ThetaSeries::ThetaSeries(double rho) : rho_(rho), value_(rho) { require_rho(rho); }

void ThetaSeries::advance() {
  value_ = rho_ * value_ + rho_ / static_cast<double>(std::max<std::size_t>(t_, 1));
  ++t_;
}

std::vector<double> ThetaSeries::values(double rho, std::size_t t_max) {
  ThetaSeries s(rho);
  std::vector<double> out;
  out.reserve(t_max + 1);
  out.push_back(s.value());
  while (s.t() < t_max) {
    s.advance();
    out.push_back(s.value());
  }
  return out;
}

namespace {

bool phi_ready(const PhiLimits& limits, std::size_t t) {
  const long tau = static_cast<long>(t);
  return tau >= limits.tau_begin && tau < static_cast<long>(limits.t);
}

} // namespace

std::optional<double> eps_star(const CommSchedule& s, const PhiLimits& limits, std::size_t t,
                               std::span<const double> eps) {
  if (!phi_ready(limits, t)) return std::nullopt;
  double sum = 0.0;
  for (std::size_t j = 0; j < s.processors(); ++j) {
    if (!s.active(t, j)) continue;
    if (!limits.is_resolved(j, static_cast<long>(t))) return std::nullopt;
    sum += limits(j, static_cast<long>(t)) * eps[j];
  }
  return sum;
}

QuantizerVec delta_m1(const CommSchedule& s, const PhiLimits& limits, std::size_t t, std::span<const double> eps,
                      const std::vector<QuantizerVec>& versions, const QuantizerVec& h_star, const SampleBatch& batch) {
  QuantizerVec out(h_star.kappa(), h_star.dim());
  if (!phi_ready(limits, t)) throw UsageError("delta_m1: phi limit unavailable at tick " + std::to_string(t));
  for (std::size_t j = 0; j < s.processors(); ++j) {
    if (!s.active(t, j)) continue;
    const double weight = limits(j, static_cast<long>(t)) * eps[j];
    out.add_scaled(weight, h_star);
    out.add_scaled(-weight, empirical_h(versions[j], batch));
  }
  return out;
}

QuantizerVec delta_m2(const CommSchedule& s, const PhiLimits& limits, std::size_t t, std::span<const double> eps,
                      const std::vector<QuantizerVec>& versions, const std::vector<std::vector<double>>& samples,
                      const SampleBatch& batch) {
  if (versions.empty()) throw UsageError("delta_m2: no versions");
  QuantizerVec out(versions.front().kappa(), versions.front().dim());
  if (!phi_ready(limits, t)) throw UsageError("delta_m2: phi limit unavailable at tick " + std::to_string(t));
  for (std::size_t j = 0; j < s.processors(); ++j) {
    if (!s.active(t, j)) continue;
    if (j >= samples.size() || samples[j].size() != versions[j].dim()) {
      throw UsageError("delta_m2: missing sample of processor " + std::to_string(j) + " at tick " + std::to_string(t));
    }
    const double weight = limits(j, static_cast<long>(t)) * eps[j];
    out.add_scaled(weight, empirical_h(versions[j], batch));
    out.add_scaled(-weight, observation_H(samples[j], versions[j]));
  }
  return out;
}

double ls_slope(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n = std::min(xs.size(), ys.size());
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

namespace {

double mean_over(const std::vector<MetricsRecord>& m, std::size_t begin, std::size_t end,
                 double MetricsRecord::*field) {
  if (end <= begin) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (std::size_t k = begin; k < end; ++k) s += m[k].*field;
  return s / static_cast<double>(end - begin);
}

} // namespace

ConvergenceReport summarize(const std::vector<MetricsRecord>& metrics, const SummaryInputs& in) {
  ConvergenceReport r;
  if (metrics.empty()) return r;
  const MetricsRecord& last = metrics.back();
  const std::size_t n = metrics.size();
  const double horizon = static_cast<double>(in.horizon);

  // (a)
  r.final_consensus_gap = last.consensus_gap;
  {
    std::vector<double> xs, ys;
    for (std::size_t k = n / 2; k < n; ++k) {
      if (metrics[k].consensus_gap > 0.0) {
        xs.push_back(static_cast<double>(metrics[k].t));
        ys.push_back(std::log(metrics[k].consensus_gap));
      } else {
        r.consensus_exact = true;
      }
    }
    r.consensus_exact = r.consensus_exact && last.consensus_gap == 0.0;
    r.consensus_slope = r.consensus_exact ? -std::numeric_limits<double>::infinity() : ls_slope(xs, ys);
    r.consensus_rate = std::exp(r.consensus_slope);
  }

  // (b)
  r.normmaj_available = in.phi_available;
  for (const auto& m : metrics) {
    if (std::isfinite(m.agreement_gap) && m.consensus_gap > 2.0 * m.agreement_gap * (1.0 + 1e-12)) r.triangle_ok = false;
    if (!std::isfinite(m.bound_normmaj)) {
      r.normmaj_available = false;
      continue;
    }
    if (m.agreement_gap > m.bound_normmaj) ++r.normmaj_violations;
    if (m.bound_normmaj > 0.0) r.normmaj_max_ratio = std::max(r.normmaj_max_ratio, m.agreement_gap / m.bound_normmaj);
  }

  // (c)
  r.sum_eps_grad2_total = last.sum_eps_grad2;
  {
    const std::size_t quarter_tick = in.horizon - in.horizon / 4;
    double at_quarter = 0.0;
    for (const auto& m : metrics) {
      if (m.t <= quarter_tick) at_quarter = m.sum_eps_grad2;
    }
    r.sum_eps_grad2_tail = last.sum_eps_grad2 - at_quarter;
    r.cauchy_ratio = r.sum_eps_grad2_total > 0.0 ? r.sum_eps_grad2_tail / r.sum_eps_grad2_total : 0.0;
  }

  // (d)
  r.min_sep_min = std::numeric_limits<double>::infinity();
  for (const auto& m : metrics) r.min_sep_min = std::min(r.min_sep_min, m.min_sep_star);

  // (e)
  r.final_distortion = last.distortion_star;
  r.lloyd_distortion = in.lloyd_distortion;
  r.clvq_distortion = in.clvq_distortion;
  if (in.lloyd_distortion && *in.lloyd_distortion > 0.0) r.ratio_to_lloyd = last.distortion_star / *in.lloyd_distortion;

  // descent trend
  r.grad_norm_final = last.grad_norm_star;
  r.grad_norm_at_100 = metrics.front().grad_norm_star;
  for (const auto& m : metrics) {
    if (m.t <= 100) r.grad_norm_at_100 = m.grad_norm_star;
  }
  r.grad_ratio = r.grad_norm_at_100 > 0.0 ? r.grad_norm_final / r.grad_norm_at_100 : 0.0;
  {
    std::vector<double> xs, ys;
    for (std::size_t k = n / 2; k < n; ++k) {
      if (metrics[k].t > 0 && metrics[k].grad_norm_star > 0.0) {
        xs.push_back(std::log(static_cast<double>(metrics[k].t)));
        ys.push_back(std::log(metrics[k].grad_norm_star));
      }
    }
    r.grad_norm_slope = ls_slope(xs, ys);
  }
  r.distortion_first_quarter = mean_over(metrics, 0, std::max<std::size_t>(n / 4, 1), &MetricsRecord::distortion_star);
  r.distortion_last_quarter = mean_over(metrics, n - std::max<std::size_t>(n / 4, 1), n, &MetricsRecord::distortion_star);

  // eps*
  r.eps_star_available = in.phi_available;
  r.eps_star_lower = in.eta_hat * in.k1;
  r.eps_star_upper = static_cast<double>(in.processors) * in.k2;
  r.eps_star_scaled_min = in.eps_star_scaled_min;
  r.eps_star_scaled_max = in.eps_star_scaled_max;
  r.eps_star_sum = in.eps_star_sum;
  r.eps_star_sum_floor = in.horizon > 0 ? in.eta_hat * in.k1 * std::log(horizon) / 2.0 : 0.0;

  // Delta M^(2)
  const std::size_t available = in.dm2_samples.size();
  if (available > 0) {
    const std::size_t stride = std::max<std::size_t>(available / kDm2SampleLimit, 1);
    const std::size_t used = std::min(available / stride, kDm2SampleLimit);
    QuantizerVec mean(in.dm2_samples.front().kappa(), in.dm2_samples.front().dim());
    for (std::size_t k = 0; k < used; ++k) mean.add_scaled(1.0 / static_cast<double>(used), in.dm2_samples[k * stride]);
    double var = 0.0;
    for (std::size_t k = 0; k < used; ++k) {
      const double d = squared_distance(in.dm2_samples[k * stride].coords(), mean.coords());
      var += d;
    }
    r.dm2_used = used;
    r.dm2_mean_norm = mean.norm();
    r.dm2_std = used > 1 ? std::sqrt(var / static_cast<double>(used - 1)) : 0.0;

    double inv_sq = 0.0;
    for (std::size_t k = 0; k < available; ++k) {
      const double tau = static_cast<double>(std::max<std::size_t>(in.dm2_ticks[k], 1));
      inv_sq += 1.0 / (tau * tau);
      const double nn = in.dm2_samples[k].norm();
      r.dm2_sum_sq += nn * nn;
    }
    const double m = static_cast<double>(in.processors);
    const double scale = m * m * 4.0 * static_cast<double>(in.kappa) * in.diameter * in.diameter * in.k2 * in.k2;
    r.dm2_sum_sq_bound = scale * inv_sq;
    r.dm2_envelope = std::sqrt(scale * inv_sq);
  }
  for (const auto& rec : metrics) r.dm2_max_partial_norm = std::max(r.dm2_max_partial_norm, rec.dm2_partial_norm);
  return r;
}

} // namespace dalvq
