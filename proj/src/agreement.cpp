#include "dalvq/agreement.hpp"

#include "dalvq/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

namespace dalvq {

VersionHistory::VersionHistory(std::vector<QuantizerVec> initial, std::size_t depth)
    : m_(initial.size()), depth_(std::max<std::size_t>(depth, 1)), ring_(depth_) {
  ring_[0] = std::move(initial);
}

const QuantizerVec& VersionHistory::at(std::size_t i, std::size_t delay) const {
  if (delay >= depth_ || delay > now_) {
    throw InternalError("history of depth " + std::to_string(depth_) + " at tick " + std::to_string(now_) +
                        " cannot serve delay " + std::to_string(delay));
  }
  return ring_[(head_ + depth_ - delay) % depth_][i];
}

std::vector<QuantizerVec> VersionHistory::current_all() const { return ring_[head_]; }

void VersionHistory::push(std::vector<QuantizerVec> next) {
  if (next.size() != m_) throw InternalError("history push with wrong processor count");
  head_ = (head_ + 1) % depth_;
  ring_[head_] = std::move(next);
  ++now_;
}

QuantizerVec combine(const CommSchedule& s, std::size_t t, std::size_t i, const VersionHistory& h) {
  const auto row = s.coeff_row(t, i);
  const auto delays = s.delay_row(t, i);
  const QuantizerVec& self = h.current(i);
  QuantizerVec out(self.kappa(), self.dim());
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] == 0.0) continue;
    out.add_scaled(row[j], h.at(j, delays[j]));
  }
  return out;
}

void agreement_step(VersionHistory& h, const CommSchedule& s, std::size_t t) {
  if (h.now() != t) throw InternalError("agreement_step: history is not at tick " + std::to_string(t));
  if (t >= s.horizon()) throw UsageError("agreement_step: tick beyond the schedule horizon");
  std::vector<QuantizerVec> next;
  next.reserve(h.processors());
  for (std::size_t i = 0; i < h.processors(); ++i) next.push_back(combine(s, t, i, h));
  h.push(std::move(next));
}

double max_spread(const std::vector<QuantizerVec>& versions) {
  double best = 0.0;
  for (std::size_t i = 0; i < versions.size(); ++i) {
    for (std::size_t j = i + 1; j < versions.size(); ++j) {
      best = std::max(best, squared_distance(versions[i].coords(), versions[j].coords()));
    }
  }
  return std::sqrt(best);
}

namespace {

// Forward pass over all impulses at once. state[s] holds x^i(s) for every impulse
// (j, tau), laid out as (i * M + j) * width + (tau + 1), width = t_max + 1.
template <typename Visit>
void forward_impulses(const CommSchedule& s, std::size_t t_max, Visit&& visit) {
  if (t_max > s.horizon()) throw UsageError("phi requested beyond the schedule horizon");
  const std::size_t m = s.processors();
  const std::size_t width = t_max + 1;
  const std::size_t stride = m * m * width;
  // one slot beyond the oldest delayed read, so the tick being written never aliases a source
  std::size_t depth = 2;
  for (std::size_t t = 0; t < t_max; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      for (auto d : s.delay_row(t, i)) depth = std::max<std::size_t>(depth, d + 2);
    }
  }
  std::vector<std::vector<double>> ring(depth, std::vector<double>(stride, 0.0));
  for (std::size_t j = 0; j < m; ++j) ring[0][(j * m + j) * width] = 1.0;
  visit(std::size_t{0}, ring[0], width);
  for (std::size_t t = 0; t < t_max; ++t) {
    std::vector<double>& next = ring[(t + 1) % depth];
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto row = s.coeff_row(t, i);
      const auto delays = s.delay_row(t, i);
      for (std::size_t k = 0; k < m; ++k) {
        if (row[k] == 0.0) continue;
        const std::vector<double>& src = ring[(t - delays[k]) % depth];
        for (std::size_t j = 0; j < m; ++j) {
          double* dst = next.data() + (i * m + j) * width;
          const double* from = src.data() + (k * m + j) * width;
          // impulses with tau >= t are still zero in every version read at tick t
          for (std::size_t c = 0; c <= t; ++c) dst[c] += row[k] * from[c];
        }
      }
      next[(i * m + i) * width + (t + 1)] += 1.0;  // s^i(t) enters x^i(t + 1)
    }
    visit(t + 1, next, width);
  }
}

PhiTable table_from_state(std::size_t t, std::size_t m, const std::vector<double>& state, std::size_t width) {
  PhiTable out{t, -1, m, std::vector<double>(m * m * (t + 1))};
  for (std::size_t ij = 0; ij < m * m; ++ij) {
    std::copy_n(state.begin() + static_cast<long>(ij * width), t + 1, out.values.begin() + static_cast<long>(ij * (t + 1)));
  }
  return out;
}

} // namespace

PhiTable compute_phi(const CommSchedule& s, std::size_t t) {
  PhiTable out;
  forward_impulses(s, t, [&](std::size_t tick, const std::vector<double>& state, std::size_t width) {
    if (tick == t) out = table_from_state(t, s.processors(), state, width);
  });
  return out;
}

std::vector<PhiTable> phi_history(const CommSchedule& s, std::size_t t_max) {
  std::vector<PhiTable> out;
  out.reserve(t_max + 1);
  forward_impulses(s, t_max, [&](std::size_t tick, const std::vector<double>& state, std::size_t width) {
    out.push_back(table_from_state(tick, s.processors(), state, width));
  });
  return out;
}

PhiTable compute_phi_adjoint(const CommSchedule& s, std::size_t t, long tau_begin) {
  if (t > s.horizon()) throw UsageError("phi requested beyond the schedule horizon");
  if (tau_begin < -1 || tau_begin > static_cast<long>(t) - 1) throw UsageError("phi window out of range");
  const std::size_t m = s.processors();
  const std::size_t lo = static_cast<std::size_t>(tau_begin + 1);  // earliest version tick needed
  const std::size_t span = t - lo + 1;
  PhiTable out{t, tau_begin, m, {}};
  out.values.assign(m * m * out.width(), 0.0);
  // g[(x - lo) * M + k] = d x^r(t) / d x^k(x)
  std::vector<double> g(span * m);
  for (std::size_t r = 0; r < m; ++r) {
    std::fill(g.begin(), g.end(), 0.0);
    g[(t - lo) * m + r] = 1.0;
    for (std::size_t tick = t; tick-- > lo;) {
      const double* upstream = g.data() + (tick + 1 - lo) * m;
      for (std::size_t i = 0; i < m; ++i) {
        if (upstream[i] == 0.0) continue;
        const auto row = s.coeff_row(tick, i);
        const auto delays = s.delay_row(tick, i);
        for (std::size_t j = 0; j < m; ++j) {
          if (row[j] == 0.0 || delays[j] > tick - lo) continue;
          g[(tick - delays[j] - lo) * m + j] += row[j] * upstream[i];
        }
      }
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (long tau = tau_begin; tau < static_cast<long>(t); ++tau) {
        out(r, j, tau) = g[(static_cast<std::size_t>(tau + 1) - lo) * m + j];
      }
    }
  }
  return out;
}

bool PhiLimits::resolved_through(long last_tau) const {
  if (last_tau >= static_cast<long>(t) || last_tau < tau_begin) return false;
  for (std::size_t j = 0; j < processors; ++j) {
    for (long tau = tau_begin; tau <= last_tau; ++tau) {
      if (!is_resolved(j, tau)) return false;
    }
  }
  return true;
}

PhiLimits estimate_phi_limits(const std::vector<PhiTable>& tables) {
  std::map<std::size_t, const PhiTable*> by_t;
  for (const auto& tb : tables) by_t[tb.t] = &tb;
  if (by_t.size() < 3) throw UsageError("estimate_phi_limits needs tables at 3 or more distinct ticks");

  const PhiTable& last = *by_t.rbegin()->second;
  const std::size_t m = last.processors;
  PhiLimits out;
  out.processors = m;
  out.t = last.t;
  out.tau_begin = last.tau_begin;
  const std::size_t width = out.width();
  out.phi_star.assign(m * width, 0.0);
  out.resolved.assign(m * width, 0);
  out.eta_hat = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) {
    for (long tau = last.tau_begin; tau < static_cast<long>(last.t); ++tau) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double v = last(i, j, tau);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
      }
      const std::size_t k = j * width + static_cast<std::size_t>(tau - last.tau_begin);
      out.phi_star[k] = sum / static_cast<double>(m);
      out.resolved[k] = (hi - lo) < kPhiResolveTol;
      if (out.resolved[k]) out.eta_hat = std::min(out.eta_hat, out.phi_star[k]);
    }
  }
  if (!std::isfinite(out.eta_hat)) out.eta_hat = 0.0;

  // Without agreement on the oldest impulse there is no limit to fit against.
  bool oldest_resolved = true;
  for (std::size_t j = 0; j < m; ++j) oldest_resolved = oldest_resolved && out.is_resolved(j, out.tau_begin);
  if (!oldest_resolved) {
    out.converged = false;
    out.rho_hat = 1.0;
    out.a_hat = 1.0;
    return out;
  }

  std::vector<std::pair<double, double>> samples;  // (lag, log residual)
  for (auto it = by_t.begin(); std::next(it) != by_t.end(); ++it) {
    const PhiTable& tb = *it->second;
    const long first = std::max(tb.tau_begin, out.tau_begin);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        for (long tau = first; tau < static_cast<long>(tb.t); ++tau) {
          if (!out.is_resolved(j, tau)) continue;
          const double r = std::abs(tb(i, j, tau) - out(j, tau));
          if (r > kResidualFloor) samples.emplace_back(static_cast<double>(static_cast<long>(tb.t) - tau), std::log(r));
        }
      }
    }
  }
  out.residual_count = samples.size();

  double mx = 0.0, my = 0.0;
  for (auto [x, y] : samples) {
    mx += x;
    my += y;
  }
  const double n = static_cast<double>(samples.size());
  double sxx = 0.0, sxy = 0.0;
  if (!samples.empty()) {
    mx /= n;
    my /= n;
    for (auto [x, y] : samples) {
      sxx += (x - mx) * (x - mx);
      sxy += (x - mx) * (y - my);
    }
  }
  if (samples.size() < 2 || sxx == 0.0) {
    // Finite-time agreement: nothing left above the noise floor to fit.
    out.converged = true;
    out.rho_hat = 0.0;
    double worst = 0.0;
    for (auto [x, y] : samples) worst = std::max(worst, std::exp(y));
    out.a_hat = kEnvelopeSafety * worst;
    return out;
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double sse = 0.0;
  double log_a = -std::numeric_limits<double>::infinity();
  for (auto [x, y] : samples) {
    const double e = y - (intercept + slope * x);
    sse += e * e;
    log_a = std::max(log_a, y - slope * x);
  }
  out.fit_rms = std::sqrt(sse / n);
  out.rho_hat = std::exp(slope);
  out.a_hat = kEnvelopeSafety * std::exp(log_a);
  out.converged = out.rho_hat < 1.0;
  return out;
}

PhiLimits phi_limits_for_run(const CommSchedule& extended, std::size_t run_horizon) {
  if (run_horizon > extended.horizon()) throw UsageError("run horizon beyond the extended schedule");
  const std::size_t t_end = extended.horizon();
  std::vector<PhiTable> tables;
  tables.push_back(compute_phi_adjoint(extended, t_end, -1));

  // Residual samples: early ticks reach back to tau = -1, later ones use a window.
  constexpr std::size_t kWindow = 1024;
  std::vector<std::size_t> ticks;
  for (std::size_t t = 1; t < std::min<std::size_t>(t_end, 1024); t *= 2) ticks.push_back(t);
  for (std::size_t k = 1; k <= 16; ++k) ticks.push_back(std::max<std::size_t>(1, run_horizon * k / 16));
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  for (std::size_t t : ticks) {
    if (t >= t_end) continue;
    const long begin = std::max<long>(-1, static_cast<long>(t) - static_cast<long>(kWindow));
    tables.push_back(compute_phi_adjoint(extended, t, begin));
  }
  // Guarantee three distinct ticks even for tiny schedules.
  for (std::size_t t = 0; t < t_end && tables.size() < 3; ++t) {
    bool seen = false;
    for (const auto& tb : tables) seen = seen || tb.t == t;
    if (!seen) tables.push_back(compute_phi_adjoint(extended, t, -1));
  }
  if (tables.size() < 3) {
    // A one-tick schedule cannot support a fit; fall back to the raw table.
    tables.push_back(tables.front());
  }
  return estimate_phi_limits(tables);
}

AgreementVectorTracker::AgreementVectorTracker(const PhiLimits& limits, const std::vector<QuantizerVec>& initial)
    : limits_(limits) {
  if (initial.size() != limits.processors || initial.empty()) throw UsageError("tracker: processor count mismatch");
  w_ = QuantizerVec(initial.front().kappa(), initial.front().dim());
  for (std::size_t j = 0; j < initial.size(); ++j) w_.add_scaled(limits_(j, -1), initial[j]);
}

namespace {
bool all_zero(const QuantizerVec& v) {
  return std::all_of(v.coords().begin(), v.coords().end(), [](double c) { return c == 0.0; });
}
} // namespace

void AgreementVectorTracker::advance(const std::vector<QuantizerVec>& descents) {
  if (static_cast<long>(now_) >= static_cast<long>(limits_.t)) throw UsageError("tracker: phi limits exhausted");
  for (std::size_t j = 0; j < descents.size(); ++j) {
    if (all_zero(descents[j])) continue;
    w_.add_scaled(limits_(j, static_cast<long>(now_)), descents[j]);
  }
  ++now_;
}

QuantizerVec agreement_vector(const PhiLimits& limits, const std::vector<QuantizerVec>& initial,
                              const std::vector<std::vector<QuantizerVec>>& descent_history, std::size_t t) {
  if (t > descent_history.size()) throw UsageError("agreement_vector: descent history shorter than t");
  if (t > limits.t || limits.tau_begin > -1) throw UsageError("agreement_vector: missing phi entries");
  AgreementVectorTracker tracker(limits, initial);
  for (std::size_t tau = 0; tau < t; ++tau) tracker.advance(descent_history[tau]);
  return tracker.value();
}

void write_phi_table_json(const PhiTable& table, std::ostream& out) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < table.processors; ++i) {
    for (std::size_t j = 0; j < table.processors; ++j) {
      for (long tau = table.tau_begin; tau < static_cast<long>(table.t); ++tau) {
        arr.push_back({{"t", table.t}, {"tau", tau}, {"i", i}, {"j", j}, {"value", table(i, j, tau)}});
      }
    }
  }
  out << arr.dump() << '\n';
}

} // namespace dalvq
