#include "dalvq/engine.hpp"

#include "dalvq/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace dalvq {

namespace {
constexpr std::uint32_t kPerProcessorInitBase = 0x80000000u;
constexpr std::size_t kFirstPhiTail = 64;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
} // namespace

std::string to_string(SampleMode m) { return m == SampleMode::ReplayFromBatch ? "replay-from-batch" : "fresh-stream"; }
std::string to_string(InitMode m) { return m == InitMode::Shared ? "shared" : "per-processor"; }

SampleMode sample_mode_from_string(const std::string& s) {
  if (s == "replay-from-batch") return SampleMode::ReplayFromBatch;
  if (s == "fresh-stream") return SampleMode::FreshStream;
  throw ConfigError("unknown sampling mode '" + s + "'");
}

InitMode init_mode_from_string(const std::string& s) {
  if (s == "shared") return InitMode::Shared;
  if (s == "per-processor") return InitMode::PerProcessor;
  throw ConfigError("unknown init mode '" + s + "'");
}

void check_run_config(const RunConfig& c) {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be at least 1");
  };
  positive(c.processors, "processors");
  positive(c.kappa, "kappa");
  positive(c.dim, "dim");
  positive(c.n_ref, "n_ref");
  positive(c.cadence, "cadence");
  if (c.horizon % c.cadence != 0) {
    throw ConfigError("cadence " + std::to_string(c.cadence) + " must divide the horizon " + std::to_string(c.horizon));
  }
  if (c.distribution.dim != c.dim) throw ConfigError("distribution dimension differs from dim");
  (void)validate_distribution(c.distribution);

  const StepPolicy& s = c.steps;
  if (!(s.c > 0.0) || !std::isfinite(s.c)) throw ConfigError("steps.c must be positive");
  if (!(s.eps_max > 0.0 && s.eps_max < 1.0)) throw ConfigError("steps.eps_max must lie in (0, 1)");
  if (s.k1 && !(*s.k1 > 0.0)) throw ConfigError("A8 step bounds: K1 must be positive");
  if (s.k2 && !(*s.k2 >= 1.0)) throw ConfigError("A8 step bounds: K2 must be at least 1");
  if (s.k1 && s.k2 && *s.k2 < *s.k1) throw ConfigError("A8 step bounds: K2 must not be below K1");

  check_schedule_spec(c.schedule, c.processors, c.horizon == 0 ? std::max<std::size_t>(c.schedule.period, 1) : c.horizon);
}

Descent descent_term(ProcessorState& p, std::size_t i, std::size_t t, const CommSchedule& s, const QuantizerVec& w,
                     const SampleSource& source, const StepPolicy& steps) {
  Descent d;
  if (!s.active(t, i)) {
    d.s = QuantizerVec(w.kappa(), w.dim());
    return d;
  }
  ++p.local_count;
  d.active = true;
  d.eps = steps.at(t, p.local_count);
  d.z = source.draw(p.stream);
  d.s = observation_H(d.z, w);
  d.s *= -d.eps;
  return d;
}

DalvqEngine::DalvqEngine(const CommSchedule& schedule, std::vector<QuantizerVec> initial, SampleSource source,
                         StepPolicy steps, std::uint64_t seed)
    : schedule_(&schedule), source_(std::move(source)), steps_(steps) {
  if (initial.size() != schedule.processors()) throw UsageError("engine: one initial version per processor required");
  const std::size_t depth = std::max(schedule.constants.b1, schedule.max_delay() + 1);
  history_ = VersionHistory(std::move(initial), depth);
  for (std::size_t i = 0; i < schedule.processors(); ++i) {
    procs_.push_back({0, StreamHandle{seed, static_cast<std::uint32_t>(i), 0}});
  }
}

void DalvqEngine::tick() {
  const std::size_t t = now();
  if (t >= schedule_->horizon()) throw UsageError("engine: tick beyond the schedule horizon");
  const std::size_t m = schedule_->processors();
  std::vector<QuantizerVec> next;
  next.reserve(m);
  last_.assign(m, Descent{});
  for (std::size_t i = 0; i < m; ++i) {
    next.push_back(combine(*schedule_, t, i, history_));
    const QuantizerVec& w = history_.current(i);
    if (descent_) {
      last_[i] = descent_term(procs_[i], i, t, *schedule_, w, source_, steps_);
    } else {
      last_[i].s = QuantizerVec(w.kappa(), w.dim());
    }
    if (last_[i].active) next[i].add_scaled(1.0, last_[i].s);
  }
  history_.push(std::move(next));
}

std::vector<std::vector<double>> step_table(const CommSchedule& s, const StepPolicy& steps, std::size_t ticks) {
  const std::size_t m = s.processors();
  std::vector<std::vector<double>> table(ticks, std::vector<double>(m));
  std::vector<std::size_t> count(m, 0);
  for (std::size_t t = 0; t < ticks; ++t) {
    for (std::size_t j = 0; j < m; ++j) {
      if (s.active(t, j)) ++count[j];
      table[t][j] = steps.at(t, std::max<std::size_t>(count[j], 1));
    }
  }
  return table;
}

StepBounds derive_step_bounds(const CommSchedule& s, const std::vector<std::vector<double>>& table, std::size_t ticks,
                              const StepPolicy& steps) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t t = 0; t < ticks; ++t) {
    const double scale = static_cast<double>(std::max<std::size_t>(t, 1));
    for (std::size_t j = 0; j < s.processors(); ++j) {
      if (!s.active(t, j)) continue;
      lo = std::min(lo, table[t][j] * scale);
      hi = std::max(hi, table[t][j] * scale);
    }
  }
  if (!std::isfinite(lo)) lo = std::min(steps.c, steps.eps_max);  // nothing emitted
  StepBounds b{lo, std::max(hi, 1.0)};
  if (steps.k1) {
    if (*steps.k1 > b.k1 * (1.0 + 1e-12)) {
      throw ConfigError("A8 step bounds: declared K1 = " + std::to_string(*steps.k1) + " exceeds the smallest eps*(t v 1) = " +
                        std::to_string(b.k1));
    }
    b.k1 = *steps.k1;
  }
  if (steps.k2) {
    if (*steps.k2 < b.k2 * (1.0 - 1e-12)) {
      throw ConfigError("A8 step bounds: declared K2 = " + std::to_string(*steps.k2) + " is below the largest eps*(t v 1) = " +
                        std::to_string(b.k2));
    }
    b.k2 = *steps.k2;
  }
  return b;
}

std::vector<QuantizerVec> initial_versions(const RunConfig& config) {
  std::vector<QuantizerVec> out;
  if (config.init == InitMode::Shared) {
    out.assign(config.processors, init_quantizer(config.distribution, config.seed, config.kappa));
  } else {
    for (std::size_t i = 0; i < config.processors; ++i) {
      out.push_back(init_quantizer(config.distribution, config.seed, config.kappa,
                                   kPerProcessorInitBase + static_cast<std::uint32_t>(i)));
    }
  }
  return out;
}

namespace {

RunArtifacts run_impl(const RunConfig& config, const CommSchedule& schedule, const CommSchedule* extended,
                      std::optional<PhiLimits> limits, std::size_t tail) {
  const auto started = std::chrono::steady_clock::now();
  check_run_config(config);
  const std::size_t horizon = config.horizon;
  const std::size_t m = config.processors;
  if (schedule.processors() != m || schedule.horizon() < horizon) {
    throw ConfigError("schedule does not cover " + std::to_string(m) + " processors for " + std::to_string(horizon) + " ticks");
  }
  const CommSchedule& ext = extended ? *extended : schedule;

  RunArtifacts a;
  a.config = config;
  a.schedule = schedule.horizon() == horizon ? schedule : schedule.prefix(horizon);
  a.validation = validate(a.schedule);
  a.reference = make_batch(config.distribution, config.seed, config.n_ref);
  a.initial = initial_versions(config);
  const SampleSource source = config.sampling == SampleMode::ReplayFromBatch ? SampleSource::replay(a.reference)
                                                                             : SampleSource::fresh(config.distribution);

  const std::size_t step_ticks = std::min(horizon + 1, ext.horizon());
  const auto eps_table = step_table(ext, config.steps, step_ticks);
  a.step_bounds = derive_step_bounds(ext, eps_table, horizon, config.steps);

  if (config.diagnostics && !limits && ext.horizon() > 0) limits = phi_limits_for_run(ext, horizon);
  const bool available = limits && limits->converged && (horizon == 0 || limits->resolved_through(static_cast<long>(horizon) - 1));
  if (limits) {
    a.phi = {available, limits->a_hat, limits->rho_hat, limits->eta_hat, limits->converged, tail,
             limits->residual_count, limits->fit_rms};
  }

  std::optional<AgreementVectorTracker> tracker;
  if (available) tracker.emplace(*limits, a.initial);
  const bool theta_ok = available && limits->rho_hat > 0.0 && limits->rho_hat < 1.0;
  const bool theta_zero = available && limits->rho_hat == 0.0;
  std::optional<ThetaSeries> theta;
  if (theta_ok) theta.emplace(limits->rho_hat);
  const double diam = a.reference.diameter;
  const double bound_scale = std::sqrt(static_cast<double>(config.kappa)) * static_cast<double>(m) * diam *
                             (available ? limits->a_hat : 0.0) * a.step_bounds.k2;

  DalvqEngine engine(a.schedule, a.initial, source, config.steps, config.seed);
  SummaryInputs& in = a.summary_inputs;
  in.horizon = horizon;
  in.processors = m;
  in.kappa = config.kappa;
  in.diameter = diam;
  in.k1 = a.step_bounds.k1;
  in.k2 = a.step_bounds.k2;
  in.phi_available = available;
  in.eta_hat = available ? limits->eta_hat : 0.0;
  in.eps_star_scaled_min = std::numeric_limits<double>::infinity();
  in.eps_star_scaled_max = 0.0;

  double sum_eps_grad2 = 0.0;
  double sum_dm1 = 0.0;
  QuantizerVec dm2_partial(config.kappa, config.dim);

  for (std::size_t t = 0;; ++t) {
    const bool record = t % config.cadence == 0 || t == horizon;
    MetricsRecord rec;
    std::vector<QuantizerVec> versions;
    QuantizerVec h_star;
    if (record) {
      versions = engine.versions();
      rec.t = t;
      rec.consensus_gap = max_spread(versions);
      rec.agreement_gap = rec.bound_normmaj = rec.distortion_star = rec.grad_norm_star = kNaN;
      rec.eps_star = rec.min_sep_star = rec.sum_eps_grad2 = rec.sum_dm1 = rec.dm2_partial_norm = kNaN;
      if (tracker) {
        const QuantizerVec& w_star = tracker->value();
        double gap = 0.0;
        for (const auto& v : versions) gap = std::max(gap, distance(w_star.coords(), v.coords()));
        rec.agreement_gap = gap;
        if (theta_ok) rec.bound_normmaj = bound_scale * theta->value();
        if (theta_zero) rec.bound_normmaj = 0.0;
        auto dh = empirical_distortion_and_h(w_star, a.reference);
        rec.distortion_star = dh.distortion;
        rec.grad_norm_star = dh.h.norm();
        h_star = std::move(dh.h);
        rec.min_sep_star = min_component_separation(w_star);
        rec.sum_eps_grad2 = sum_eps_grad2;
        rec.sum_dm1 = sum_dm1;
        rec.dm2_partial_norm = dm2_partial.norm();
      }
    }

    if (t == horizon) {
      if (tracker && t < eps_table.size()) {
        if (auto e = eps_star(ext, *limits, t, eps_table[t])) rec.eps_star = *e;
      }
      a.metrics.push_back(rec);
      break;
    }

    engine.tick();
    const auto& last = engine.last_tick();

    if (tracker) {
      const double e = eps_star(ext, *limits, t, eps_table[t]).value_or(kNaN);
      const double scaled = e * static_cast<double>(std::max<std::size_t>(t, 1));
      in.eps_star_scaled_min = std::min(in.eps_star_scaled_min, scaled);
      in.eps_star_scaled_max = std::max(in.eps_star_scaled_max, scaled);
      in.eps_star_sum += e;
      if (record) {
        rec.eps_star = e;
        sum_eps_grad2 += e * rec.grad_norm_star * rec.grad_norm_star;
        const QuantizerVec dm1 = delta_m1(ext, *limits, t, eps_table[t], versions, h_star, a.reference);
        std::vector<std::vector<double>> samples(m);
        for (std::size_t j = 0; j < m; ++j) samples[j] = last[j].z;
        QuantizerVec dm2 = delta_m2(ext, *limits, t, eps_table[t], versions, samples, a.reference);
        sum_dm1 += dm1.norm();
        dm2_partial += dm2;
        rec.sum_eps_grad2 = sum_eps_grad2;
        rec.sum_dm1 = sum_dm1;
        rec.dm2_partial_norm = dm2_partial.norm();
        in.dm2_ticks.push_back(t);
        in.dm2_samples.push_back(std::move(dm2));
      }
      std::vector<QuantizerVec> descents(m);
      for (std::size_t j = 0; j < m; ++j) descents[j] = last[j].s;
      tracker->advance(descents);
    }
    if (theta) theta->advance();
    if (record) a.metrics.push_back(rec);
  }

  if (horizon == 0) {
    in.eps_star_scaled_min = in.eps_star_scaled_max = 0.0;
  }
  a.final_versions = engine.versions();
  if (tracker) a.final_star = tracker->value();
  a.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return a;
}

} // namespace

RunArtifacts run_on_schedule(const RunConfig& config, const CommSchedule& schedule,
                             const std::optional<CommSchedule>& extended) {
  return run_impl(config, schedule, extended ? &*extended : nullptr, std::nullopt, 0);
}

RunArtifacts run(const RunConfig& config) {
  check_run_config(config);
  return run(config, config.horizon > 0 ? generate(config.schedule, config.processors, config.horizon)
                                        : CommSchedule(config.processors, 0));
}

RunArtifacts run(const RunConfig& config, CommSchedule schedule) {
  check_run_config(config);
  const std::size_t horizon = config.horizon;
  const std::size_t m = config.processors;
  if (!config.diagnostics) return run_impl(config, schedule, nullptr, std::nullopt, 0);

  // Extend the schedule past the horizon until every limit phi^j(tau), tau <= T, is resolved.
  std::optional<CommSchedule> extended;
  std::optional<PhiLimits> limits;
  std::size_t used_tail = 0;
  for (std::size_t tail = kFirstPhiTail; tail <= kMaxPhiTail; tail *= 2) {
    CommSchedule candidate;
    try {
      candidate = generate(config.schedule, m, horizon + 1 + tail);
    } catch (const ConfigError&) {
      if (config.schedule.topology != Topology::CustomTrace) throw;
      // A trace cannot be extended: use all of it.
      CommSchedule full = read_trace_jsonl_file(config.schedule.trace_path);
      if (full.horizon() > horizon) {
        limits = phi_limits_for_run(full, horizon);
        used_tail = full.horizon() - horizon;
        extended = std::move(full);
      }
      break;
    }
    limits = phi_limits_for_run(candidate, horizon);
    extended = std::move(candidate);
    used_tail = tail;
    if (limits->converged && limits->resolved_through(static_cast<long>(horizon))) break;
  }
  return run_impl(config, schedule, extended ? &*extended : nullptr, limits, used_tail);
}

} // namespace dalvq
