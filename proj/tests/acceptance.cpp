// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include "dalvq/artifacts.hpp"
#include "dalvq/baselines.hpp"
#include "dalvq/diagnostics.hpp"
#include "dalvq/engine.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace dalvq;

namespace {

// Tolerances and limits, pinned.
constexpr double kGradRelTol = 1e-6;
constexpr double kBisectorMargin = 1e-4;  // times diam
constexpr double kReconstructTol = 1e-10;
constexpr double kSpreadTol = 1e-9;
constexpr double kConsensusFraction = 1e-2;  // times diam
constexpr double kGradRatio = 0.10;
constexpr double kCauchyFraction = 0.01;
constexpr double kThetaSmall = 1e-6;  // rho <= 0.5
constexpr double kThetaLarge = 1e-3;  // rho = 0.9
constexpr double kThetaCauchy = 1e-6;  // share of the last tenth of the range
constexpr double kLloydFactor = 1.05;  // first validated run: 1.0056

// Runtime limits in seconds.
constexpr double kLimit1 = 10, kLimit2 = 30, kLimit3 = 5, kLimit4 = 180, kLimit6 = 5, kLimit7 = 30;

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

DistributionSpec unit_box() {
  DistributionSpec d;
  d.dim = 2;
  d.lower = {0.0, 0.0};
  d.upper = {1.0, 1.0};
  return d;
}

RunConfig acceptance_config() {
  RunConfig c;
  c.processors = 4;
  c.kappa = 10;
  c.dim = 2;
  c.horizon = 200000;
  c.distribution = unit_box();
  c.schedule.topology = Topology::Ring;
  c.schedule.delay_law = DelayLaw::Uniform;
  c.schedule.b1 = 5;
  c.schedule.activity = ActivityLaw::RoundRobin;
  c.schedule.seed = 1;
  c.steps.mode = StepMode::LocalClock;
  c.steps.c = 80.0;
  c.steps.eps_max = 0.5;
  c.seed = 1;
  c.n_ref = 5000;
  c.cadence = 10;
  c.sampling = SampleMode::ReplayFromBatch;
  return c;
}

ScheduleSpec consensus_spec(Topology topo, std::size_t b1) {
  ScheduleSpec s;
  s.topology = topo;
  s.delay_law = b1 > 1 ? DelayLaw::Uniform : DelayLaw::Zero;
  s.b1 = b1;
  s.activity = ActivityLaw::None;
  s.seed = 3;
  return s;
}

Outcome gradient() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const SampleBatch b = make_batch(unit_box(), 11, 2000);
  const double margin = kBisectorMargin * b.diameter;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t checked = 0, attempts = 0;
  double worst = 0.0;
  while (checked < 100 && attempts < 20000) {
    ++attempts;
    std::vector<double> c(10);
    for (auto& x : c) x = u(rng);
    const QuantizerVec w(5, 2, c);
    if (min_component_separation(w) <= 0.0) continue;
    bool clear = true;
    for (std::size_t i = 0; i < b.size() && clear; ++i) {
      const std::size_t l = nearest_cell(b.point(i), w);
      for (std::size_t k = 0; k < w.kappa() && clear; ++k) {
        if (k == l) continue;
        const double gap = squared_distance(b.point(i), w.point(k)) - squared_distance(b.point(i), w.point(l));
        clear = gap / (2.0 * distance(w.point(k), w.point(l))) >= margin;
      }
    }
    if (!clear) continue;
    // The step stays below the margin, so no sample changes cell and the difference is exact.
    const double step = 1e-5;
    const QuantizerVec h = empirical_h(w, b);
    QuantizerVec fd(5, 2);
    for (std::size_t k = 0; k < w.coords().size(); ++k) {
      QuantizerVec up = w, down = w;
      up.coords()[k] += step;
      down.coords()[k] -= step;
      fd.coords()[k] = (empirical_distortion(up, b) - empirical_distortion(down, b)) / (2 * step);
    }
    QuantizerVec diff = fd;
    diff.add_scaled(-1.0, h);
    worst = std::max(worst, diff.norm() / h.norm());
    ++checked;
  }
  const double secs = seconds_since(start);
  o.require(checked == 100, std::to_string(checked) + " quantizers checked");
  o.require(worst < kGradRelTol, "max relative error " + fmt(worst));
  o.require(secs < kLimit1, "runtime " + fmt(secs) + " s");
  return o;
}

Outcome reconstruction() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  constexpr std::size_t horizon = 500, m = 3;
  ScheduleSpec spec = consensus_spec(Topology::Ring, 3);
  spec.activity = ActivityLaw::RoundRobin;
  const CommSchedule s = generate(spec, m, horizon);
  o.require(validate(s).all_hold(), "schedule validated");
  const DistributionSpec box = unit_box();
  std::vector<QuantizerVec> init;
  for (std::uint32_t i = 0; i < m; ++i) init.push_back(init_quantizer(box, 7, 2, 0x80000000u + i));
  StepPolicy steps;
  steps.c = 4.0;
  DalvqEngine e(s, init, SampleSource::fresh(box), steps, 7);
  const auto phi = phi_history(s, horizon);
  std::vector<std::vector<QuantizerVec>> descents;
  double worst = 0.0;
  for (std::size_t t = 1; t <= horizon; ++t) {
    e.tick();
    std::vector<QuantizerVec> row;
    for (const auto& d : e.last_tick()) row.push_back(d.s);
    descents.push_back(std::move(row));
    const auto versions = e.versions();
    for (std::size_t i = 0; i < m; ++i) {
      QuantizerVec sum(2, 2);
      for (std::size_t j = 0; j < m; ++j) {
        sum.add_scaled(phi[t](i, j, -1), init[j]);
        for (std::size_t tau = 0; tau < t; ++tau) sum.add_scaled(phi[t](i, j, static_cast<long>(tau)), descents[tau][j]);
      }
      for (std::size_t k = 0; k < sum.coords().size(); ++k) {
        worst = std::max(worst, std::abs(sum.coords()[k] - versions[i].coords()[k]));
      }
    }
  }
  const double secs = seconds_since(start);
  o.require(worst < kReconstructTol, "max deviation " + fmt(worst));
  o.require(secs < kLimit2, "runtime " + fmt(secs) + " s");
  return o;
}

Outcome agreement() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const std::pair<const char*, ScheduleSpec> cases[] = {
      {"complete", consensus_spec(Topology::Complete, 1)},
      {"ring", consensus_spec(Topology::Ring, 3)},
  };
  for (const auto& [name, spec] : cases) {
    const CommSchedule s = generate(spec, 4, 500);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<QuantizerVec> init;
    for (int i = 0; i < 4; ++i) {
      std::vector<double> c(4);
      for (auto& x : c) x = u(rng);
      init.emplace_back(2, 2, c);
    }
    VersionHistory h(init, spec.b1);
    std::vector<double> xs, ys;
    std::size_t hit = 0;
    for (std::size_t t = 0; t < 500; ++t) {
      agreement_step(h, s, t);
      const double spread = max_spread(h.current_all());
      if (spread < kSpreadTol && hit == 0) hit = t + 1;
      if (spread > 0.0) {
        xs.push_back(static_cast<double>(t + 1));
        ys.push_back(std::log(spread));
      }
    }
    const bool exact = xs.size() < 2;
    const double slope = exact ? -INFINITY : ls_slope(xs, ys);
    const double rho = std::exp(slope);
    o.require(hit > 0, std::string(name) + ": spread < 1e-9 at tick " + std::to_string(hit));
    o.require(slope < 0.0 && rho < 1.0, std::string(name) + ": rho " + fmt(rho));
  }
  const double secs = seconds_since(start);
  o.require(secs < kLimit3, "runtime " + fmt(secs) + " s");
  return o;
}

Outcome reductions() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  {
    ScheduleSpec spec;
    spec.topology = Topology::Complete;
    spec.activity = ActivityLaw::AllActive;
    const CommSchedule s = generate(spec, 1, 10000);
    const DistributionSpec box = unit_box();
    const SampleBatch batch = make_batch(box, 5, 5000);
    const QuantizerVec w0 = init_quantizer(box, 5, 10);
    StepPolicy steps;
    steps.c = 80.0;
    DalvqEngine e(s, {w0}, SampleSource::replay(batch), steps, 5);
    const ClvqRun ref = run_clvq(w0, SampleSource::replay(batch), steps, 5, 10000, true);
    std::size_t mismatch = 0;
    for (std::size_t t = 1; t <= 10000; ++t) {
      e.tick();
      if (!(e.versions()[0] == ref.trajectory[t])) ++mismatch;
    }
    o.require(mismatch == 0, "M=1 vs clvq: " + std::to_string(mismatch) + " differing ticks of 10000");
  }
  {
    const RunConfig c = acceptance_config();
    const CommSchedule s = generate(c.schedule, 4, 10000);
    std::vector<QuantizerVec> init;
    for (std::uint32_t i = 0; i < 4; ++i) init.push_back(init_quantizer(c.distribution, 9, 10, 0x80000000u + i));
    DalvqEngine e(s, init, SampleSource::fresh(c.distribution), c.steps, 9);
    e.set_descent_enabled(false);
    VersionHistory h(init, c.schedule.b1);
    std::size_t mismatch = 0;
    for (std::size_t t = 0; t < 10000; ++t) {
      e.tick();
      agreement_step(h, s, t);
      if (!(e.versions() == h.current_all())) ++mismatch;
    }
    o.require(mismatch == 0, "zero descent vs agreement: " + std::to_string(mismatch) + " differing ticks of 10000");
  }
  const double secs = seconds_since(start);
  o.require(secs < kLimit6, "runtime " + fmt(secs) + " s");
  return o;
}

Outcome theta_analytics(const ConvergenceReport& r) {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  constexpr std::size_t t_max = 1000000;
  for (double rho : {0.3, 0.5, 0.9}) {
    ThetaSeries s(rho);
    double total = 0.0, before_decade = 0.0;
    while (s.t() < t_max) {
      s.advance();
      total += s.value() / static_cast<double>(s.t());
      if (s.t() == t_max - t_max / 10) before_decade = total;
    }
    const double limit = rho <= 0.5 ? kThetaSmall : kThetaLarge;
    o.require(s.value() < limit, "theta_1e6(" + fmt(rho) + ") = " + fmt(s.value()));
    const double tail = (total - before_decade) / total;
    o.require(tail < kThetaCauchy, "sum theta_t/t last-tenth share " + fmt(tail) + " (rho " + fmt(rho) + ")");
  }
  o.require(r.eps_star_within_bounds(), "eps* (t v 1) in [" + fmt(r.eps_star_scaled_min) + ", " + fmt(r.eps_star_scaled_max) +
                                            "] within [" + fmt(r.eps_star_lower) + ", " + fmt(r.eps_star_upper) + "]");
  o.require(r.eps_star_diverges(), "sum eps* " + fmt(r.eps_star_sum) + " >= " + fmt(r.eps_star_sum_floor));
  const double secs = seconds_since(start);
  o.require(secs < kLimit7, "runtime " + fmt(secs) + " s");
  return o;
}

void print(int n, const Outcome& o, int& failures) {
  if (!o.pass) ++failures;
  std::printf("[%s] criterion %d: %s\n", o.pass ? "PASS" : "FAIL", n, o.detail.c_str());
  std::fflush(stdout);
}

std::string metrics_bytes(const RunArtifacts& a) {
  std::ostringstream s;
  write_metrics_csv(a.metrics, s);
  return s.str();
}

} // namespace

int main() {
  int failures = 0;
  print(1, gradient(), failures);
  print(2, reconstruction(), failures);
  print(3, agreement(), failures);

  const RunConfig config = acceptance_config();
  const auto start = std::chrono::steady_clock::now();
  RunArtifacts a = run(config);
  const double run_secs = seconds_since(start);
  const LloydState lloyd = run_lloyd(a.initial.front(), a.reference);
  a.summary_inputs.lloyd_distortion = lloyd.distortion;
  const ConvergenceReport r = summarize(a.metrics, a.summary_inputs);
  const double diam = a.reference.diameter;

  {
    Outcome o;
    o.require(a.validation.all_hold(), "schedule validated");
    o.require(a.phi.available, "phi limits resolved, rho_hat " + fmt(a.phi.rho_hat));
    o.require(r.final_consensus_gap < kConsensusFraction * diam, "final consensus gap " + fmt(r.final_consensus_gap));
    o.require(r.normmaj_holds(), std::to_string(r.normmaj_violations) + " ticks above the agreement bound, max ratio " +
                                     fmt(r.normmaj_max_ratio));
    o.require(run_secs < kLimit4, "runtime " + fmt(run_secs) + " s");
    print(4, o, failures);
  }
  {
    Outcome o;
    o.require(r.grad_ratio < kGradRatio, "grad norm ratio " + fmt(r.grad_ratio));
    o.require(r.distortion_last_quarter < r.distortion_first_quarter,
              "distortion quarters " + fmt(r.distortion_first_quarter) + " -> " + fmt(r.distortion_last_quarter));
    o.require(r.cauchy_ratio < kCauchyFraction, "last-quarter share " + fmt(r.cauchy_ratio));
    print(5, o, failures);
  }
  print(6, reductions(), failures);
  print(7, theta_analytics(r), failures);
  {
    Outcome o;
    o.require(r.dm2_used >= 10000, std::to_string(r.dm2_used) + " sampled ticks");
    o.require(r.dm2_centered(), "mean norm " + fmt(r.dm2_mean_norm) + " vs std " + fmt(r.dm2_std));
    o.require(r.dm2_bounded(), "max partial norm " + fmt(r.dm2_max_partial_norm) + " <= " + fmt(r.dm2_envelope));
    print(8, o, failures);
  }
  {
    Outcome o;
    const double ratio = r.ratio_to_lloyd.value_or(INFINITY);
    o.require(ratio <= kLloydFactor, "distortion ratio to lloyd " + fmt(ratio));
    print(9, o, failures);
  }
  {
    Outcome o;
    const RunArtifacts again = run(config);
    o.require(metrics_bytes(a) == metrics_bytes(again), "metrics.csv byte-identical on rerun");
    print(10, o, failures);
  }
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
