#include "dalvq/baselines.hpp"

#include "dalvq/errors.hpp"

#include <cmath>

namespace dalvq {

std::string to_string(StepMode m) { return m == StepMode::GlobalClock ? "global-clock" : "local-clock"; }

StepMode step_mode_from_string(const std::string& s) {
  if (s == "global-clock") return StepMode::GlobalClock;
  if (s == "local-clock") return StepMode::LocalClock;
  throw ConfigError("unknown step mode '" + s + "'");
}

QuantizerVec clvq_step(const QuantizerVec& w, std::span<const double> z, double eps) {
  const std::size_t l = nearest_cell(z, w);
  QuantizerVec out = w;
  auto p = out.point(l);
  // w + eps (z - w): the homothety (1 - eps) w + eps z in the form the engine's
  // w + s with s = -eps (w - z) reproduces bit for bit.
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = p[k] + eps * (z[k] - p[k]);
  return out;
}

QuantizerVec lloyd_step(const QuantizerVec& w, const SampleBatch& batch) {
  if (batch.empty()) throw UsageError("lloyd_step: empty batch");
  const std::size_t d = w.dim();
  std::vector<double> sum(w.kappa() * d, 0.0);
  std::vector<std::size_t> count(w.kappa(), 0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto z = batch.point(i);
    const std::size_t l = nearest_cell(z, w);
    ++count[l];
    for (std::size_t k = 0; k < d; ++k) sum[l * d + k] += z[k];
  }
  QuantizerVec out = w;
  for (std::size_t l = 0; l < w.kappa(); ++l) {
    if (count[l] == 0) continue;
    auto p = out.point(l);
    for (std::size_t k = 0; k < d; ++k) p[k] = sum[l * d + k] / static_cast<double>(count[l]);
  }
  return out;
}

LloydState run_lloyd(const QuantizerVec& w0, const SampleBatch& batch, std::size_t max_iterations, double tolerance,
                     bool keep_trajectory) {
  LloydState s{w0, 0, empirical_distortion(w0, batch), {}, {}};
  s.distortion_history.push_back(s.distortion);
  if (keep_trajectory) s.trajectory.push_back(w0);
  while (s.iterations < max_iterations) {
    QuantizerVec next = lloyd_step(s.w, batch);
    const double d = empirical_distortion(next, batch);
    s.w = std::move(next);
    ++s.iterations;
    const double change = std::abs(s.distortion - d) / std::max(s.distortion, 1e-300);
    s.distortion = d;
    s.distortion_history.push_back(d);
    if (keep_trajectory) s.trajectory.push_back(s.w);
    if (change < tolerance) break;
  }
  return s;
}

ClvqRun run_clvq(const QuantizerVec& w0, const SampleSource& source, const StepPolicy& steps, std::uint64_t seed,
                 std::size_t horizon, bool keep_trajectory) {
  ClvqRun run{w0, {}, StreamHandle{seed, 0, 0}};
  if (keep_trajectory) run.trajectory.push_back(w0);
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto z = source.draw(run.stream);
    run.final = clvq_step(run.final, z, steps.at(t, t + 1));
    if (keep_trajectory) run.trajectory.push_back(run.final);
  }
  return run;
}

} // namespace dalvq
