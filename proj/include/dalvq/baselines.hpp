#pragma once

// Reference algorithms: single-processor online CLVQ and batch Lloyd iterations.

#include "dalvq/geometry.hpp"
#include "dalvq/measures.hpp"
#include "dalvq/steps.hpp"

#include <cstdint>
#include <vector>

namespace dalvq {

/// Moves the winning prototype to (1 - eps) w_l + eps z; the others are untouched.
QuantizerVec clvq_step(const QuantizerVec& w, std::span<const double> z, double eps);

/// Centroid update; empty cells keep their prototype.
QuantizerVec lloyd_step(const QuantizerVec& w, const SampleBatch& batch);

struct LloydState {
  QuantizerVec w;
  std::size_t iterations = 0;
  double distortion = 0.0;
  std::vector<double> distortion_history;  // index k: after k iterations
  std::vector<QuantizerVec> trajectory;    // iterates 0..iterations when requested
};

/// Iterates until the relative distortion change drops below `tolerance`.
LloydState run_lloyd(const QuantizerVec& w0, const SampleBatch& batch, std::size_t max_iterations = 1000,
                     double tolerance = 1e-10, bool keep_trajectory = false);

struct ClvqRun {
  QuantizerVec final;
  std::vector<QuantizerVec> trajectory;  // w(0..T) when requested
  StreamHandle stream;
};

/// T iterations of online CLVQ drawing from stream (seed, 0), step eps_{t+1} = steps.at(t, t + 1).
ClvqRun run_clvq(const QuantizerVec& w0, const SampleSource& source, const StepPolicy& steps, std::uint64_t seed,
                 std::size_t horizon, bool keep_trajectory = false);

} // namespace dalvq
