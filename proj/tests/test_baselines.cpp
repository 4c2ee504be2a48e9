#include "dalvq/baselines.hpp"
#include "dalvq/errors.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace dalvq;

TEST_CASE("clvq step") {
  const double z[] = {1.0, 1.0};
  CHECK(clvq_step(QuantizerVec(1, 2, {0.0, 0.0}), z, 0.5) == QuantizerVec(1, 2, {0.5, 0.5}));

  const QuantizerVec w(2, 2, {0.2, 0.3, 0.8, 0.9});
  const double on_winner[] = {0.2, 0.3};
  CHECK(clvq_step(w, on_winner, 0.3) == w);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const QuantizerVec v = test::random_quantizer(rng, 4, 2);
    const double p[] = {u(rng), u(rng)};
    const double eps = u(rng) * 0.99 + 0.005;
    const std::size_t l = nearest_cell(p, v);
    const QuantizerVec next = clvq_step(v, p, eps);
    for (std::size_t k = 0; k < 4; ++k) {
      if (k != l) CHECK(next.point(k)[0] == v.point(k)[0]);
    }
    // the moved component sits on [w_l, z] at fraction eps
    for (std::size_t c = 0; c < 2; ++c) {
      const double expect = (1 - eps) * v.point(l)[c] + eps * p[c];
      CHECK(next.point(l)[c] == doctest::Approx(expect).epsilon(1e-14));
      CHECK(next.point(l)[c] >= std::min(v.point(l)[c], p[c]) - 1e-15);
      CHECK(next.point(l)[c] <= std::max(v.point(l)[c], p[c]) + 1e-15);
    }
  }
}

TEST_CASE("lloyd step by hand") {
  SampleBatch b;
  b.dim = 1;
  b.points = {0.0, 0.4, 1.0};
  const QuantizerVec next = lloyd_step(QuantizerVec(2, 1, {0.2, 0.8}), b);
  CHECK(next.point(0)[0] == doctest::Approx(0.2));
  CHECK(next.point(1)[0] == 1.0);
  CHECK(lloyd_step(next, b) == next);
  CHECK_THROWS_AS(lloyd_step(next, SampleBatch{}), UsageError);
}

TEST_CASE("lloyd keeps empty cells and never increases distortion") {
  const auto batch = make_batch(test::unit_box(), 6, 800);
  QuantizerVec far(3, 2, {0.3, 0.3, 0.7, 0.7, 50.0, 50.0});
  CHECK(lloyd_step(far, batch).point(2)[0] == 50.0);

  const auto w0 = init_quantizer(test::unit_box(), 6, 8);
  const auto state = run_lloyd(w0, batch, 1000, 1e-10, true);
  CHECK(state.trajectory.size() == state.iterations + 1);
  for (std::size_t k = 1; k < state.distortion_history.size(); ++k) {
    CHECK(state.distortion_history[k] <= state.distortion_history[k - 1]);
  }
  CHECK(state.iterations < 1000);
}

TEST_CASE("clvq runs") {
  const auto spec = test::unit_box();
  const auto w0 = init_quantizer(spec, 2, 10);
  const auto src = SampleSource::fresh(spec);
  StepPolicy steps;
  steps.mode = StepMode::GlobalClock;
  steps.c = 1.0;
  CHECK(run_clvq(w0, src, steps, 2, 0).final == w0);
  const auto a = run_clvq(w0, src, steps, 2, 500, true);
  const auto b = run_clvq(w0, src, steps, 2, 500, true);
  CHECK(a.trajectory == b.trajectory);
  CHECK(a.trajectory.size() == 501);
  CHECK(a.stream.counter == 500);
  for (const auto& w : a.trajectory) CHECK(min_component_separation(w) > 0.0);
}

TEST_CASE("clvq drives the gradient down on the unit box") {
  // Regression threshold from the first validated run: |h(w(T))| < 5% of |h(w(0))|.
  const auto spec = test::unit_box();
  const auto batch = make_batch(spec, 1, 5000);
  const auto w0 = init_quantizer(spec, 1, 10);
  StepPolicy steps;
  steps.mode = StepMode::GlobalClock;
  steps.c = 20.0;
  const auto run = run_clvq(w0, SampleSource::replay(batch), steps, 1, 100000);
  CHECK(empirical_h(run.final, batch).norm() < 0.05 * empirical_h(w0, batch).norm());
}
