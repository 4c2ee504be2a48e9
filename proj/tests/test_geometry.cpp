#include "dalvq/errors.hpp"
#include "dalvq/geometry.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace dalvq;

namespace {

SampleBatch batch_of(std::size_t dim, std::vector<double> pts) {
  SampleBatch b;
  b.dim = dim;
  b.points = std::move(pts);
  b.bounds = {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
  b.diameter = std::sqrt(static_cast<double>(dim));
  return b;
}

// Plain recomputation: (1/2n) sum_i min_l |z_i - w_l|^2.
double brute_distortion(const QuantizerVec& w, const SampleBatch& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < w.kappa(); ++l) {
      double d = 0.0;
      for (std::size_t k = 0; k < b.dim; ++k) d += (b.points[i * b.dim + k] - w.point(l)[k]) * (b.points[i * b.dim + k] - w.point(l)[k]);
      best = std::min(best, d);
    }
    total += best;
  }
  return 0.5 * total / static_cast<double>(b.size());
}

} // namespace

TEST_CASE("quantizer shape and arithmetic") {
  CHECK_THROWS_AS(QuantizerVec(2, 2, {1.0, 2.0, 3.0}), UsageError);
  CHECK_THROWS_AS(QuantizerVec(1, 2, {1.0, std::nan("")}), UsageError);
  QuantizerVec a(2, 1, {1.0, 2.0});
  QuantizerVec b(2, 1, {0.5, -1.0});
  QuantizerVec c = a;
  c.add_scaled(2.0, b);
  CHECK(c == QuantizerVec(2, 1, {2.0, 0.0}));
  CHECK((a - b) == QuantizerVec(2, 1, {0.5, 3.0}));
  CHECK(a.norm() == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("nearest cell resolves ties and duplicates to the smallest index") {
  QuantizerVec w(3, 1, {0.0, 1.0, 1.0});
  const double mid[] = {0.5};
  CHECK(nearest_cell(mid, w) == 0);
  const double dup[] = {1.0};
  CHECK(nearest_cell(dup, w) == 1);
}

TEST_CASE("observation H moves only the winner") {
  QuantizerVec w(2, 2, {0.0, 0.0, 1.0, 1.0});
  const double z[] = {0.9, 0.8};
  const QuantizerVec h = observation_H(z, w);
  CHECK(h.point(0)[0] == 0.0);
  CHECK(h.point(1)[0] == doctest::Approx(0.1));
  CHECK(h.point(1)[1] == doctest::Approx(0.2));
}

TEST_CASE("empirical distortion matches brute force") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> pts(300 * 2);
  for (auto& x : pts) x = u(rng);
  const SampleBatch b = batch_of(2, pts);
  for (int rep = 0; rep < 20; ++rep) {
    const QuantizerVec w = test::random_quantizer(rng, 4, 2);
    CHECK(empirical_distortion(w, b) == doctest::Approx(brute_distortion(w, b)).epsilon(1e-13));
    const auto both = empirical_distortion_and_h(w, b);
    CHECK(both.distortion == empirical_distortion(w, b));
    CHECK(both.h == empirical_h(w, b));
  }
}

TEST_CASE("cell counts sum to n") {
  std::mt19937_64 rng(3);
  std::vector<double> pts(100);
  for (auto& x : pts) x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const SampleBatch b = batch_of(1, pts);
  const auto counts = cell_counts(test::random_quantizer(rng, 5, 1), b);
  std::size_t total = 0;
  for (auto c : counts) total += c;
  CHECK(total == 100);
}

TEST_CASE("h is the gradient of the distortion away from cell boundaries") {
  // Oracle: central differences. Quantizers are kept only when every sample is well
  // inside its cell, so the distortion is quadratic around w and the difference is exact.
  std::mt19937_64 rng(5);
  std::vector<double> pts(400 * 2);
  for (auto& x : pts) x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const SampleBatch b = batch_of(2, pts);
  int checked = 0;
  for (int attempt = 0; attempt < 2000 && checked < 10; ++attempt) {
    const QuantizerVec w = test::random_quantizer(rng, 3, 2);
    bool clear = true;
    for (std::size_t i = 0; i < b.size() && clear; ++i) {
      const std::size_t l = nearest_cell(b.point(i), w);
      for (std::size_t k = 0; k < w.kappa(); ++k) {
        if (k == l) continue;
        const double gap = squared_distance(b.point(i), w.point(k)) - squared_distance(b.point(i), w.point(l));
        if (gap / (2.0 * distance(w.point(k), w.point(l))) < 1e-3) clear = false;
      }
    }
    if (!clear) continue;
    const QuantizerVec h = empirical_h(w, b);
    const double step = 1e-6;
    for (std::size_t c = 0; c < w.coords().size(); ++c) {
      QuantizerVec up = w, down = w;
      up.coords()[c] += step;
      down.coords()[c] -= step;
      const double fd = (empirical_distortion(up, b) - empirical_distortion(down, b)) / (2 * step);
      CHECK(fd == doctest::Approx(h.coords()[c]).epsilon(1e-6).scale(1e-3));
    }
    ++checked;
  }
  CHECK(checked == 10);
}

TEST_CASE("component separation") {
  CHECK(std::isinf(min_component_separation(QuantizerVec(1, 2, {0.3, 0.3}))));
  const QuantizerVec w(3, 1, {0.0, 0.25, 1.0});
  CHECK(min_component_separation(w) == 0.25);
  CHECK(w.is_parted(0.2));
  CHECK_FALSE(w.is_parted(0.3));
}

TEST_CASE("bounding box") {
  BoundingBox box{{0.0, 0.0}, {3.0, 4.0}};
  CHECK(box.diagonal() == 5.0);
  const double in[] = {3.0, 0.0};
  const double out[] = {3.1, 0.0};
  CHECK(box.contains(in));
  CHECK_FALSE(box.contains(out));
}
