#include "dalvq/errors.hpp"
#include "dalvq/measures.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace dalvq;

TEST_CASE("philox matches the reference known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("uniform draws lie in [0, 1)") {
  DrawUniforms u(StreamHandle{9, 0, 0});
  for (int k = 0; k < 10000; ++k) {
    const double x = u.next();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
}

TEST_CASE("sampling is replayable and advances the counter by one") {
  const auto spec = test::unit_box();
  StreamHandle a{42, 3, 17};
  StreamHandle b = a;
  const auto p = sample(spec, a);
  const auto q = sample(spec, b);
  CHECK(p == q);
  CHECK(a.counter == 18);
  CHECK(sample(spec, a) != p);
}

TEST_CASE("every sample lies in the support") {
  DistributionSpec mix = test::unit_box();
  mix.kind = DistributionKind::TruncatedGaussianMixture;
  mix.components = {{0.3, {0.2, 0.2}, {{0.05, 0.0}, {0.0, 0.05}}}, {0.7, {0.9, 0.5}, {{0.2, 0.05}, {0.05, 0.1}}}};
  DistributionSpec disks;
  disks.kind = DistributionKind::UniformDiskUnion;
  disks.dim = 2;
  disks.disks = {{{0.0, 0.0}, 1.0}, {{3.0, 0.0}, 0.5}};
  for (const auto& spec : {test::unit_box(), mix, disks}) {
    StreamHandle s{1, 0, 0};
    for (int k = 0; k < 5000; ++k) REQUIRE(in_support(spec, sample(spec, s)));
  }
  CHECK_FALSE(validate_distribution(disks).convex);
  CHECK(validate_distribution(disks).diameter == doctest::Approx(4.5));
}

TEST_CASE("truncated mixture mean agrees with an independent rejection sampler") {
  DistributionSpec mix = test::unit_box();
  mix.kind = DistributionKind::TruncatedGaussianMixture;
  mix.components = {{0.4, {0.1, 0.3}, {{0.04, 0.01}, {0.01, 0.09}}}, {0.6, {0.7, 0.8}, {{0.02, 0.0}, {0.0, 0.02}}}};
  const std::size_t n = 100000;
  double sum[2] = {0, 0}, sq[2] = {0, 0};
  StreamHandle s{7, 0, 0};
  for (std::size_t k = 0; k < n; ++k) {
    const auto p = sample(mix, s);
    for (int c = 0; c < 2; ++c) {
      sum[c] += p[c];
      sq[c] += p[c] * p[c];
    }
  }
  // Oracle: pick a component, draw through its Cholesky factor, reject outside the box.
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  const double l0[2][2] = {{0.2, 0.0}, {0.05, std::sqrt(0.09 - 0.0025)}};
  const double l1[2][2] = {{std::sqrt(0.02), 0.0}, {0.0, std::sqrt(0.02)}};
  const std::size_t m = 4000000;
  double ref[2] = {0, 0};
  for (std::size_t k = 0; k < m;) {
    const bool first = u(rng) < 0.4;
    const auto& l = first ? l0 : l1;
    const double e0 = g(rng), e1 = g(rng);
    const double x = (first ? 0.1 : 0.7) + l[0][0] * e0;
    const double y = (first ? 0.3 : 0.8) + l[1][0] * e0 + l[1][1] * e1;
    if (x < 0 || x > 1 || y < 0 || y > 1) continue;
    ref[0] += x;
    ref[1] += y;
    ++k;
  }
  for (int c = 0; c < 2; ++c) {
    const double mean = sum[c] / n;
    const double sd = std::sqrt(sq[c] / n - mean * mean);
    CHECK(std::abs(mean - ref[c] / m) < 3.0 * sd / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("processor streams are uncorrelated") {
  const auto spec = test::unit_box();
  StreamHandle a{5, 1, 0}, b{5, 2, 0};
  const int n = 100000;
  double sa[2] = {}, sb[2] = {}, saa[2] = {}, sbb[2] = {}, sab[2][2] = {};
  for (int k = 0; k < n; ++k) {
    const auto p = sample(spec, a), q = sample(spec, b);
    for (int c = 0; c < 2; ++c) {
      sa[c] += p[c];
      sb[c] += q[c];
      saa[c] += p[c] * p[c];
      sbb[c] += q[c] * q[c];
      for (int e = 0; e < 2; ++e) sab[c][e] += p[c] * q[e];
    }
  }
  for (int c = 0; c < 2; ++c) {
    for (int e = 0; e < 2; ++e) {
      const double cov = sab[c][e] / n - (sa[c] / n) * (sb[e] / n);
      const double va = saa[c] / n - (sa[c] / n) * (sa[c] / n);
      const double vb = sbb[e] / n - (sb[e] / n) * (sb[e] / n);
      CHECK(std::abs(cov / std::sqrt(va * vb)) < 0.02);
    }
  }
}

TEST_CASE("invalid specs are configuration errors") {
  DistributionSpec d;
  d.kind = DistributionKind::UniformDiskUnion;
  d.disks = {{{0.0, 0.0}, -1.0}};
  CHECK_THROWS_AS(validate_distribution(d), ConfigError);
  DistributionSpec mix = test::unit_box();
  mix.kind = DistributionKind::TruncatedGaussianMixture;
  mix.components = {{1.0, {0.5, 0.5}, {{1.0, 2.0}, {2.0, 1.0}}}};
  CHECK_THROWS_AS(validate_distribution(mix), ConfigError);
  mix.components = {{0.5, {0.5, 0.5}, {{1.0, 0.0}, {0.0, 1.0}}}};
  CHECK_THROWS_AS(validate_distribution(mix), ConfigError);
  DistributionSpec box = test::unit_box();
  box.upper = {1.0, -1.0};
  CHECK_THROWS_AS(validate_distribution(box), ConfigError);
}

TEST_CASE("batches") {
  const auto spec = test::unit_box();
  CHECK(make_batch(spec, 1, 1).size() == 1);
  CHECK_THROWS_AS(make_batch(spec, 1, 0), UsageError);
  const auto a = make_batch(spec, 3, 1000);
  const auto b = make_batch(spec, 3, 1000);
  CHECK(a.points == b.points);
  CHECK(a.diameter == doctest::Approx(std::sqrt(2.0)));
  CHECK(make_batch(spec, 4, 1000).points != a.points);
}

TEST_CASE("initial quantizers are interior, parted and replayable") {
  const auto spec = test::unit_box();
  const auto one = init_quantizer(spec, 1, 1);
  CHECK(in_support_interior(spec, one.point(0)));
  const auto w = init_quantizer(spec, 8, 50);
  CHECK(w.is_parted(1e-6 * std::sqrt(2.0)));
  for (std::size_t l = 0; l < 50; ++l) CHECK(in_support_interior(spec, w.point(l)));
  CHECK(init_quantizer(spec, 8, 50) == w);
  CHECK_THROWS_AS(init_quantizer(spec, 1, 0), UsageError);
}

TEST_CASE("replay sources draw from the batch") {
  const auto batch = make_batch(test::unit_box(), 2, 50);
  const auto src = SampleSource::replay(batch);
  CHECK(src.is_replay());
  StreamHandle s{2, 0, 0};
  for (int k = 0; k < 200; ++k) {
    const auto z = src.draw(s);
    bool found = false;
    for (std::size_t i = 0; i < batch.size() && !found; ++i) found = batch.point(i)[0] == z[0] && batch.point(i)[1] == z[1];
    REQUIRE(found);
  }
  CHECK(s.counter == 200);
}
