#include "dalvq/measures.hpp"

#include "dalvq/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace dalvq {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> philox_round(const std::array<std::uint32_t, 4>& c,
                                                 const std::array<std::uint32_t, 2>& k) {
  std::uint32_t hi0, lo0, hi1, lo1;
  mulhilo(kPhiloxM0, c[0], hi0, lo0);
  mulhilo(kPhiloxM1, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

constexpr int kMaxRejections = 1'000'000;

} // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    counter = philox_round(counter, key);
  }
  return counter;
}

double DrawUniforms::next() {
  if (used_ >= 4) {
    const std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(handle_.counter),
                                           static_cast<std::uint32_t>(handle_.counter >> 32),
                                           handle_.stream_id, block_++};
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(handle_.seed),
                                           static_cast<std::uint32_t>(handle_.seed >> 32)};
    buf_ = philox4x32_10(ctr, key);
    used_ = 0;
  }
  const std::uint64_t bits = (static_cast<std::uint64_t>(buf_[used_]) << 32) | buf_[used_ + 1];
  used_ += 2;
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

double standard_normal(DrawUniforms& u) {
  const double u1 = 1.0 - u.next();  // (0, 1]
  const double u2 = u.next();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string to_string(DistributionKind kind) {
  switch (kind) {
  case DistributionKind::UniformBox: return "uniform-box";
  case DistributionKind::TruncatedGaussianMixture: return "truncated-gaussian-mixture";
  case DistributionKind::UniformDiskUnion: return "uniform-disk-union";
  }
  return "?";
}

DistributionKind distribution_kind_from_string(const std::string& s) {
  if (s == "uniform-box") return DistributionKind::UniformBox;
  if (s == "truncated-gaussian-mixture") return DistributionKind::TruncatedGaussianMixture;
  if (s == "uniform-disk-union") return DistributionKind::UniformDiskUnion;
  throw ConfigError("unknown distribution kind '" + s + "'");
}

namespace {

void check_vector(const std::vector<double>& v, std::size_t dim, const std::string& what) {
  if (v.size() != dim) {
    throw ConfigError(what + ": expected " + std::to_string(dim) + " coordinates, got " + std::to_string(v.size()));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw ConfigError(what + ": non-finite coordinate");
  }
}

void check_box(const DistributionSpec& spec) {
  check_vector(spec.lower, spec.dim, "lower");
  check_vector(spec.upper, spec.dim, "upper");
  for (std::size_t k = 0; k < spec.dim; ++k) {
    if (!(spec.lower[k] < spec.upper[k])) throw ConfigError("box: lower must be < upper in every coordinate");
  }
}

Eigen::MatrixXd covariance_matrix(const GaussianComponent& c, std::size_t dim) {
  if (c.covariance.size() != dim) throw ConfigError("covariance: expected " + std::to_string(dim) + " rows");
  Eigen::MatrixXd m(dim, dim);
  for (std::size_t r = 0; r < dim; ++r) {
    if (c.covariance[r].size() != dim) throw ConfigError("covariance: expected square matrix");
    for (std::size_t k = 0; k < dim; ++k) m(r, k) = c.covariance[r][k];
  }
  if (!m.allFinite()) throw ConfigError("covariance: non-finite entry");
  if (!m.isApprox(m.transpose(), 1e-12)) throw ConfigError("covariance: matrix is not symmetric");
  return m;
}

std::vector<double> cholesky_factor(const GaussianComponent& c, std::size_t dim) {
  const Eigen::MatrixXd m = covariance_matrix(c, dim);
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw ConfigError("covariance: matrix is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  std::vector<double> out(dim * dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t k = 0; k < dim; ++k) out[r * dim + k] = l(r, k);
  return out;
}

double ball_volume_factor(double radius, std::size_t dim) { return std::pow(radius, static_cast<double>(dim)); }

} // namespace

SupportInfo validate_distribution(const DistributionSpec& spec) {
  if (spec.dim == 0) throw ConfigError("distribution: dim must be positive");
  SupportInfo info;
  switch (spec.kind) {
  case DistributionKind::UniformBox:
    check_box(spec);
    info.bounds = {spec.lower, spec.upper};
    info.diameter = info.bounds.diagonal();
    break;
  case DistributionKind::TruncatedGaussianMixture: {
    check_box(spec);
    if (spec.components.empty()) throw ConfigError("mixture: at least one component required");
    double total = 0.0;
    for (const auto& c : spec.components) {
      if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) throw ConfigError("mixture: weights must be nonnegative");
      check_vector(c.mean, spec.dim, "mixture mean");
      (void)cholesky_factor(c, spec.dim);
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture: weights must sum to 1");
    info.bounds = {spec.lower, spec.upper};
    info.diameter = info.bounds.diagonal();
    break;
  }
  case DistributionKind::UniformDiskUnion: {
    if (spec.disks.empty()) throw ConfigError("disk union: at least one disk required");
    info.bounds.lower.assign(spec.dim, std::numeric_limits<double>::infinity());
    info.bounds.upper.assign(spec.dim, -std::numeric_limits<double>::infinity());
    for (const auto& d : spec.disks) {
      check_vector(d.center, spec.dim, "disk center");
      if (!(d.radius > 0.0) || !std::isfinite(d.radius)) throw ConfigError("disk union: radius must be positive");
      for (std::size_t k = 0; k < spec.dim; ++k) {
        info.bounds.lower[k] = std::min(info.bounds.lower[k], d.center[k] - d.radius);
        info.bounds.upper[k] = std::max(info.bounds.upper[k], d.center[k] + d.radius);
      }
    }
    for (const auto& a : spec.disks) {
      for (const auto& b : spec.disks) {
        info.diameter = std::max(info.diameter, distance(a.center, b.center) + a.radius + b.radius);
      }
    }
    info.convex = false;
    break;
  }
  }
  const std::vector<double> origin(spec.dim, 0.0);
  info.contains_origin = in_support(spec, origin);
  return info;
}

bool in_support(const DistributionSpec& spec, std::span<const double> p) {
  if (p.size() != spec.dim) return false;
  if (spec.kind == DistributionKind::UniformDiskUnion) {
    return std::any_of(spec.disks.begin(), spec.disks.end(),
                       [&](const Disk& d) { return squared_distance(p, d.center) <= d.radius * d.radius; });
  }
  for (std::size_t k = 0; k < spec.dim; ++k) {
    if (p[k] < spec.lower[k] || p[k] > spec.upper[k]) return false;
  }
  return true;
}

bool in_support_interior(const DistributionSpec& spec, std::span<const double> p) {
  if (p.size() != spec.dim) return false;
  if (spec.kind == DistributionKind::UniformDiskUnion) {
    return std::any_of(spec.disks.begin(), spec.disks.end(),
                       [&](const Disk& d) { return squared_distance(p, d.center) < d.radius * d.radius; });
  }
  for (std::size_t k = 0; k < spec.dim; ++k) {
    if (!(p[k] > spec.lower[k] && p[k] < spec.upper[k])) return false;
  }
  return true;
}

Sampler::Sampler(DistributionSpec spec) : spec_(std::move(spec)), info_(validate_distribution(spec_)) {
  double acc = 0.0;
  if (spec_.kind == DistributionKind::TruncatedGaussianMixture) {
    for (const auto& c : spec_.components) {
      chol_.push_back(cholesky_factor(c, spec_.dim));
      acc += c.weight;
      cumulative_.push_back(acc);
    }
  } else if (spec_.kind == DistributionKind::UniformDiskUnion) {
    for (const auto& d : spec_.disks) {
      acc += ball_volume_factor(d.radius, spec_.dim);
      cumulative_.push_back(acc);
    }
  }
  if (!cumulative_.empty()) {
    for (double& c : cumulative_) c /= acc;
  }
}

namespace {

std::size_t pick(const std::vector<double>& cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

} // namespace

std::vector<double> Sampler::sample(StreamHandle& stream) const {
  DrawUniforms u(stream);
  ++stream.counter;
  const std::size_t d = spec_.dim;
  std::vector<double> p(d);
  switch (spec_.kind) {
  case DistributionKind::UniformBox:
    for (std::size_t k = 0; k < d; ++k) p[k] = spec_.lower[k] + u.next() * (spec_.upper[k] - spec_.lower[k]);
    return p;
  case DistributionKind::TruncatedGaussianMixture:
    for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
      const std::size_t c = pick(cumulative_, u.next());
      const auto& mean = spec_.components[c].mean;
      const auto& l = chol_[c];
      std::vector<double> n(d);
      for (double& x : n) x = standard_normal(u);
      for (std::size_t r = 0; r < d; ++r) {
        double s = mean[r];
        for (std::size_t k = 0; k <= r; ++k) s += l[r * d + k] * n[k];
        p[r] = s;
      }
      if (in_support(spec_, p)) return p;
    }
    throw ConfigError("truncated mixture: truncation box has negligible mass");
  case DistributionKind::UniformDiskUnion:
    for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
      const Disk& disk = spec_.disks[pick(cumulative_, u.next())];
      double norm = 0.0;
      for (double& x : p) {
        x = standard_normal(u);
        norm += x * x;
      }
      norm = std::sqrt(norm);
      const double r = disk.radius * std::pow(u.next(), 1.0 / static_cast<double>(d));
      for (std::size_t k = 0; k < d; ++k) p[k] = disk.center[k] + (norm > 0.0 ? r * p[k] / norm : 0.0);
      // Accept with probability 1/(covering disks) so overlaps are not over-weighted.
      int covering = 0;
      for (const auto& other : spec_.disks) {
        if (squared_distance(p, other.center) <= other.radius * other.radius) ++covering;
      }
      if (covering <= 1 || u.next() * covering < 1.0) return p;
    }
    throw ConfigError("disk union: rejection sampling did not terminate");
  }
  return p;
}

std::vector<double> sample(const DistributionSpec& spec, StreamHandle& stream) {
  return Sampler(spec).sample(stream);
}

SampleBatch make_batch(const DistributionSpec& spec, std::uint64_t seed, std::size_t n) {
  if (n == 0) throw UsageError("make_batch: n must be at least 1");
  const Sampler sampler(spec);
  SampleBatch batch;
  batch.dim = spec.dim;
  batch.bounds = sampler.support().bounds;
  batch.diameter = sampler.support().diameter;
  batch.points.reserve(n * spec.dim);
  StreamHandle stream{seed, kBatchStream, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = sampler.sample(stream);
    batch.points.insert(batch.points.end(), p.begin(), p.end());
  }
  return batch;
}

QuantizerVec init_quantizer(const DistributionSpec& spec, std::uint64_t seed, std::size_t kappa,
                            std::uint32_t stream_id) {
  if (kappa == 0) throw UsageError("init_quantizer: kappa must be at least 1");
  const Sampler sampler(spec);
  const double min_sep = 1e-6 * sampler.support().diameter;
  StreamHandle stream{seed, stream_id, 0};
  constexpr int kRounds = 1000;
  for (int round = 0; round < kRounds; ++round) {
    std::vector<double> coords;
    coords.reserve(kappa * spec.dim);
    for (std::size_t l = 0; l < kappa; ++l) {
      std::vector<double> p = sampler.sample(stream);
      for (int redraw = 0; !in_support_interior(spec, p); ++redraw) {
        if (redraw >= kRounds) throw ConfigError("init_quantizer: cannot draw interior points");
        p = sampler.sample(stream);
      }
      coords.insert(coords.end(), p.begin(), p.end());
    }
    QuantizerVec w(kappa, spec.dim, std::move(coords));
    if (min_component_separation(w) >= min_sep) return w;
  }
  throw ConfigError("init_quantizer: no parted initialization after 1000 rounds (support too degenerate)");
}

SampleSource SampleSource::fresh(const DistributionSpec& spec) {
  SampleSource s;
  s.sampler_ = std::make_shared<const Sampler>(spec);
  return s;
}

SampleSource SampleSource::replay(SampleBatch batch) {
  if (batch.empty()) throw UsageError("replay source needs a nonempty batch");
  SampleSource s;
  s.batch_ = std::make_shared<const SampleBatch>(std::move(batch));
  return s;
}

std::size_t SampleSource::dim() const noexcept { return batch_ ? batch_->dim : sampler_->spec().dim; }

std::vector<double> SampleSource::draw(StreamHandle& stream) const {
  if (!batch_) return sampler_->sample(stream);
  DrawUniforms u(stream);
  ++stream.counter;
  const std::size_t n = batch_->size();
  const std::size_t k = std::min(static_cast<std::size_t>(u.next() * static_cast<double>(n)), n - 1);
  auto p = batch_->point(k);
  return {p.begin(), p.end()};
}

} // namespace dalvq
