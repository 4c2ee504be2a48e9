#pragma once

// Synthetic compactly supported distributions and replayable per-processor sample streams.

#include "dalvq/geometry.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dalvq {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// Pure function of (key, counter); no internal state.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Identifies draw number `counter` of stream `stream_id` under `seed`.
/// Streams with distinct (seed, stream_id) never share a Philox block.
struct StreamHandle {
  std::uint64_t seed = 0;
  std::uint32_t stream_id = 0;
  std::uint64_t counter = 0;

  friend bool operator==(const StreamHandle&, const StreamHandle&) = default;
};

/// Stream ids reserved for non-processor consumers. Processor i uses stream_id = i.
inline constexpr std::uint32_t kBatchStream = 0xFFFFFF00u;
inline constexpr std::uint32_t kInitStream = 0xFFFFFF01u;
inline constexpr std::uint32_t kScheduleStream = 0xFFFFFF02u;

/// Uniform doubles in [0, 1) for one draw. Each draw owns a private sequence of Philox
/// blocks, so a draw may consume as many uniforms as it needs (rejection loops).
class DrawUniforms {
public:
  explicit DrawUniforms(const StreamHandle& h) : handle_(h) {}
  double next();

private:
  StreamHandle handle_;
  std::uint32_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int used_ = 4;
};

/// Standard normal from two uniforms (Box-Muller).
double standard_normal(DrawUniforms& u);

enum class DistributionKind { UniformBox, TruncatedGaussianMixture, UniformDiskUnion };

std::string to_string(DistributionKind kind);
DistributionKind distribution_kind_from_string(const std::string& s);

struct GaussianComponent {
  double weight = 1.0;
  std::vector<double> mean;
  std::vector<std::vector<double>> covariance;

  friend bool operator==(const GaussianComponent&, const GaussianComponent&) = default;
};

struct Disk {
  std::vector<double> center;
  double radius = 0.0;

  friend bool operator==(const Disk&, const Disk&) = default;
};

/// Bounded-support data distribution. Box corners for uniform-box; components plus a
/// truncation box for the mixture; centers and radii (balls in R^d) for the disk union.
struct DistributionSpec {
  DistributionKind kind = DistributionKind::UniformBox;
  std::size_t dim = 2;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<GaussianComponent> components;
  std::vector<Disk> disks;

  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

/// Derived facts about a validated spec.
struct SupportInfo {
  BoundingBox bounds;
  double diameter = 0.0;
  bool convex = true;            // false for disk unions: flagged as violating bounded-density-on-convex-hull
  bool contains_origin = false;  // recorded only
};

/// Throws ConfigError on invalid parameters (non-positive radius, non-PSD covariance,
/// weights not summing to 1, empty or inverted box, dimension mismatch).
SupportInfo validate_distribution(const DistributionSpec& spec);

/// True iff p lies in the closed support.
bool in_support(const DistributionSpec& spec, std::span<const double> p);
/// True iff p lies in the interior of the support.
bool in_support_interior(const DistributionSpec& spec, std::span<const double> p);

/// Precomputed sampler (Cholesky factors, cumulative weights). Cheap to copy.
class Sampler {
public:
  explicit Sampler(DistributionSpec spec);

  const DistributionSpec& spec() const noexcept { return spec_; }
  const SupportInfo& support() const noexcept { return info_; }

  /// Draws the point for `stream` and advances its counter by one.
  std::vector<double> sample(StreamHandle& stream) const;

private:
  DistributionSpec spec_;
  SupportInfo info_;
  std::vector<std::vector<double>> chol_;  // lower-triangular factors, row-major d*d
  std::vector<double> cumulative_;         // mixture weights or disk areas
};

/// One draw from `spec` for `stream`; stream.counter is incremented.
std::vector<double> sample(const DistributionSpec& spec, StreamHandle& stream);

/// n samples from the batch stream of `seed`; bounds and diameter come from the support.
SampleBatch make_batch(const DistributionSpec& spec, std::uint64_t seed, std::size_t n);

/// kappa interior points drawn from the distribution, redrawn until pairwise separation
/// is at least 1e-6 * diameter. Throws ConfigError after 1000 rounds.
QuantizerVec init_quantizer(const DistributionSpec& spec, std::uint64_t seed, std::size_t kappa,
                            std::uint32_t stream_id = kInitStream);

/// Where processors draw their samples: fresh from the distribution, or uniformly with
/// replacement from a fixed reference batch (so the batch is exactly the sampling law).
class SampleSource {
public:
  static SampleSource fresh(const DistributionSpec& spec);
  static SampleSource replay(SampleBatch batch);

  bool is_replay() const noexcept { return batch_ != nullptr; }
  std::size_t dim() const noexcept;
  /// One sample for `stream`; the counter advances by one.
  std::vector<double> draw(StreamHandle& stream) const;

private:
  std::shared_ptr<const Sampler> sampler_;
  std::shared_ptr<const SampleBatch> batch_;
};

} // namespace dalvq
