#pragma once

// Quantization geometry: nearest-prototype cells, distortion and its gradient
// under an empirical reference measure.

#include <cstddef>
#include <span>
#include <vector>

namespace dalvq {

/// A point of (R^d)^kappa: kappa prototypes of dimension d stored row-major.
/// Also used for vectors of the same shape (gradients, descent terms).
class QuantizerVec {
public:
  QuantizerVec() = default;
  /// All-zero vector.
  QuantizerVec(std::size_t kappa, std::size_t dim);
  /// Throws UsageError if coords.size() != kappa * dim or a coordinate is not finite.
  QuantizerVec(std::size_t kappa, std::size_t dim, std::vector<double> coords);

  std::size_t kappa() const noexcept { return kappa_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const double> point(std::size_t l) const { return {coords_.data() + l * dim_, dim_}; }
  std::span<double> point(std::size_t l) { return {coords_.data() + l * dim_, dim_}; }

  std::span<const double> coords() const noexcept { return coords_; }
  std::span<double> coords() noexcept { return coords_; }

  /// Euclidean norm over all kappa*d coordinates.
  double norm() const;
  /// min over k != l of |w_k - w_l| >= delta.
  bool is_parted(double delta) const;

  bool same_shape(const QuantizerVec& other) const noexcept {
    return kappa_ == other.kappa_ && dim_ == other.dim_;
  }

  QuantizerVec& operator+=(const QuantizerVec& other);
  QuantizerVec& operator-=(const QuantizerVec& other);
  QuantizerVec& operator*=(double s);
  /// this += s * other
  QuantizerVec& add_scaled(double s, const QuantizerVec& other);

  friend bool operator==(const QuantizerVec&, const QuantizerVec&) = default;

private:
  std::size_t kappa_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

QuantizerVec operator-(QuantizerVec a, const QuantizerVec& b);
QuantizerVec operator+(QuantizerVec a, const QuantizerVec& b);

/// Axis-aligned box [lower, upper].
struct BoundingBox {
  std::vector<double> lower;
  std::vector<double> upper;

  bool contains(std::span<const double> p) const;
  double diagonal() const;
};

/// The empirical measure mu_n: n points with the support's bounding box and diameter.
struct SampleBatch {
  std::size_t dim = 0;
  std::vector<double> points;  // n * dim, row-major
  BoundingBox bounds;
  double diameter = 0.0;

  std::size_t size() const noexcept { return dim == 0 ? 0 : points.size() / dim; }
  bool empty() const noexcept { return points.empty(); }
  std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, dim}; }
};

double squared_distance(std::span<const double> a, std::span<const double> b);
double distance(std::span<const double> a, std::span<const double> b);

/// Index (0-based) of the prototype closest to z; ties resolve to the smallest index,
/// which also collapses duplicate prototypes onto the first copy.
std::size_t nearest_cell(std::span<const double> z, const QuantizerVec& w);

/// H(z, w): (w_l - z) on the winning cell l, zero elsewhere.
QuantizerVec observation_H(std::span<const double> z, const QuantizerVec& w);

/// (1/2) * mean over the batch of min_l |z_i - w_l|^2.
double empirical_distortion(const QuantizerVec& w, const SampleBatch& data);

/// mean over the batch of H(z_i, w). Equals the gradient of empirical_distortion on
/// parted quantizers away from cell boundaries.
QuantizerVec empirical_h(const QuantizerVec& w, const SampleBatch& data);

/// Distortion and h from a single pass over the batch.
struct DistortionAndGradient {
  double distortion = 0.0;
  QuantizerVec h;
};
DistortionAndGradient empirical_distortion_and_h(const QuantizerVec& w, const SampleBatch& data);

/// Cell sizes |W_l| under the batch; sums to n.
std::vector<std::size_t> cell_counts(const QuantizerVec& w, const SampleBatch& data);

/// min over k != l of |w_k - w_l|; +infinity when kappa == 1.
double min_component_separation(const QuantizerVec& w);

} // namespace dalvq
