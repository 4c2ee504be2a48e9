#include "dalvq/geometry.hpp"

#include "dalvq/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace dalvq {

QuantizerVec::QuantizerVec(std::size_t kappa, std::size_t dim)
    : kappa_(kappa), dim_(dim), coords_(kappa * dim, 0.0) {}

QuantizerVec::QuantizerVec(std::size_t kappa, std::size_t dim, std::vector<double> coords)
    : kappa_(kappa), dim_(dim), coords_(std::move(coords)) {
  if (coords_.size() != kappa_ * dim_) {
    throw UsageError("QuantizerVec: expected " + std::to_string(kappa_ * dim_) + " coordinates, got " +
                     std::to_string(coords_.size()));
  }
  for (double c : coords_) {
    if (!std::isfinite(c)) throw UsageError("QuantizerVec: non-finite coordinate");
  }
}

double QuantizerVec::norm() const {
  double s = 0.0;
  for (double c : coords_) s += c * c;
  return std::sqrt(s);
}

bool QuantizerVec::is_parted(double delta) const { return min_component_separation(*this) >= delta; }

namespace {
void require_same_shape(const QuantizerVec& a, const QuantizerVec& b) {
  if (!a.same_shape(b)) throw UsageError("QuantizerVec: shape mismatch");
}
} // namespace

QuantizerVec& QuantizerVec::operator+=(const QuantizerVec& other) {
  require_same_shape(*this, other);
  for (std::size_t k = 0; k < coords_.size(); ++k) coords_[k] += other.coords_[k];
  return *this;
}

QuantizerVec& QuantizerVec::operator-=(const QuantizerVec& other) {
  require_same_shape(*this, other);
  for (std::size_t k = 0; k < coords_.size(); ++k) coords_[k] -= other.coords_[k];
  return *this;
}

QuantizerVec& QuantizerVec::operator*=(double s) {
  for (double& c : coords_) c *= s;
  return *this;
}

QuantizerVec& QuantizerVec::add_scaled(double s, const QuantizerVec& other) {
  require_same_shape(*this, other);
  for (std::size_t k = 0; k < coords_.size(); ++k) coords_[k] += s * other.coords_[k];
  return *this;
}

QuantizerVec operator-(QuantizerVec a, const QuantizerVec& b) { return a -= b; }
QuantizerVec operator+(QuantizerVec a, const QuantizerVec& b) { return a += b; }

bool BoundingBox::contains(std::span<const double> p) const {
  if (p.size() != lower.size()) return false;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] < lower[k] || p[k] > upper[k]) return false;
  }
  return true;
}

double BoundingBox::diagonal() const { return distance(lower, upper); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

namespace {

void require_dim(std::span<const double> z, const QuantizerVec& w) {
  if (z.size() != w.dim()) {
    throw UsageError("dimension mismatch: sample has " + std::to_string(z.size()) + ", quantizer has " +
                     std::to_string(w.dim()));
  }
  if (w.kappa() == 0) throw UsageError("quantizer has no prototypes");
}

void require_batch(const QuantizerVec& w, const SampleBatch& data) {
  if (data.empty()) throw UsageError("empty sample batch");
  if (data.dim != w.dim()) throw UsageError("dimension mismatch between batch and quantizer");
  if (w.kappa() == 0) throw UsageError("quantizer has no prototypes");
}

// Strict '<' keeps the first of several equidistant prototypes.
std::pair<std::size_t, double> nearest_with_distance(std::span<const double> z, const QuantizerVec& w) {
  std::size_t best = 0;
  double best_d = squared_distance(z, w.point(0));
  for (std::size_t l = 1; l < w.kappa(); ++l) {
    const double d = squared_distance(z, w.point(l));
    if (d < best_d) {
      best_d = d;
      best = l;
    }
  }
  return {best, best_d};
}

} // namespace

std::size_t nearest_cell(std::span<const double> z, const QuantizerVec& w) {
  require_dim(z, w);
  return nearest_with_distance(z, w).first;
}

QuantizerVec observation_H(std::span<const double> z, const QuantizerVec& w) {
  require_dim(z, w);
  QuantizerVec out(w.kappa(), w.dim());
  const std::size_t l = nearest_with_distance(z, w).first;
  auto src = w.point(l);
  auto dst = out.point(l);
  for (std::size_t k = 0; k < w.dim(); ++k) dst[k] = src[k] - z[k];
  return out;
}

DistortionAndGradient empirical_distortion_and_h(const QuantizerVec& w, const SampleBatch& data) {
  require_batch(w, data);
  const std::size_t n = data.size();
  const std::size_t d = w.dim();
  // Accumulate per-cell sums of (w_l - z) as count * w_l - sum z to keep one pass cheap.
  std::vector<double> zsum(w.kappa() * d, 0.0);
  std::vector<std::size_t> count(w.kappa(), 0);
  double dist_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto z = data.point(i);
    const auto [l, sq] = nearest_with_distance(z, w);
    dist_sum += sq;
    ++count[l];
    for (std::size_t k = 0; k < d; ++k) zsum[l * d + k] += z[k];
  }
  DistortionAndGradient out{0.5 * dist_sum / static_cast<double>(n), QuantizerVec(w.kappa(), d)};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t l = 0; l < w.kappa(); ++l) {
    if (count[l] == 0) continue;
    auto wl = w.point(l);
    auto hl = out.h.point(l);
    for (std::size_t k = 0; k < d; ++k) {
      hl[k] = (static_cast<double>(count[l]) * wl[k] - zsum[l * d + k]) * inv_n;
    }
  }
  return out;
}

double empirical_distortion(const QuantizerVec& w, const SampleBatch& data) {
  require_batch(w, data);
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) s += nearest_with_distance(data.point(i), w).second;
  return 0.5 * s / static_cast<double>(data.size());
}

QuantizerVec empirical_h(const QuantizerVec& w, const SampleBatch& data) {
  return empirical_distortion_and_h(w, data).h;
}

std::vector<std::size_t> cell_counts(const QuantizerVec& w, const SampleBatch& data) {
  require_batch(w, data);
  std::vector<std::size_t> count(w.kappa(), 0);
  for (std::size_t i = 0; i < data.size(); ++i) ++count[nearest_with_distance(data.point(i), w).first];
  return count;
}

double min_component_separation(const QuantizerVec& w) {
  if (w.kappa() < 2) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < w.kappa(); ++k) {
    for (std::size_t l = k + 1; l < w.kappa(); ++l) {
      best = std::min(best, squared_distance(w.point(k), w.point(l)));
    }
  }
  return std::sqrt(best);
}

} // namespace dalvq
