#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/errors.hpp"

namespace fedsim {

struct Segment {
  std::string name;
  std::vector<std::size_t> dims;

  std::size_t size() const {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           std::multiplies<>());
  }

  bool operator==(const Segment&) const = default;
};

using ShapeManifest = std::vector<Segment>;

inline std::size_t manifest_size(const ShapeManifest& manifest) {
  std::size_t total = 0;
  for (const auto& seg : manifest) total += seg.size();
  return total;
}

inline ShapeManifest flat_manifest(std::size_t n, std::string name = "values") {
  return {Segment{std::move(name), {n}}};
}

// Flat, immutable vector of model weights plus the layout that produced it.
// The manifest is shared between vectors derived from one another so the
// compatibility check is usually a pointer comparison.
class ParamVector {
 public:
  ParamVector() : manifest_(std::make_shared<const ShapeManifest>()) {}

  ParamVector(ShapeManifest manifest, std::vector<double> values)
      : ParamVector(std::make_shared<const ShapeManifest>(std::move(manifest)),
                    std::move(values)) {}

  ParamVector(std::shared_ptr<const ShapeManifest> manifest,
              std::vector<double> values)
      : manifest_(std::move(manifest)), values_(std::move(values)) {
    for (const auto& seg : *manifest_) {
      if (seg.dims.empty())
        throw ShapeError("segment '" + seg.name + "' has no dimensions");
      for (auto d : seg.dims)
        if (d == 0)
          throw ShapeError("segment '" + seg.name + "' has a zero dimension");
    }
    if (manifest_size(*manifest_) != values_.size())
      throw ShapeError("manifest describes " +
                       std::to_string(manifest_size(*manifest_)) +
                       " values but " + std::to_string(values_.size()) +
                       " were given");
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!std::isfinite(values_[i]))
        throw NumericError("non-finite parameter at index " +
                           std::to_string(i));
  }

  // Unnamed single-segment vector, mostly for tests and small examples.
  static ParamVector flat(std::vector<double> values) {
    auto n = values.size();
    return ParamVector(flat_manifest(n), std::move(values));
  }

  static ParamVector zeros_like(const ParamVector& like) {
    return ParamVector(like.manifest_, std::vector<double>(like.size(), 0.0));
  }

  std::span<const double> values() const noexcept { return values_; }
  const ShapeManifest& manifest() const noexcept { return *manifest_; }
  const std::shared_ptr<const ShapeManifest>& manifest_ptr() const noexcept {
    return manifest_;
  }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  bool compatible_with(const ParamVector& other) const {
    return manifest_ == other.manifest_ || *manifest_ == *other.manifest_;
  }

  // Exact elementwise and layout equality.
  bool operator==(const ParamVector& other) const {
    return compatible_with(other) && values_ == other.values_;
  }

 private:
  std::shared_ptr<const ShapeManifest> manifest_;
  std::vector<double> values_;
};

namespace detail {

inline void require_compatible(const ParamVector& a, const ParamVector& b) {
  if (!a.compatible_with(b))
    throw ShapeError("parameter vectors have different shape manifests");
}

inline void require_same_shapes(std::span<const ParamVector> vectors) {
  if (vectors.empty()) throw EmptyInputError("no parameter vectors given");
  for (const auto& v : vectors.subspan(1)) require_compatible(vectors.front(), v);
}

}  // namespace detail

// Sum of vectors[k] * weights[k] / sum(weights). Raw sample counts are fine
// as weights.
inline ParamVector weighted_sum(std::span<const ParamVector> vectors,
                                std::span<const double> weights) {
  detail::require_same_shapes(vectors);
  if (weights.size() != vectors.size())
    throw ShapeError("got " + std::to_string(weights.size()) +
                     " weights for " + std::to_string(vectors.size()) +
                     " vectors");
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w)) throw NumericError("non-finite aggregation weight");
    if (w < 0.0) throw NumericError("negative aggregation weight");
    total += w;
  }
  if (!(total > 0.0)) throw NumericError("aggregation weights sum to zero");

  const std::size_t n = vectors.front().size();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    const double w = weights[k] / total;
    if (w == 0.0) continue;
    auto src = vectors[k].values();
    for (std::size_t j = 0; j < n; ++j) out[j] += w * src[j];
  }
  // Rounding can push a convex combination a hair outside the hull; clamp so
  // that the bound holds exactly (and identical inputs come back unchanged).
  for (std::size_t j = 0; j < n; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k = 0; k < vectors.size(); ++k) {
      if (weights[k] == 0.0) continue;
      lo = std::min(lo, vectors[k][j]);
      hi = std::max(hi, vectors[k][j]);
    }
    out[j] = std::clamp(out[j], lo, hi);
  }
  return ParamVector(vectors.front().manifest_ptr(), std::move(out));
}

inline ParamVector weighted_sum(const std::vector<ParamVector>& vectors,
                                const std::vector<double>& weights) {
  return weighted_sum(std::span<const ParamVector>(vectors),
                      std::span<const double>(weights));
}

// Median of each coordinate across vectors. Even counts average the two
// middle order statistics.
inline ParamVector coordinate_median(std::span<const ParamVector> vectors) {
  detail::require_same_shapes(vectors);
  const std::size_t n = vectors.front().size();
  const std::size_t k = vectors.size();
  std::vector<double> out(n);
  std::vector<double> column(k);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < k; ++i) column[i] = vectors[i][j];
    std::sort(column.begin(), column.end());
    if (k % 2 == 1) {
      out[j] = column[k / 2];
    } else {
      out[j] = std::midpoint(column[k / 2 - 1], column[k / 2]);
    }
  }
  return ParamVector(vectors.front().manifest_ptr(), std::move(out));
}

inline ParamVector coordinate_median(const std::vector<ParamVector>& vectors) {
  return coordinate_median(std::span<const ParamVector>(vectors));
}

inline double l2_distance(const ParamVector& a, const ParamVector& b) {
  detail::require_compatible(a, b);
  // Scaled accumulation avoids overflow for large weights.
  double scale = 0.0, ssq = 1.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = std::abs(a[j] - b[j]);
    if (d == 0.0) continue;
    if (scale < d) {
      ssq = 1.0 + ssq * (scale / d) * (scale / d);
      scale = d;
    } else {
      ssq += (d / scale) * (d / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

enum class CombineOp { add, sub, mul, square, div_sqrt_offset };

// Elementwise building blocks for server optimizers. `square` ignores `b`
// beyond the shape check; `div_sqrt_offset` computes a / (sqrt(b) + offset).
inline ParamVector combine(const ParamVector& a, const ParamVector& b,
                           CombineOp op, double offset = 0.0) {
  detail::require_compatible(a, b);
  if (op == CombineOp::div_sqrt_offset && !(offset > 0.0))
    throw ConfigError("div_sqrt_offset requires a positive offset");
  std::vector<double> out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) {
    switch (op) {
      case CombineOp::add: out[j] = a[j] + b[j]; break;
      case CombineOp::sub: out[j] = a[j] - b[j]; break;
      case CombineOp::mul: out[j] = a[j] * b[j]; break;
      case CombineOp::square: out[j] = a[j] * a[j]; break;
      case CombineOp::div_sqrt_offset:
        if (b[j] < 0.0)
          throw NumericError("square root of negative value at index " +
                             std::to_string(j));
        out[j] = a[j] / (std::sqrt(b[j]) + offset);
        break;
    }
  }
  return ParamVector(a.manifest_ptr(), std::move(out));
}

inline ParamVector add(const ParamVector& a, const ParamVector& b) {
  return combine(a, b, CombineOp::add);
}
inline ParamVector sub(const ParamVector& a, const ParamVector& b) {
  return combine(a, b, CombineOp::sub);
}
inline ParamVector mul(const ParamVector& a, const ParamVector& b) {
  return combine(a, b, CombineOp::mul);
}
inline ParamVector square(const ParamVector& a) {
  return combine(a, a, CombineOp::square);
}
inline ParamVector div_sqrt_offset(const ParamVector& a, const ParamVector& b,
                                   double offset) {
  return combine(a, b, CombineOp::div_sqrt_offset, offset);
}

inline ParamVector scale(const ParamVector& a, double s) {
  if (!std::isfinite(s)) throw NumericError("non-finite scale factor");
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& x : out) x *= s;
  return ParamVector(a.manifest_ptr(), std::move(out));
}

}  // namespace fedsim
