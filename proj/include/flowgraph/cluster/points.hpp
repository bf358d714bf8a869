#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "flowgraph/error.hpp"

namespace flowgraph::cluster {

/// Dense row-major point cloud of fixed dimension.
class PointSet {
 public:
  explicit PointSet(std::size_t dim = 0) : dim_(dim) {}

  template <std::size_t D>
  static PointSet from_arrays(const std::vector<std::array<double, D>>& rows) {
    PointSet p(D);
    p.data_.reserve(rows.size() * D);
    for (const auto& r : rows) p.data_.insert(p.data_.end(), r.begin(), r.end());
    return p;
  }

  static PointSet from_rows(const std::vector<std::vector<double>>& rows) {
    PointSet p(rows.empty() ? 0 : rows.front().size());
    for (const auto& r : rows) p.push_back(r);
    return p;
  }

  void push_back(std::span<const double> row) {
    if (row.size() != dim_) throw InvalidParameter("point dimension mismatch");
    for (double v : row)
      if (!std::isfinite(v)) throw InvalidParameter("non-finite point coordinate");
    data_.insert(data_.end(), row.begin(), row.end());
  }

  std::size_t size() const noexcept { return dim_ ? data_.size() / dim_ : 0; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return size() == 0; }

  std::span<const double> operator[](std::size_t i) const noexcept {
    return {data_.data() + i * dim_, dim_};
  }

 private:
  std::size_t dim_;
  std::vector<double> data_;
};

inline double euclidean(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return std::sqrt(s);
}

/// Exhaustive eps-range search.
class BruteForceIndex {
 public:
  BruteForceIndex(const PointSet& points, double eps) : points_(&points), eps_(eps) {}

  /// Calls fn(j, distance) for every j with d(i, j) <= eps, including i.
  template <typename Fn>
  void for_each_neighbor(std::size_t i, Fn&& fn) const {
    const auto p = (*points_)[i];
    for (std::size_t j = 0; j < points_->size(); ++j) {
      const double d = euclidean(p, (*points_)[j]);
      if (d <= eps_) fn(j, d);
    }
  }

 private:
  const PointSet* points_;
  double eps_;
};

/// Uniform grid over the first few coordinates. Candidates come from the
/// 3^k surrounding cells and are filtered with the exact distance, so the
/// neighbour sets equal the brute-force ones.
class GridIndex {
 public:
  static constexpr std::size_t kMaxGridDims = 3;

  GridIndex(const PointSet& points, double eps)
      : points_(&points), eps_(eps), dims_(std::min(points.dim(), kMaxGridDims)),
        // Slightly wider cells keep neighbours within one cell step despite rounding.
        cell_(eps * (1.0 + 1e-9)) {
    for (std::size_t i = 0; i < points.size(); ++i) cells_[cell_coords(points[i])].push_back(i);
  }

  template <typename Fn>
  void for_each_neighbor(std::size_t i, Fn&& fn) const {
    const auto p = (*points_)[i];
    const auto base = cell_coords(p);
    std::array<std::int64_t, kMaxGridDims> offset{};
    std::size_t combos = 1;
    for (std::size_t d = 0; d < dims_; ++d) combos *= 3;
    for (std::size_t c = 0; c < combos; ++c) {
      std::size_t rest = c;
      auto probe = base;
      for (std::size_t d = 0; d < dims_; ++d) {
        offset[d] = static_cast<std::int64_t>(rest % 3) - 1;
        rest /= 3;
        probe[d] += offset[d];
      }
      auto it = cells_.find(probe);
      if (it == cells_.end()) continue;
      for (std::size_t j : it->second) {
        const double dist = euclidean(p, (*points_)[j]);
        if (dist <= eps_) fn(j, dist);
      }
    }
  }

 private:
  using Coords = std::array<std::int64_t, kMaxGridDims>;

  Coords cell_coords(std::span<const double> p) const {
    Coords c{};
    for (std::size_t d = 0; d < dims_; ++d) c[d] = static_cast<std::int64_t>(std::floor(p[d] / cell_));
    return c;
  }

  struct CoordsHash {
    std::size_t operator()(const Coords& c) const noexcept {
      std::uint64_t h = 1469598103934665603ull;
      for (auto v : c) h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      return static_cast<std::size_t>(h);
    }
  };

  const PointSet* points_;
  double eps_;
  std::size_t dims_;
  double cell_;
  std::unordered_map<Coords, std::vector<std::size_t>, CoordsHash> cells_;
};

enum class IndexKind { automatic, brute_force, grid };

/// Point count above which `automatic` switches to the grid index.
inline constexpr std::size_t kGridThreshold = 4096;

}  // namespace flowgraph::cluster
