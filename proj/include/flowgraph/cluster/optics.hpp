#pragma once

#include <algorithm>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "flowgraph/cluster/points.hpp"
#include "flowgraph/cluster/result.hpp"

namespace flowgraph::cluster {

inline constexpr double kUndefined = std::numeric_limits<double>::infinity();

/// Cluster ordering with per-point core and reachability distances. Both are
/// kUndefined (infinity) when larger than the generating eps.
struct OpticsOrdering {
  std::vector<std::size_t> order;
  std::vector<double> reachability;   // indexed by point
  std::vector<double> core_distance;  // indexed by point
  double eps = 0.0;
  std::size_t min_pts = 0;
};

template <typename Index>
OpticsOrdering optics_ordering_with(const PointSet& points, double eps, std::size_t min_pts, const Index& index) {
  const std::size_t n = points.size();
  OpticsOrdering out;
  out.eps = eps;
  out.min_pts = min_pts;
  out.reachability.assign(n, kUndefined);
  out.core_distance.assign(n, kUndefined);
  out.order.reserve(n);

  std::vector<double> dists;
  for (std::size_t i = 0; i < n; ++i) {
    dists.clear();
    index.for_each_neighbor(i, [&](std::size_t, double d) { dists.push_back(d); });
    if (dists.size() >= min_pts) {
      std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(min_pts - 1), dists.end());
      out.core_distance[i] = dists[min_pts - 1];
    }
  }

  std::vector<char> processed(n, 0);
  // Ordered by (reachability, index): ties go to the lowest index.
  std::set<std::pair<double, std::size_t>> seeds;
  auto expand = [&](std::size_t p) {
    const double core = out.core_distance[p];
    if (core == kUndefined) return;
    index.for_each_neighbor(p, [&](std::size_t q, double d) {
      if (processed[q]) return;
      const double reach = std::max(core, d);
      if (reach < out.reachability[q]) {
        if (out.reachability[q] != kUndefined) seeds.erase({out.reachability[q], q});
        out.reachability[q] = reach;
        seeds.insert({reach, q});
      }
    });
  };

  for (std::size_t i = 0; i < n; ++i) {
    if (processed[i]) continue;
    processed[i] = 1;
    out.order.push_back(i);
    expand(i);
    while (!seeds.empty()) {
      const auto q = seeds.begin()->second;
      seeds.erase(seeds.begin());
      processed[q] = 1;
      out.order.push_back(q);
      expand(q);
    }
  }
  return out;
}

inline OpticsOrdering optics_ordering(const PointSet& points, double eps, std::size_t min_pts,
                                      IndexKind kind = IndexKind::automatic) {
  ClusterParams{Algorithm::optics, eps, min_pts}.validate();
  const bool grid = kind == IndexKind::grid || (kind == IndexKind::automatic && points.size() > kGridThreshold);
  if (grid) return optics_ordering_with(points, eps, min_pts, GridIndex(points, eps));
  return optics_ordering_with(points, eps, min_pts, BruteForceIndex(points, eps));
}

/// Flat DBSCAN-style extraction at `eps_prime` <= the ordering's eps.
inline ClusterResult extract_at_eps(const OpticsOrdering& ordering, double eps_prime) {
  if (!(eps_prime > 0.0) || eps_prime > ordering.eps)
    throw InvalidParameter("extraction eps must lie in (0, generating eps]");
  ClusterResult out;
  out.assignment.assign(ordering.reachability.size(), kNoise);
  int current = kNoise;
  int next = 0;
  for (std::size_t p : ordering.order) {
    if (ordering.reachability[p] > eps_prime) {
      if (ordering.core_distance[p] <= eps_prime) {
        current = next++;
        out.assignment[p] = current;
      }
    } else {
      out.assignment[p] = current;
    }
  }
  canonicalize(out);
  return out;
}

inline ClusterResult optics(const PointSet& points, double eps, std::size_t min_pts,
                            IndexKind kind = IndexKind::automatic) {
  return extract_at_eps(optics_ordering(points, eps, min_pts, kind), eps);
}

}  // namespace flowgraph::cluster
