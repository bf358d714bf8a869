#pragma once

#include <cstddef>
#include <deque>
#include <limits>
#include <vector>

#include "flowgraph/cluster/points.hpp"
#include "flowgraph/cluster/result.hpp"

namespace flowgraph::cluster {

/// DBSCAN with neighbourhoods that include the query point.
///
/// Clusters are the connected components of core points. A border point joins
/// the cluster of its lowest-index core neighbour. Cluster ids are numbered
/// by lowest member index.
template <typename Index>
ClusterResult dbscan_with(const PointSet& points, std::size_t min_pts, const Index& index) {
  const std::size_t n = points.size();
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    index.for_each_neighbor(i, [&](std::size_t, double) { ++count; });
    core[i] = count >= min_pts;
  }

  ClusterResult out;
  out.assignment.assign(n, kNoise);
  int next = 0;
  std::deque<std::size_t> frontier;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || out.assignment[i] != kNoise) continue;
    out.assignment[i] = next;
    frontier.push_back(i);
    while (!frontier.empty()) {
      const auto p = frontier.front();
      frontier.pop_front();
      index.for_each_neighbor(p, [&](std::size_t q, double) {
        if (core[q] && out.assignment[q] == kNoise) {
          out.assignment[q] = next;
          frontier.push_back(q);
        }
      });
    }
    ++next;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    std::size_t anchor = std::numeric_limits<std::size_t>::max();
    index.for_each_neighbor(i, [&](std::size_t q, double) {
      if (core[q] && q < anchor) anchor = q;
    });
    if (anchor != std::numeric_limits<std::size_t>::max()) out.assignment[i] = out.assignment[anchor];
  }
  canonicalize(out);
  return out;
}

inline ClusterResult dbscan(const PointSet& points, double eps, std::size_t min_pts,
                            IndexKind kind = IndexKind::automatic) {
  ClusterParams{Algorithm::dbscan, eps, min_pts}.validate();
  const bool grid = kind == IndexKind::grid || (kind == IndexKind::automatic && points.size() > kGridThreshold);
  if (grid) return dbscan_with(points, min_pts, GridIndex(points, eps));
  return dbscan_with(points, min_pts, BruteForceIndex(points, eps));
}

}  // namespace flowgraph::cluster
