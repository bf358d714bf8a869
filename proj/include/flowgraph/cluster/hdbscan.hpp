#pragma once

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <vector>

#include "flowgraph/cluster/points.hpp"
#include "flowgraph/cluster/result.hpp"

namespace flowgraph::cluster {

struct MstEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;
};

/// One row of the condensed tree: `child` is a point index when
/// `child_is_cluster` is false, a condensed cluster id otherwise.
struct CondensedEntry {
  std::size_t parent = 0;
  std::size_t child = 0;
  double lambda = 0.0;
  std::size_t size = 0;
  bool child_is_cluster = false;
};

/// Intermediate products of the hierarchy, kept for inspection and testing.
/// Condensed cluster 0 is the root.
struct HdbscanTree {
  std::vector<double> core_distance;
  std::vector<MstEdge> mst;
  std::vector<CondensedEntry> condensed;
  std::vector<double> stability;
  std::vector<char> selected;

  double mst_weight() const {
    double w = 0.0;
    for (const auto& e : mst) w += e.weight;
    return w;
  }
};

namespace detail {

/// Distance to the k-th nearest point, the point itself counting as first.
inline std::vector<double> core_distances(const PointSet& points, std::size_t k) {
  const std::size_t n = points.size();
  std::vector<double> core(n, 0.0);
  std::vector<double> dists(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) dists[j] = euclidean(points[i], points[j]);
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k - 1), dists.end());
    core[i] = dists[k - 1];
  }
  return core;
}

/// Prim's algorithm on the implicit complete graph of mutual reachability
/// distances. Ties pick the lowest vertex index.
inline std::vector<MstEdge> mutual_reachability_mst(const PointSet& points, const std::vector<double>& core) {
  const std::size_t n = points.size();
  std::vector<MstEdge> mst;
  if (n < 2) return mst;
  mst.reserve(n - 1);
  auto mreach = [&](std::size_t a, std::size_t b) {
    return std::max({core[a], core[b], euclidean(points[a], points[b])});
  };
  std::vector<char> in_tree(n, 0);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> from(n, 0);
  std::size_t current = 0;
  in_tree[0] = 1;
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t next = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      const double d = mreach(current, j);
      if (d < best[j]) {
        best[j] = d;
        from[j] = current;
      }
      if (next == n || best[j] < best[next]) next = j;
    }
    in_tree[next] = 1;
    mst.push_back({from[next], next, best[next]});
    current = next;
  }
  return mst;
}

struct Dendrogram {
  // Internal node m has id n + m.
  std::vector<std::size_t> left, right, size;
  std::vector<double> distance;
  std::size_t leaves = 0;

  std::size_t root() const { return leaves + left.size() - 1; }
  bool is_leaf(std::size_t node) const { return node < leaves; }
  std::size_t node_size(std::size_t node) const { return is_leaf(node) ? 1 : size[node - leaves]; }
};

inline Dendrogram single_linkage(std::size_t n, std::vector<MstEdge> edges) {
  std::stable_sort(edges.begin(), edges.end(), [](const auto& x, const auto& y) { return x.weight < y.weight; });
  Dendrogram tree;
  tree.leaves = n;
  std::vector<std::size_t> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : edges) {
    const auto ra = find(e.a), rb = find(e.b);
    const std::size_t id = n + tree.left.size();
    tree.left.push_back(ra);
    tree.right.push_back(rb);
    tree.distance.push_back(e.weight);
    tree.size.push_back(tree.node_size(ra) + tree.node_size(rb));
    parent[ra] = parent[rb] = id;
  }
  return tree;
}

inline void collect_leaves(const Dendrogram& tree, std::size_t node, std::vector<std::size_t>& out,
                           std::vector<char>& ignore) {
  std::vector<std::size_t> stack{node};
  while (!stack.empty()) {
    const auto x = stack.back();
    stack.pop_back();
    ignore[x] = 1;
    if (tree.is_leaf(x)) {
      out.push_back(x);
    } else {
      stack.push_back(tree.left[x - tree.leaves]);
      stack.push_back(tree.right[x - tree.leaves]);
    }
  }
}

}  // namespace detail

/// Builds the density hierarchy: core distances, mutual-reachability MST,
/// single-linkage dendrogram, condensed tree and excess-of-mass selection.
inline HdbscanTree hdbscan_tree(const PointSet& points, std::size_t min_pts, std::size_t min_cluster_size) {
  ClusterParams{Algorithm::hdbscan, 1.0, min_pts, min_cluster_size}.validate();
  HdbscanTree out;
  const std::size_t n = points.size();
  if (n < min_pts || n < 2) return out;

  out.core_distance = detail::core_distances(points, min_pts);
  out.mst = detail::mutual_reachability_mst(points, out.core_distance);
  const auto tree = detail::single_linkage(n, out.mst);

  // Zero distances (duplicates) get a finite lambda above every real one.
  double min_positive = std::numeric_limits<double>::infinity();
  for (const auto& e : out.mst)
    if (e.weight > 0.0) min_positive = std::min(min_positive, e.weight);
  const double lambda_cap = std::isfinite(min_positive) ? 2.0 / min_positive : 1.0;
  auto lambda_of = [&](double d) { return d > 0.0 ? 1.0 / d : lambda_cap; };

  const std::size_t total = 2 * n - 1;
  std::vector<std::size_t> relabel(total, 0);
  std::vector<char> ignore(total, 0);
  std::size_t next_cluster = 1;
  std::vector<std::size_t> leaves;

  std::deque<std::size_t> queue{tree.root()};
  while (!queue.empty()) {
    const auto node = queue.front();
    queue.pop_front();
    if (tree.is_leaf(node) || ignore[node]) continue;
    const auto m = node - n;
    const auto l = tree.left[m], r = tree.right[m];
    queue.push_back(l);
    queue.push_back(r);
    const double lambda = lambda_of(tree.distance[m]);
    const auto lsize = tree.node_size(l), rsize = tree.node_size(r);
    const auto parent = relabel[node];

    auto fall_out = [&](std::size_t child) {
      leaves.clear();
      detail::collect_leaves(tree, child, leaves, ignore);
      for (auto p : leaves) out.condensed.push_back({parent, p, lambda, 1, false});
    };

    if (lsize >= min_cluster_size && rsize >= min_cluster_size) {
      for (auto [child, size] : {std::pair{l, lsize}, std::pair{r, rsize}}) {
        relabel[child] = next_cluster++;
        out.condensed.push_back({parent, relabel[child], lambda, size, true});
      }
    } else if (lsize < min_cluster_size && rsize < min_cluster_size) {
      fall_out(l);
      fall_out(r);
    } else if (lsize < min_cluster_size) {
      relabel[r] = parent;
      fall_out(l);
    } else {
      relabel[l] = parent;
      fall_out(r);
    }
  }

  const std::size_t clusters = next_cluster;
  std::vector<double> birth(clusters, 0.0);
  std::vector<std::vector<std::size_t>> children(clusters);
  for (const auto& e : out.condensed) {
    if (!e.child_is_cluster) continue;
    birth[e.child] = e.lambda;
    children[e.parent].push_back(e.child);
  }
  out.stability.assign(clusters, 0.0);
  for (const auto& e : out.condensed)
    out.stability[e.parent] += (e.lambda - birth[e.parent]) * static_cast<double>(e.size);

  // Children always carry larger ids than their parent, so a reverse sweep
  // sees every subtree before its root. The root itself is never selected.
  out.selected.assign(clusters, 1);
  out.selected[0] = 0;
  std::vector<double> best = out.stability;
  for (std::size_t c = clusters; c-- > 1;) {
    double subtree = 0.0;
    for (auto ch : children[c]) subtree += best[ch];
    if (subtree > best[c]) {
      out.selected[c] = 0;
      best[c] = subtree;
    } else {
      std::vector<std::size_t> stack(children[c].begin(), children[c].end());
      while (!stack.empty()) {
        const auto d = stack.back();
        stack.pop_back();
        out.selected[d] = 0;
        stack.insert(stack.end(), children[d].begin(), children[d].end());
      }
    }
  }
  return out;
}

/// Flat HDBSCAN clustering. With fewer points than min_pts every point is noise.
inline ClusterResult hdbscan(const PointSet& points, std::size_t min_pts, std::size_t min_cluster_size) {
  const auto tree = hdbscan_tree(points, min_pts, min_cluster_size);
  ClusterResult out;
  out.assignment.assign(points.size(), kNoise);
  if (tree.selected.empty()) return out;

  std::vector<std::size_t> cluster_parent(tree.selected.size(), 0);
  for (const auto& e : tree.condensed)
    if (e.child_is_cluster) cluster_parent[e.child] = e.parent;

  for (const auto& e : tree.condensed) {
    if (e.child_is_cluster) continue;
    auto c = e.parent;
    while (c != 0 && !tree.selected[c]) c = cluster_parent[c];
    if (c != 0) out.assignment[e.child] = static_cast<int>(c);
  }
  canonicalize(out);
  return out;
}

}  // namespace flowgraph::cluster
