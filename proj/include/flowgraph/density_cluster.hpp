#pragma once

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include "flowgraph/behavior_graph.hpp"
#include "flowgraph/cluster/dbscan.hpp"
#include "flowgraph/cluster/hdbscan.hpp"
#include "flowgraph/cluster/optics.hpp"
#include "flowgraph/cluster/points.hpp"
#include "flowgraph/cluster/result.hpp"

namespace flowgraph {

using cluster::Algorithm;
using cluster::ClusterParams;
using cluster::ClusterResult;
using cluster::kNoise;
using cluster::parse_algorithm;

/// Node indices of the normal entities of `graph`, in graph order.
inline std::vector<std::size_t> normal_node_indices(const SnapshotGraph& graph) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i)
    if (!graph.nodes[i].is_attack()) idx.push_back(i);
  return idx;
}

/// Normalized feature vectors of the normal nodes, in graph order.
inline cluster::PointSet normal_points(const SnapshotGraph& graph) {
  cluster::PointSet points(kFeatureDim);
  for (const auto& n : graph.nodes)
    if (!n.is_attack()) points.push_back(n.features);
  return points;
}

inline ClusterResult run_clustering(const cluster::PointSet& points, const ClusterParams& params,
                                    cluster::IndexKind index = cluster::IndexKind::automatic) {
  params.validate();
  switch (params.algorithm) {
    case Algorithm::dbscan: return cluster::dbscan(points, params.eps, params.min_pts, index);
    case Algorithm::optics: return cluster::optics(points, params.eps, params.min_pts, index);
    case Algorithm::hdbscan: return cluster::hdbscan(points, params.min_pts, params.min_cluster_size);
  }
  return {};
}

/// Clusters the normal nodes of one snapshot; attack nodes are never clustered.
inline ClusterResult cluster_graph(const SnapshotGraph& graph, const ClusterParams& params,
                                   cluster::IndexKind index = cluster::IndexKind::automatic) {
  return run_clustering(normal_points(graph), params, index);
}

enum class SuperNodeKind { cluster, attack };

struct SuperNode {
  SuperNodeKind kind = SuperNodeKind::cluster;
  std::vector<EntityId> members;
  FeatureVector raw{};       // member mean of raw features
  FeatureVector features{};  // per-snapshot scaled
  double behaviour_fraction = 0.0;
  FlowLabel hard_label = FlowLabel::normal;
};

struct ClusteredGraph {
  SnapshotIndex snapshot;
  std::vector<SuperNode> nodes;
  std::vector<Edge> edges;

  std::size_t attack_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(),
                                                  [](const auto& s) { return s.kind == SuperNodeKind::attack; }));
  }
  std::size_t normal_count() const { return nodes.size() - attack_count(); }
};

/// Space in which cluster members' features are averaged.
enum class AverageSpace {
  raw,         // mean of raw features, then re-scaled per snapshot
  normalized,  // mean of already-scaled features, kept as is
};

/// Ties count as normal, as in the node labelling rule.
inline FlowLabel hard_label_of(double behaviour_fraction) {
  return behaviour_fraction > 0.5 ? FlowLabel::attack : FlowLabel::normal;
}

/// Collapses every cluster of normal nodes into one super-node and keeps each
/// attack node as a singleton. Super-nodes are ordered clusters first (by id),
/// then attack singletons in graph order. Edges touching noise are dropped;
/// parallel edges between super-nodes are merged by summing weights, and
/// edges are emitted sorted by (src, dst).
inline ClusteredGraph aggregate(const SnapshotGraph& graph, const ClusterResult& result,
                                AverageSpace space = AverageSpace::raw) {
  const auto normals = normal_node_indices(graph);
  if (result.assignment.size() != normals.size())
    throw AssignmentMismatch(result.assignment.size(), normals.size());

  ClusteredGraph out;
  out.snapshot = graph.snapshot;
  out.nodes.resize(result.cluster_count);
  constexpr std::size_t kDropped = static_cast<std::size_t>(-1);
  std::vector<std::size_t> super_of(graph.nodes.size(), kDropped);

  std::vector<FeatureVector> raw_sum(result.cluster_count, FeatureVector{});
  std::vector<FeatureVector> scaled_sum(result.cluster_count, FeatureVector{});
  std::vector<double> label_sum(result.cluster_count, 0.0);
  for (std::size_t k = 0; k < normals.size(); ++k) {
    const int c = result.assignment[k];
    if (c == cluster::kNoise) continue;
    if (c < 0 || static_cast<std::size_t>(c) >= result.cluster_count)
      throw AssignmentMismatch(result.assignment.size(), normals.size());
    const auto& node = graph.nodes[normals[k]];
    super_of[normals[k]] = static_cast<std::size_t>(c);
    out.nodes[c].members.push_back(node.id);
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
      raw_sum[c][d] += node.raw[d];
      scaled_sum[c][d] += node.features[d];
    }
    label_sum[c] += node.is_attack() ? 1.0 : 0.0;
  }
  for (std::size_t c = 0; c < result.cluster_count; ++c) {
    auto& s = out.nodes[c];
    const double m = static_cast<double>(s.members.size());
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
      s.raw[d] = raw_sum[c][d] / m;
      s.features[d] = scaled_sum[c][d] / m;
    }
    s.behaviour_fraction = label_sum[c] / m;
    s.hard_label = hard_label_of(s.behaviour_fraction);
  }

  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& node = graph.nodes[i];
    if (!node.is_attack()) continue;
    super_of[i] = out.nodes.size();
    out.nodes.push_back({SuperNodeKind::attack, {node.id}, node.raw, node.features, 1.0, FlowLabel::attack});
  }

  if (space == AverageSpace::raw) {
    std::vector<FeatureVector> rows;
    rows.reserve(out.nodes.size());
    for (const auto& s : out.nodes) rows.push_back(s.raw);
    minmax_scale(rows);
    for (std::size_t i = 0; i < rows.size(); ++i) out.nodes[i].features = rows[i];
  }

  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> merged;
  for (const auto& e : graph.edges) {
    const auto s = super_of[e.src], d = super_of[e.dst];
    if (s == kDropped || d == kDropped) continue;
    merged[{s, d}] += e.weight;
  }
  out.edges.reserve(merged.size());
  for (const auto& [key, w] : merged) out.edges.push_back({key.first, key.second, w});
  return out;
}

}  // namespace flowgraph
