#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <set>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flowgraph/flow_model.hpp"
#include "flowgraph/temporal.hpp"

namespace flowgraph {

inline constexpr std::size_t kFeatureDim = 8;
using FeatureVector = std::array<double, kFeatureDim>;

/// Feature slots, in vector order.
enum Feature : std::size_t {
  kInDegree,        // distinct predecessors
  kOutDegree,       // distinct successors
  kFlowCount,       // incident flows, counted once per endpoint
  kBytesSent,
  kBytesReceived,
  kPackets,
  kMeanDuration,
  kDistinctDstPorts  // over outgoing flows
};

struct BehaviorNode {
  EntityId id;
  FlowLabel label = FlowLabel::normal;
  FeatureVector raw{};       // un-scaled behaviour features
  FeatureVector features{};  // per-snapshot min-max scaled copy of `raw`
  std::uint64_t attack_flow_count = 0;
  std::uint64_t total_flow_count = 0;

  bool is_attack() const noexcept { return label == FlowLabel::attack; }
};

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  std::uint64_t weight = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct SnapshotGraph {
  SnapshotIndex snapshot;
  std::vector<BehaviorNode> nodes;
  std::vector<Edge> edges;

  std::size_t normal_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return !n.is_attack(); }));
  }
  std::size_t attack_count() const { return nodes.size() - normal_count(); }
};

/// Majority rule: attack iff attack flows strictly outnumber normal flows.
/// A draw is normal.
inline FlowLabel majority_label(std::uint64_t attack_flows, std::uint64_t total_flows) {
  return attack_flows > total_flows - attack_flows ? FlowLabel::attack : FlowLabel::normal;
}

/// (src node, dst node) of each flow, aligned with the flow list.
using FlowEndpoints = std::vector<std::pair<std::size_t, std::size_t>>;

/// Counts incident flows per node and applies the majority rule. A flow is
/// counted once per endpoint, so a self-loop counts twice for its node.
inline void label_nodes(std::vector<BehaviorNode>& nodes, const std::vector<FlowRecord>& flows,
                        const FlowEndpoints& endpoints) {
  for (auto& n : nodes) n.attack_flow_count = n.total_flow_count = 0;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    const std::uint64_t attack = flows[i].is_attack() ? 1 : 0;
    for (std::size_t node : {endpoints[i].first, endpoints[i].second}) {
      nodes[node].total_flow_count += 1;
      nodes[node].attack_flow_count += attack;
    }
  }
  for (auto& n : nodes) n.label = majority_label(n.attack_flow_count, n.total_flow_count);
}

/// Label-free behaviour features of one node. `outgoing` and `incoming` index
/// into `flows`; a self-loop flow appears in both.
inline FeatureVector extract_features(const std::vector<FlowRecord>& flows, const FlowEndpoints& endpoints,
                                      const std::vector<std::size_t>& outgoing,
                                      const std::vector<std::size_t>& incoming) {
  FeatureVector f{};
  std::set<std::size_t> preds;
  std::set<std::size_t> succs;
  std::set<std::uint16_t> ports;
  double duration_sum = 0.0;
  for (std::size_t i : outgoing) {
    const auto& r = flows[i];
    succs.insert(endpoints[i].second);
    ports.insert(r.dst.port);
    f[kBytesSent] += static_cast<double>(r.bytes_src_to_dst);
    f[kBytesReceived] += static_cast<double>(r.bytes_dst_to_src);
    f[kPackets] += static_cast<double>(r.packets_total);
    duration_sum += r.duration;
  }
  for (std::size_t i : incoming) {
    const auto& r = flows[i];
    preds.insert(endpoints[i].first);
    f[kBytesSent] += static_cast<double>(r.bytes_dst_to_src);
    f[kBytesReceived] += static_cast<double>(r.bytes_src_to_dst);
    f[kPackets] += static_cast<double>(r.packets_total);
    duration_sum += r.duration;
  }
  const auto incidences = outgoing.size() + incoming.size();
  f[kInDegree] = static_cast<double>(preds.size());
  f[kOutDegree] = static_cast<double>(succs.size());
  f[kFlowCount] = static_cast<double>(incidences);
  f[kMeanDuration] = incidences ? duration_sum / static_cast<double>(incidences) : 0.0;
  f[kDistinctDstPorts] = static_cast<double>(ports.size());
  return f;
}

/// Min-max scales each dimension of `rows` to [0, 1] in place. Constant
/// dimensions map to 0.
inline void minmax_scale(std::vector<FeatureVector>& rows) {
  if (rows.empty()) return;
  for (std::size_t d = 0; d < kFeatureDim; ++d) {
    double lo = rows.front()[d], hi = rows.front()[d];
    for (const auto& r : rows) {
      lo = std::min(lo, r[d]);
      hi = std::max(hi, r[d]);
    }
    const double span = hi - lo;
    for (auto& r : rows) r[d] = span > 0.0 ? (r[d] - lo) / span : 0.0;
  }
}

/// Recomputes `features` of every node as the per-snapshot scaling of `raw`.
inline void normalize_features(SnapshotGraph& graph) {
  std::vector<FeatureVector> rows;
  rows.reserve(graph.nodes.size());
  for (const auto& n : graph.nodes) rows.push_back(n.raw);
  minmax_scale(rows);
  for (std::size_t i = 0; i < rows.size(); ++i) graph.nodes[i].features = rows[i];
}

/// Builds the labelled behaviour graph of one snapshot.
///
/// Nodes appear in first-appearance order (src before dst within a flow) and
/// edges in first-appearance order of their directed (src, dst) pair. The
/// returned graph already carries normalized features.
inline SnapshotGraph build_graph(const std::vector<FlowRecord>& flows, SnapshotIndex window = {}) {
  SnapshotGraph g;
  g.snapshot = window;

  std::unordered_map<EntityId, std::size_t, EntityIdHash> index;
  auto intern = [&](const EntityId& id) {
    auto [it, inserted] = index.try_emplace(id, g.nodes.size());
    if (inserted) g.nodes.push_back(BehaviorNode{.id = id});
    return it->second;
  };

  FlowEndpoints endpoints;
  endpoints.reserve(flows.size());
  for (const auto& f : flows) {
    const auto s = intern(f.src);
    const auto d = intern(f.dst);
    endpoints.emplace_back(s, d);
  }

  std::vector<std::vector<std::size_t>> outgoing(g.nodes.size()), incoming(g.nodes.size());
  std::unordered_map<std::uint64_t, std::size_t> edge_index;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    const auto [s, d] = endpoints[i];
    outgoing[s].push_back(i);
    incoming[d].push_back(i);
    const std::uint64_t key = (static_cast<std::uint64_t>(s) << 32) | static_cast<std::uint64_t>(d);
    auto [it, inserted] = edge_index.try_emplace(key, g.edges.size());
    if (inserted) g.edges.push_back({s, d, 0});
    g.edges[it->second].weight += 1;
  }

  label_nodes(g.nodes, flows, endpoints);
  for (std::size_t n = 0; n < g.nodes.size(); ++n)
    g.nodes[n].raw = extract_features(flows, endpoints, outgoing[n], incoming[n]);
  normalize_features(g);
  return g;
}

}  // namespace flowgraph
