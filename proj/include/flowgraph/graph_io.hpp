#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "flowgraph/behavior_graph.hpp"
#include "flowgraph/cluster/result.hpp"
#include "flowgraph/density_cluster.hpp"
#include "flowgraph/error.hpp"
#include "flowgraph/text.hpp"

// Plain-text snapshot artifacts.
//
// Behaviour graph:
//   flowgraph-graph 1
//   snapshot <index> <window_start> <window_end>
//   nodes <n>
//   <node>,<ip>,<port>,<label>,<attack_flows>,<total_flows>,<raw f1>,...,<raw f8>
//   edges <m>
//   <src>,<dst>,<weight>
//
// Clustered graph:
//   flowgraph-clustered 1
//   snapshot <index> <window_start> <window_end>
//   nodes <n>
//   <node>,<kind>,<hard_label>,<behaviour_fraction>,<raw f1..f8>,<scaled f1..f8>,<ip#port;ip#port;...>
//   edges <m>
//   <src>,<dst>,<weight>
//
// Scaled features of a behaviour graph are not stored; they are recomputed
// from the raw ones on load.

namespace flowgraph::io {

namespace detail {

class LineReader {
 public:
  LineReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  std::string next() {
    std::string line;
    if (!next_if(line)) fail("unexpected end of input");
    return line;
  }

  /// Next non-blank line, or false at end of input.
  bool next_if(std::string& line) {
    while (text::getline_any(in_, line)) {
      ++line_no_;
      if (!text::trim(line).empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw FormatError(what_ + " line " + std::to_string(line_no_) + ": " + why);
  }

  template <typename T>
  T number(std::string_view s) const {
    auto v = text::parse_number<T>(text::trim(s));
    if (!v) fail("bad number '" + std::string(s) + "'");
    return *v;
  }

  /// Reads "<keyword> <v1> <v2> ..." and returns the values.
  std::vector<std::string_view> keyed(std::string_view keyword, std::size_t values, std::string& storage) {
    storage = next();
    auto parts = text::split(storage, ' ');
    if (parts.size() != values + 1 || parts[0] != keyword) fail("expected '" + std::string(keyword) + "'");
    parts.erase(parts.begin());
    return parts;
  }

  std::vector<std::string_view> fields(std::size_t expected, std::string& storage) {
    storage = next();
    auto parts = text::split(storage);
    if (parts.size() != expected)
      fail("expected " + std::to_string(expected) + " fields, got " + std::to_string(parts.size()));
    return parts;
  }

 private:
  std::istream& in_;
  std::string what_;
  std::size_t line_no_ = 0;
};

inline void write_snapshot(std::ostream& out, const SnapshotIndex& s) {
  out << "snapshot " << s.index << ' ' << text::format_double(s.window_start) << ' '
      << text::format_double(s.window_end) << '\n';
}

inline SnapshotIndex read_snapshot(LineReader& r) {
  std::string line;
  auto v = r.keyed("snapshot", 3, line);
  return {r.number<std::uint64_t>(v[0]), r.number<double>(v[1]), r.number<double>(v[2])};
}

inline void write_features(std::ostream& out, const FeatureVector& f) {
  for (double v : f) out << ',' << text::format_double(v);
}

inline FeatureVector read_features(LineReader& r, const std::vector<std::string_view>& parts, std::size_t from) {
  FeatureVector f{};
  for (std::size_t d = 0; d < kFeatureDim; ++d) f[d] = r.number<double>(parts[from + d]);
  return f;
}

inline void write_edges(std::ostream& out, const std::vector<Edge>& edges) {
  out << "edges " << edges.size() << '\n';
  for (const auto& e : edges) out << e.src << ',' << e.dst << ',' << e.weight << '\n';
}

inline std::vector<Edge> read_edges(LineReader& r, std::size_t nodes) {
  std::string line;
  const auto m = r.number<std::size_t>(r.keyed("edges", 1, line)[0]);
  std::vector<Edge> edges;
  edges.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto p = r.fields(3, line);
    Edge e{r.number<std::size_t>(p[0]), r.number<std::size_t>(p[1]), r.number<std::uint64_t>(p[2])};
    if (e.src >= nodes || e.dst >= nodes) r.fail("edge endpoint out of range");
    edges.push_back(e);
  }
  return edges;
}

inline FlowLabel read_label(const LineReader& r, std::string_view s) {
  const auto v = r.number<int>(s);
  if (v != 0 && v != 1) r.fail("label must be 0 or 1");
  return v ? FlowLabel::attack : FlowLabel::normal;
}

inline void expect_header(LineReader& r, std::string_view header) {
  if (text::trim(r.next()) != header) r.fail("expected header '" + std::string(header) + "'");
}

inline EntityId read_entity(const LineReader& r, std::string_view s) {
  const auto hash = s.rfind('#');
  if (hash == std::string_view::npos) r.fail("member '" + std::string(s) + "' is not ip#port");
  EntityId id{std::string(s.substr(0, hash)), r.number<std::uint16_t>(s.substr(hash + 1))};
  if (!is_valid_ip(id.ip)) r.fail("bad member address '" + id.ip + "'");
  return id;
}

}  // namespace detail

inline constexpr std::string_view kGraphHeader = "flowgraph-graph 1";
inline constexpr std::string_view kClusteredHeader = "flowgraph-clustered 1";

inline void write_graph(std::ostream& out, const SnapshotGraph& g) {
  out << kGraphHeader << '\n';
  detail::write_snapshot(out, g.snapshot);
  out << "nodes " << g.nodes.size() << '\n';
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    out << i << ',' << n.id.ip << ',' << n.id.port << ',' << static_cast<int>(n.label) << ','
        << n.attack_flow_count << ',' << n.total_flow_count;
    detail::write_features(out, n.raw);
    out << '\n';
  }
  detail::write_edges(out, g.edges);
}

inline SnapshotGraph read_graph(std::istream& in, const std::string& what = "graph") {
  detail::LineReader r(in, what);
  detail::expect_header(r, kGraphHeader);
  SnapshotGraph g;
  g.snapshot = detail::read_snapshot(r);
  std::string line;
  const auto n = r.number<std::size_t>(r.keyed("nodes", 1, line)[0]);
  g.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = r.fields(6 + kFeatureDim, line);
    if (r.number<std::size_t>(p[0]) != i) r.fail("node rows out of order");
    auto& node = g.nodes[i];
    node.id = {std::string(p[1]), r.number<std::uint16_t>(p[2])};
    if (!is_valid_ip(node.id.ip)) r.fail("bad address '" + node.id.ip + "'");
    node.label = detail::read_label(r, p[3]);
    node.attack_flow_count = r.number<std::uint64_t>(p[4]);
    node.total_flow_count = r.number<std::uint64_t>(p[5]);
    node.raw = detail::read_features(r, p, 6);
  }
  g.edges = detail::read_edges(r, n);
  normalize_features(g);
  return g;
}

inline void write_clustered(std::ostream& out, const ClusteredGraph& g) {
  out << kClusteredHeader << '\n';
  detail::write_snapshot(out, g.snapshot);
  out << "nodes " << g.nodes.size() << '\n';
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& s = g.nodes[i];
    out << i << ',' << (s.kind == SuperNodeKind::cluster ? "cluster" : "attack") << ','
        << static_cast<int>(s.hard_label) << ',' << text::format_double(s.behaviour_fraction);
    detail::write_features(out, s.raw);
    detail::write_features(out, s.features);
    out << ',';
    for (std::size_t m = 0; m < s.members.size(); ++m) out << (m ? ";" : "") << s.members[m];
    out << '\n';
  }
  detail::write_edges(out, g.edges);
}

inline ClusteredGraph read_clustered(std::istream& in, const std::string& what = "clustered graph") {
  detail::LineReader r(in, what);
  detail::expect_header(r, kClusteredHeader);
  ClusteredGraph g;
  g.snapshot = detail::read_snapshot(r);
  std::string line;
  const auto n = r.number<std::size_t>(r.keyed("nodes", 1, line)[0]);
  g.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = r.fields(5 + 2 * kFeatureDim, line);
    if (r.number<std::size_t>(p[0]) != i) r.fail("node rows out of order");
    auto& s = g.nodes[i];
    if (p[1] == "cluster")
      s.kind = SuperNodeKind::cluster;
    else if (p[1] == "attack")
      s.kind = SuperNodeKind::attack;
    else
      r.fail("unknown super-node kind '" + std::string(p[1]) + "'");
    s.hard_label = detail::read_label(r, p[2]);
    s.behaviour_fraction = r.number<double>(p[3]);
    s.raw = detail::read_features(r, p, 4);
    s.features = detail::read_features(r, p, 4 + kFeatureDim);
    for (auto m : text::split(p.back(), ';'))
      if (!m.empty()) s.members.push_back(detail::read_entity(r, m));
  }
  g.edges = detail::read_edges(r, n);
  return g;
}

inline constexpr std::string_view kAssignmentHeader = "node_index,cluster_id";

/// One row per normal node of the snapshot graph; `node_index` is the node's
/// index in that graph and noise is -1.
inline void write_assignment(std::ostream& out, const SnapshotGraph& graph, const ClusterResult& result) {
  const auto normals = normal_node_indices(graph);
  if (normals.size() != result.assignment.size())
    throw AssignmentMismatch(result.assignment.size(), normals.size());
  out << kAssignmentHeader << '\n';
  for (std::size_t i = 0; i < normals.size(); ++i) out << normals[i] << ',' << result.assignment[i] << '\n';
}

inline ClusterResult read_assignment(std::istream& in, const std::string& what = "assignment") {
  detail::LineReader r(in, what);
  detail::expect_header(r, kAssignmentHeader);
  ClusterResult res;
  std::string line;
  int max_id = kNoise;
  while (r.next_if(line)) {
    auto p = text::split(line);
    if (p.size() != 2) r.fail("expected node_index,cluster_id");
    const int id = r.number<int>(p[1]);
    if (id < kNoise) r.fail("cluster id below -1");
    res.assignment.push_back(id);
    max_id = std::max(max_id, id);
  }
  res.cluster_count = static_cast<std::size_t>(max_id + 1);
  return res;
}

/// Manifest of a stage directory: one row per snapshot file, in index order.
struct ManifestEntry {
  SnapshotIndex snapshot;
  std::string file;  // relative to the manifest's directory
  std::size_t nodes = 0;
  std::size_t edges = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline constexpr std::string_view kManifestHeader = "snapshot,window_start,window_end,file,nodes,edges";

inline void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries) {
  out << kManifestHeader << '\n';
  for (const auto& e : entries)
    out << e.snapshot.index << ',' << text::format_double(e.snapshot.window_start) << ','
        << text::format_double(e.snapshot.window_end) << ',' << e.file << ',' << e.nodes << ',' << e.edges << '\n';
}

inline std::vector<ManifestEntry> read_manifest(std::istream& in, const std::string& what = "manifest") {
  detail::LineReader r(in, what);
  detail::expect_header(r, kManifestHeader);
  std::vector<ManifestEntry> entries;
  std::string line;
  while (r.next_if(line)) {
    auto p = text::split(line);
    if (p.size() != 6) r.fail("expected 6 manifest fields");
    entries.push_back({{r.number<std::uint64_t>(p[0]), r.number<double>(p[1]), r.number<double>(p[2])},
                       std::string(text::trim(p[3])),
                       r.number<std::size_t>(p[4]),
                       r.number<std::size_t>(p[5])});
  }
  return entries;
}

/// `snapshot_000042.<ext>`; zero padding keeps directory listings in order.
inline std::string snapshot_file(std::uint64_t index, std::string_view ext) {
  std::string digits = std::to_string(index);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return "snapshot_" + digits + "." + std::string(ext);
}

}  // namespace flowgraph::io
