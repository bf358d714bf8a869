#include <gtest/gtest.h>

#include <sstream>

#include "flowgraph/graph_io.hpp"
#include "flowgraph/pipeline.hpp"

namespace fg = flowgraph;
namespace io = flowgraph::io;

namespace {

std::vector<fg::SnapshotGraph> graphs(std::uint64_t seed) {
  fg::synth::SynthConfig c;
  c.seed = seed;
  c.duration = 1800;
  c.n_normal_entities = 50;
  c.n_attack_entities = 8;
  c.flows_per_entity_rate = 0.01;
  return fg::pipeline::build_graphs(fg::synth::generate(c), 600.0);
}

void expect_same(const fg::SnapshotGraph& a, const fg::SnapshotGraph& b) {
  EXPECT_EQ(a.snapshot, b.snapshot);
  EXPECT_EQ(a.edges, b.edges);
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    EXPECT_EQ(a.nodes[i].id, b.nodes[i].id);
    EXPECT_EQ(a.nodes[i].label, b.nodes[i].label);
    EXPECT_EQ(a.nodes[i].raw, b.nodes[i].raw);
    EXPECT_EQ(a.nodes[i].features, b.nodes[i].features);
    EXPECT_EQ(a.nodes[i].attack_flow_count, b.nodes[i].attack_flow_count);
    EXPECT_EQ(a.nodes[i].total_flow_count, b.nodes[i].total_flow_count);
  }
}

}  // namespace

TEST(GraphIo, SnapshotGraphRoundTrip) {
  for (const auto& g : graphs(3)) {
    std::stringstream s;
    io::write_graph(s, g);
    const auto back = io::read_graph(s);
    expect_same(g, back);
    std::ostringstream again;
    io::write_graph(again, back);
    EXPECT_EQ(again.str(), s.str());
  }
}

TEST(GraphIo, ClusteredGraphRoundTrip) {
  const auto gs = graphs(4);
  for (auto space : {fg::AverageSpace::raw, fg::AverageSpace::normalized}) {
    for (const auto& cg : fg::pipeline::cluster_graphs(gs, {}, space).graphs) {
      std::stringstream s;
      io::write_clustered(s, cg);
      const auto back = io::read_clustered(s);
      EXPECT_EQ(back.snapshot, cg.snapshot);
      EXPECT_EQ(back.edges, cg.edges);
      ASSERT_EQ(back.nodes.size(), cg.nodes.size());
      for (std::size_t i = 0; i < cg.nodes.size(); ++i) {
        EXPECT_EQ(back.nodes[i].kind, cg.nodes[i].kind);
        EXPECT_EQ(back.nodes[i].members, cg.nodes[i].members);
        EXPECT_EQ(back.nodes[i].raw, cg.nodes[i].raw);
        EXPECT_EQ(back.nodes[i].features, cg.nodes[i].features);
        EXPECT_EQ(back.nodes[i].behaviour_fraction, cg.nodes[i].behaviour_fraction);
        EXPECT_EQ(back.nodes[i].hard_label, cg.nodes[i].hard_label);
      }
    }
  }
}

TEST(GraphIo, AssignmentRoundTrip) {
  const auto gs = graphs(5);
  const auto c = fg::pipeline::cluster_graphs(gs, {});
  for (std::size_t i = 0; i < gs.size(); ++i) {
    std::stringstream s;
    io::write_assignment(s, gs[i], c.results[i]);
    EXPECT_EQ(io::read_assignment(s), c.results[i]);
  }
}

TEST(GraphIo, AssignmentLengthChecked) {
  const auto gs = graphs(5);
  fg::ClusterResult wrong;
  wrong.assignment = {0};
  std::ostringstream s;
  EXPECT_THROW(io::write_assignment(s, gs.front(), wrong), fg::AssignmentMismatch);
}

TEST(GraphIo, Ipv6Entities) {
  const auto flows = std::vector<fg::FlowRecord>{
      {{"fe80::1", 5000}, {"2001:db8::2", 443}, 0.0, 1.0, 10, 20, 3, fg::FlowLabel::attack}};
  const auto g = fg::build_graph(flows);
  std::stringstream s;
  io::write_graph(s, g);
  expect_same(g, io::read_graph(s));
}

TEST(GraphIo, ManifestRoundTripAndNames) {
  std::vector<io::ManifestEntry> m = {{fg::SnapshotIndex::at(0, 600), "snapshot_000000.graph", 3, 2},
                                      {fg::SnapshotIndex::at(7, 600), "snapshot_000007.graph", 10, 0}};
  std::stringstream s;
  io::write_manifest(s, m);
  EXPECT_EQ(io::read_manifest(s), m);
  EXPECT_EQ(io::snapshot_file(42, "graph"), "snapshot_000042.graph");
  EXPECT_EQ(io::snapshot_file(1234567, "clustered"), "snapshot_1234567.clustered");
}

TEST(GraphIo, MalformedInputsRaiseFormatError) {
  const char* bad[] = {
      "",
      "flowgraph-graph 2\n",
      "flowgraph-graph 1\nsnapshot 0 0\n",
      "flowgraph-graph 1\nsnapshot 0 0 600\nnodes 1\n0,10.0.0.1,80,0,0,1,1,1,1,1,1,1,1\n",
      "flowgraph-graph 1\nsnapshot 0 0 600\nnodes 1\n0,10.0.0.1,80,2,0,1,1,1,1,1,1,1,1,1\nedges 0\n",
      "flowgraph-graph 1\nsnapshot 0 0 600\nnodes 1\n0,not-an-ip,80,0,0,1,1,1,1,1,1,1,1,1\nedges 0\n",
      "flowgraph-graph 1\nsnapshot 0 0 600\nnodes 1\n0,10.0.0.1,80,0,0,1,1,1,1,1,1,1,1,1\nedges 1\n0,1,1\n",
      "flowgraph-graph 1\nsnapshot 0 0 600\nnodes 1\n0,10.0.0.1,80,0,0,1,1,x,1,1,1,1,1,1\nedges 0\n",
  };
  for (const char* text : bad) {
    std::istringstream in(text);
    EXPECT_THROW(io::read_graph(in), fg::FormatError) << text;
  }
  std::istringstream ok("flowgraph-graph 1\r\nsnapshot 0 0 600\r\nnodes 1\r\n0,10.0.0.1,80,0,0,1,1,1,1,1,1,1,1,1\r\n"
                        "edges 0\r\n");
  EXPECT_NO_THROW(io::read_graph(ok));
}
