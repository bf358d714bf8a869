#include <gtest/gtest.h>

#include <atomic>
#include <sstream>

#include "flowgraph/pipeline.hpp"

namespace fg = flowgraph;
namespace pl = flowgraph::pipeline;

namespace {

std::vector<fg::FlowRecord> trace(std::uint64_t seed) {
  fg::synth::SynthConfig c;
  c.seed = seed;
  c.duration = 6000;
  c.n_normal_entities = 80;
  c.n_attack_entities = 16;
  c.flows_per_entity_rate = 0.01;
  return fg::synth::generate(c);
}

std::string dump(const std::vector<fg::SnapshotGraph>& gs) {
  std::ostringstream out;
  for (const auto& g : gs) fg::io::write_graph(out, g);
  return out.str();
}

std::string dump(const std::vector<fg::ClusteredGraph>& gs) {
  std::ostringstream out;
  for (const auto& g : gs) fg::io::write_clustered(out, g);
  return out.str();
}

}  // namespace

TEST(Pipeline, TrainCountSplit) {
  EXPECT_EQ(pl::train_count(0, 0.7), 0u);
  EXPECT_EQ(pl::train_count(1, 0.7), 1u);
  EXPECT_EQ(pl::train_count(2, 0.7), 1u);
  EXPECT_EQ(pl::train_count(10, 0.7), 7u);
  EXPECT_EQ(pl::train_count(144, 0.7), 100u);
  EXPECT_EQ(pl::train_count(3, 0.1), 1u);
  EXPECT_EQ(pl::train_count(3, 0.99), 2u);
}

TEST(Pipeline, ExperimentGrid) {
  const auto grid = pl::experiment_grid();
  ASSERT_EQ(grid.size(), 7u);
  for (const auto& p : grid) {
    EXPECT_EQ(p.min_pts, 2u);
    EXPECT_NO_THROW(p.validate());
  }
  EXPECT_EQ(grid.back().algorithm, fg::Algorithm::hdbscan);
  EXPECT_EQ(grid.back().min_cluster_size, 5u);
}

TEST(Pipeline, ParallelForCoversEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(257);
  pl::parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Pipeline, ParallelForRethrowsLowestFailure) {
  try {
    pl::parallel_for(50, 3, [](std::size_t i) {
      if (i == 17 || i == 40) throw fg::Error("fail " + std::to_string(i));
    });
    FAIL() << "no exception";
  } catch (const fg::Error& e) {
    EXPECT_STREQ(e.what(), "fail 17");
  }
}

// Outputs do not depend on the degree of parallelism.
TEST(Pipeline, JobsDoNotChangeResults) {
  const auto flows = trace(3);
  const auto g1 = pl::build_graphs(flows, 600, 1);
  const auto g4 = pl::build_graphs(flows, 600, 4);
  EXPECT_EQ(dump(g1), dump(g4));
  for (const auto& params : pl::experiment_grid()) {
    const auto c1 = pl::cluster_graphs(g1, params, fg::AverageSpace::raw, 1);
    const auto c4 = pl::cluster_graphs(g1, params, fg::AverageSpace::raw, 4);
    EXPECT_EQ(c1.results, c4.results) << params.tag();
    EXPECT_EQ(dump(c1.graphs), dump(c4.graphs)) << params.tag();
  }
  pl::GcnSettings s;
  s.epochs = 20;
  const auto clustered = pl::cluster_graphs(g1, {}).graphs;
  const auto t1 = pl::train_and_evaluate(clustered, s, 5, 1);
  const auto t4 = pl::train_and_evaluate(clustered, s, 5, 4);
  EXPECT_EQ(t1.model, t4.model);
  EXPECT_EQ(t1.training.loss_trace, t4.training.loss_trace);
}

TEST(Pipeline, ClusteringNeverGrowsNormalPopulation) {
  const auto graphs = pl::build_graphs(trace(8), 600);
  for (const auto& params : pl::experiment_grid()) {
    const auto c = pl::cluster_graphs(graphs, params);
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      EXPECT_LE(c.graphs[i].normal_count(), graphs[i].normal_count());
      EXPECT_EQ(c.graphs[i].attack_count(), graphs[i].attack_count());
    }
  }
}

TEST(Pipeline, TrainOnRawAndClusteredGraphs) {
  const auto graphs = pl::build_graphs(trace(4), 600);
  pl::GcnSettings s;
  s.epochs = 60;
  for (auto v : {fg::gcn::Variant::gcn, fg::gcn::Variant::cheb}) {
    s.variant = v;
    const auto raw = pl::train_and_evaluate(graphs, s, 1);
    EXPECT_EQ(raw.train_snapshots, 7u);
    EXPECT_EQ(raw.per_snapshot.size(), 3u);
    EXPECT_GE(raw.test_metrics.balanced_accuracy, 0.9);
    const auto clustered = pl::train_and_evaluate(pl::cluster_graphs(graphs, {}).graphs, s, 1);
    EXPECT_GE(clustered.test_metrics.balanced_accuracy, 0.9);
  }
}

TEST(Pipeline, ConfigValidation) {
  pl::PipelineConfig c;
  EXPECT_NO_THROW(c.validate());
  c.width = 0;
  EXPECT_THROW(c.validate(), fg::NonPositiveWidth);
  c = {};
  c.cluster.eps = 0;
  EXPECT_THROW(c.validate(), fg::InvalidParameter);
  c = {};
  c.jobs = 0;
  EXPECT_THROW(c.validate(), fg::InvalidParameter);
  c = {};
  c.gcn.train_fraction = 1.0;
  EXPECT_THROW(c.validate(), fg::InvalidParameter);
  EXPECT_THROW(pl::train_and_evaluate(std::vector<fg::SnapshotGraph>{}, {}, 1), fg::InvalidParameter);
}
