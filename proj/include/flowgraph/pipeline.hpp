#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "flowgraph/behavior_graph.hpp"
#include "flowgraph/density_cluster.hpp"
#include "flowgraph/error.hpp"
#include "flowgraph/flow_model.hpp"
#include "flowgraph/gcn.hpp"
#include "flowgraph/graph_io.hpp"
#include "flowgraph/report.hpp"
#include "flowgraph/synth.hpp"
#include "flowgraph/temporal.hpp"
#include "flowgraph/text.hpp"

namespace flowgraph::pipeline {

namespace fs = std::filesystem;

enum class TrainInput { clustered, graphs };

inline TrainInput parse_train_input(std::string_view s) {
  if (s == "clustered") return TrainInput::clustered;
  if (s == "graphs") return TrainInput::graphs;
  throw InvalidParameter("unknown training input '" + std::string(s) + "'");
}

struct GcnSettings {
  gcn::Variant variant = gcn::Variant::gcn;
  std::size_t k = 3;  // Chebyshev order; ignored by gcn
  std::size_t hidden = 16;
  double learning_rate = 0.01;
  std::size_t epochs = 200;
  gcn::Optimizer optimizer = gcn::Optimizer::adam;
  bool weighted_adjacency = false;
  double train_fraction = 0.7;
  TrainInput input = TrainInput::clustered;
};

struct PipelineConfig {
  std::vector<std::string> inputs;
  FlowSchema schema = FlowSchema::synthetic;
  RowPolicy row_policy = RowPolicy::abort;
  double width = 600.0;
  ClusterParams cluster;
  AverageSpace average = AverageSpace::raw;
  GcnSettings gcn;
  synth::SynthConfig synth;
  std::string out_dir = "flowgraph_out";
  std::string dataset = "flows";
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  std::function<void(std::string_view)> log;  // progress messages; may be empty

  void validate() const {
    if (!(width > 0.0) || !std::isfinite(width)) throw NonPositiveWidth();
    cluster.validate();
    if (jobs == 0) throw InvalidParameter("jobs must be >= 1");
    if (gcn.hidden == 0) throw InvalidParameter("hidden size must be >= 1");
    if (gcn.variant == gcn::Variant::cheb && gcn.k < 1) throw InvalidParameter("Chebyshev order k must be >= 1");
    if (!(gcn.learning_rate >= 0.0)) throw InvalidParameter("learning rate must be >= 0");
    if (!(gcn.train_fraction > 0.0 && gcn.train_fraction < 1.0))
      throw InvalidParameter("train fraction must lie in (0, 1)");
  }

  void note(const std::string& msg) const {
    if (log) log(msg);
  }
};

/// The seven clustering configurations of the reference experiments.
inline std::vector<ClusterParams> experiment_grid() {
  std::vector<ClusterParams> grid;
  for (auto algo : {Algorithm::optics, Algorithm::dbscan})
    for (double eps : {0.2, 0.5, 0.8}) grid.push_back({algo, eps, 2, 5});
  grid.push_back({Algorithm::hdbscan, 0.2, 2, 5});
  return grid;
}

/// Runs fn(0..n-1) on up to `jobs` threads. Results must be written to
/// per-index slots; the exception of the lowest failing index is rethrown.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Rethrows a toolkit error with a location prefix; other exceptions pass.
template <typename Fn>
auto with_context(const std::string& where, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(where + ": " + e.what());
  }
}

// ---- in-memory stages ------------------------------------------------------

inline std::vector<SnapshotGraph> build_graphs(const std::vector<FlowRecord>& flows, double width,
                                               std::size_t jobs = 1) {
  auto snapshots = dissect(flows, width);
  std::vector<SnapshotGraph> graphs(snapshots.size());
  parallel_for(snapshots.size(), jobs,
               [&](std::size_t i) { graphs[i] = build_graph(snapshots[i].flows, snapshots[i].window); });
  return graphs;
}

struct Clustering {
  std::vector<ClusterResult> results;
  std::vector<ClusteredGraph> graphs;
};

inline Clustering cluster_graphs(const std::vector<SnapshotGraph>& graphs, const ClusterParams& params,
                                 AverageSpace space = AverageSpace::raw, std::size_t jobs = 1) {
  params.validate();
  Clustering c;
  c.results.resize(graphs.size());
  c.graphs.resize(graphs.size());
  parallel_for(graphs.size(), jobs, [&](std::size_t i) {
    with_context("snapshot " + std::to_string(graphs[i].snapshot.index), [&] {
      c.results[i] = cluster_graph(graphs[i], params);
      c.graphs[i] = aggregate(graphs[i], c.results[i], space);
    });
  });
  return c;
}

/// Temporal split: the first `fraction` of snapshots (by position, which is
/// index order) train, the rest test. Both sides are non-empty when n >= 2.
inline std::size_t train_count(std::size_t n, double fraction) {
  if (n < 2) return n;
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

struct SnapshotMetrics {
  std::uint64_t snapshot = 0;
  std::size_t nodes = 0;
  gcn::Metrics metrics;
};

struct TrainOutcome {
  gcn::GcnModel model;
  gcn::TrainResult training;
  std::size_t train_snapshots = 0;
  gcn::Metrics train_metrics;
  gcn::Metrics test_metrics;
  std::vector<SnapshotMetrics> per_snapshot;  // test split
};

template <typename Graph>
TrainOutcome train_and_evaluate(const std::vector<Graph>& graphs, const GcnSettings& s, std::uint64_t seed,
                                std::size_t jobs = 1) {
  std::vector<const Graph*> usable;
  for (const auto& g : graphs)
    if (!g.nodes.empty()) usable.push_back(&g);
  if (usable.empty()) throw InvalidParameter("no non-empty snapshot graphs to train on");

  std::vector<gcn::GraphInput> inputs(usable.size());
  parallel_for(usable.size(), jobs, [&](std::size_t i) {
    inputs[i] = gcn::prepare(*usable[i], s.variant, s.k, s.weighted_adjacency);
  });

  TrainOutcome out;
  out.train_snapshots = train_count(inputs.size(), s.train_fraction);
  const std::span<const gcn::GraphInput> all(inputs);
  const auto train = all.first(out.train_snapshots);
  const auto test = all.subspan(out.train_snapshots);

  out.model = gcn::init_model(s.variant, s.k, s.hidden, seed);
  out.training = gcn::train(out.model, train,
                            {.learning_rate = s.learning_rate,
                             .epochs = s.epochs,
                             .optimizer = s.optimizer,
                             .class_weights = std::nullopt});
  out.train_metrics = gcn::evaluate(out.model, train);
  out.test_metrics = gcn::evaluate(out.model, test);
  out.per_snapshot.resize(test.size());
  parallel_for(test.size(), jobs, [&](std::size_t i) {
    out.per_snapshot[i] = {usable[out.train_snapshots + i]->snapshot.index, test[i].nodes(),
                           gcn::evaluate(out.model, test.subspan(i, 1))};
  });
  return out;
}

// ---- on-disk layout --------------------------------------------------------

inline fs::path flows_path(const PipelineConfig& c) { return fs::path(c.out_dir) / "flows.csv"; }
inline fs::path graphs_dir(const PipelineConfig& c) { return fs::path(c.out_dir) / "graphs"; }
inline fs::path clusters_root(const PipelineConfig& c) { return fs::path(c.out_dir) / "clusters"; }
inline fs::path clusters_dir(const PipelineConfig& c, const ClusterParams& p) {
  return clusters_root(c) / p.tag();
}
inline fs::path report_dir(const PipelineConfig& c) { return fs::path(c.out_dir) / "report"; }

inline std::string model_tag(const PipelineConfig& c) {
  std::string tag = c.gcn.input == TrainInput::clustered ? c.cluster.tag() : "graphs";
  tag += "_" + std::string(gcn::to_string(c.gcn.variant));
  if (c.gcn.variant == gcn::Variant::cheb) tag += "_k" + std::to_string(c.gcn.k);
  return tag;
}
inline fs::path model_dir(const PipelineConfig& c) { return fs::path(c.out_dir) / "models" / model_tag(c); }

namespace detail {

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  auto out = text::open_output(path.string());
  writer(out);
  out.flush();
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

/// Replaces `dir` with a fresh empty directory so re-runs leave no stale files.
inline void reset_dir(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
}

inline std::vector<io::ManifestEntry> load_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.csv";
  if (!fs::exists(path)) throw Error("missing '" + path.string() + "'; run the upstream stage first");
  auto in = text::open_input(path.string());
  return io::read_manifest(in, path.string());
}

inline void write_params(const fs::path& path, const ClusterParams& p, AverageSpace space) {
  write_file(path, [&](std::ostream& out) {
    out << "algorithm=" << to_string(p.algorithm) << '\n'
        << "eps=" << text::format_double(p.eps) << '\n'
        << "min_pts=" << p.min_pts << '\n'
        << "min_cluster_size=" << p.min_cluster_size << '\n'
        << "average=" << (space == AverageSpace::raw ? "raw" : "normalized") << '\n';
  });
}

inline ClusterParams read_params(const fs::path& path) {
  auto in = text::open_input(path.string());
  ClusterParams p;
  std::string line;
  auto number = [&](std::string_view v, auto tag) {
    auto n = text::parse_number<decltype(tag)>(v);
    if (!n) throw FormatError(path.string() + ": bad value '" + std::string(v) + "'");
    return *n;
  };
  while (text::getline_any(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string_view key = text::trim(std::string_view(line).substr(0, eq));
    const std::string_view value = text::trim(std::string_view(line).substr(eq + 1));
    if (key == "algorithm")
      p.algorithm = parse_algorithm(value);
    else if (key == "eps")
      p.eps = number(value, 0.0);
    else if (key == "min_pts")
      p.min_pts = number(value, std::size_t{});
    else if (key == "min_cluster_size")
      p.min_cluster_size = number(value, std::size_t{});
  }
  return p;
}

inline void write_metrics_row(std::ostream& out, std::string_view split, std::string_view snapshot, std::size_t nodes,
                              const gcn::Metrics& m) {
  out << split << ',' << snapshot << ',' << nodes << ',' << m.support[0] << ',' << m.support[1] << ','
      << text::format_double(m.accuracy) << ',' << text::format_double(m.precision[0]) << ','
      << text::format_double(m.recall[0]) << ',' << text::format_double(m.precision[1]) << ','
      << text::format_double(m.recall[1]) << ',' << text::format_double(m.balanced_accuracy) << '\n';
}

}  // namespace detail

inline std::vector<SnapshotGraph> load_graphs(const PipelineConfig& c) {
  const auto dir = graphs_dir(c);
  std::vector<SnapshotGraph> graphs;
  for (const auto& e : detail::load_manifest(dir)) {
    const auto path = (dir / e.file).string();
    auto in = text::open_input(path);
    graphs.push_back(io::read_graph(in, path));
  }
  return graphs;
}

inline std::vector<ClusteredGraph> load_clustered(const fs::path& dir) {
  std::vector<ClusteredGraph> graphs;
  for (const auto& e : detail::load_manifest(dir)) {
    const auto path = (dir / e.file).string();
    auto in = text::open_input(path);
    graphs.push_back(io::read_clustered(in, path));
  }
  return graphs;
}

// ---- stage commands --------------------------------------------------------

/// Writes a synthetic trace to <out>/flows.csv.
inline fs::path cmd_synth(const PipelineConfig& c) {
  fs::create_directories(c.out_dir);
  auto sc = c.synth;
  sc.seed = c.seed;
  const auto flows = synth::generate(sc);
  const auto path = flows_path(c);
  detail::write_file(path, [&](std::ostream& out) { write_flows(out, flows); });
  c.note("synth: " + std::to_string(flows.size()) + " flows -> " + path.string());
  return path;
}

/// Ingest, dissect and build one behaviour graph per non-empty snapshot.
inline std::vector<SnapshotGraph> cmd_graph(const PipelineConfig& c) {
  c.validate();
  if (c.inputs.empty()) throw InvalidParameter("no input flow files given");
  for (const auto& p : c.inputs)
    if (!fs::exists(p)) throw Error("input '" + p + "' does not exist");
  const auto table = with_context("reading " + c.inputs.front() + (c.inputs.size() > 1 ? " (+more)" : ""),
                                  [&] { return parse_flows(c.inputs, c.schema, c.row_policy); });
  if (table.skipped_rows) c.note("graph: skipped " + std::to_string(table.skipped_rows) + " malformed rows");
  auto graphs = build_graphs(table.records, c.width, c.jobs);

  const auto dir = graphs_dir(c);
  detail::reset_dir(dir);
  std::vector<io::ManifestEntry> manifest(graphs.size());
  parallel_for(graphs.size(), c.jobs, [&](std::size_t i) {
    const auto& g = graphs[i];
    manifest[i] = {g.snapshot, io::snapshot_file(g.snapshot.index, "graph"), g.nodes.size(), g.edges.size()};
    detail::write_file(dir / manifest[i].file, [&](std::ostream& out) { io::write_graph(out, g); });
  });
  detail::write_file(dir / "manifest.csv", [&](std::ostream& out) { io::write_manifest(out, manifest); });
  c.note("graph: " + std::to_string(table.records.size()) + " flows, " + std::to_string(graphs.size()) +
         " snapshots -> " + dir.string());
  return graphs;
}

/// Clusters every snapshot graph under <out>/graphs with the given params.
inline Clustering cmd_cluster(const PipelineConfig& c, const ClusterParams& params) {
  c.validate();
  params.validate();
  const auto graphs = load_graphs(c);
  auto clustering = cluster_graphs(graphs, params, c.average, c.jobs);

  const auto dir = clusters_dir(c, params);
  detail::reset_dir(dir);
  std::vector<io::ManifestEntry> manifest(graphs.size());
  parallel_for(graphs.size(), c.jobs, [&](std::size_t i) {
    const auto& g = clustering.graphs[i];
    manifest[i] = {g.snapshot, io::snapshot_file(g.snapshot.index, "clustered"), g.nodes.size(), g.edges.size()};
    detail::write_file(dir / manifest[i].file, [&](std::ostream& out) { io::write_clustered(out, g); });
    detail::write_file(dir / io::snapshot_file(g.snapshot.index, "assign.csv"),
                       [&](std::ostream& out) { io::write_assignment(out, graphs[i], clustering.results[i]); });
  });
  detail::write_file(dir / "manifest.csv", [&](std::ostream& out) { io::write_manifest(out, manifest); });
  detail::write_params(dir / "params.txt", params, c.average);
  std::size_t before = 0, after = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    before += graphs[i].normal_count();
    after += clustering.graphs[i].normal_count();
  }
  c.note("cluster " + params.tag() + ": " + std::to_string(before) + " normal nodes -> " + std::to_string(after) +
         " super-nodes -> " + dir.string());
  return clustering;
}

inline Clustering cmd_cluster(const PipelineConfig& c) { return cmd_cluster(c, c.cluster); }

inline TrainOutcome cmd_train(const PipelineConfig& c) {
  c.validate();
  TrainOutcome out;
  if (c.gcn.input == TrainInput::clustered)
    out = train_and_evaluate(load_clustered(clusters_dir(c, c.cluster)), c.gcn, c.seed, c.jobs);
  else
    out = train_and_evaluate(load_graphs(c), c.gcn, c.seed, c.jobs);

  const auto dir = model_dir(c);
  detail::reset_dir(dir);
  detail::write_file(dir / "model.txt", [&](std::ostream& o) { gcn::save_model(o, out.model); });
  detail::write_file(dir / "loss.csv", [&](std::ostream& o) {
    o << "epoch,loss\n";
    for (std::size_t e = 0; e < out.training.loss_trace.size(); ++e)
      o << e << ',' << text::format_double(out.training.loss_trace[e]) << '\n';
  });
  detail::write_file(dir / "metrics.csv", [&](std::ostream& o) {
    o << "split,snapshot,nodes,normal,attack,accuracy,precision_normal,recall_normal,precision_attack,"
         "recall_attack,balanced_accuracy\n";
    std::size_t train_nodes = 0, test_nodes = 0;
    for (std::size_t c2 = 0; c2 < gcn::kClasses; ++c2) {
      train_nodes += out.train_metrics.support[c2];
      test_nodes += out.test_metrics.support[c2];
    }
    detail::write_metrics_row(o, "train", "all", train_nodes, out.train_metrics);
    detail::write_metrics_row(o, "test", "all", test_nodes, out.test_metrics);
    for (const auto& s : out.per_snapshot)
      detail::write_metrics_row(o, "test", std::to_string(s.snapshot), s.nodes, s.metrics);
  });
  c.note("train " + model_tag(c) + ": " + std::to_string(out.train_snapshots) + " train snapshots, test balanced " +
         "accuracy " + text::format_fixed(out.test_metrics.balanced_accuracy, 4) + " -> " + dir.string());
  return out;
}

struct ReportOutcome {
  std::vector<report::ClusteringRun> runs;
  std::vector<report::EffectsRow> table;
};

/// Population series for every clustering found under <out>/clusters, plus
/// the clustering-effects table across them.
inline ReportOutcome cmd_report(const PipelineConfig& c) {
  const auto graphs = load_graphs(c);
  std::vector<std::pair<ClusterParams, fs::path>> found;
  if (fs::exists(clusters_root(c)))
    for (const auto& entry : fs::directory_iterator(clusters_root(c)))
      if (entry.is_directory() && fs::exists(entry.path() / "params.txt"))
        found.emplace_back(detail::read_params(entry.path() / "params.txt"), entry.path());
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    if (a.first.algorithm != b.first.algorithm) return a.first.algorithm < b.first.algorithm;
    return a.first.eps < b.first.eps;
  });

  const auto dir = report_dir(c);
  detail::reset_dir(dir);
  ReportOutcome out;
  if (found.empty()) {
    // Population of the unclustered graphs only.
    report::PopulationSeries s;
    for (const auto& g : graphs) {
      s.rows.push_back({g.snapshot, g.normal_count(), g.attack_count(), g.normal_count()});
      s.normal_total += g.normal_count();
      s.attack_total += g.attack_count();
      s.clustered_normal_total += g.normal_count();
    }
    detail::write_file(dir / (c.dataset + "_none.csv"), [&](std::ostream& o) { report::write_population(o, s); });
    detail::write_file(dir / (c.dataset + "_none_summary.csv"), [&](std::ostream& o) { report::write_summary(o, s); });
  }
  for (const auto& [params, path] : found) {
    const auto series = with_context(path.string(), [&] { return report::population_series(graphs, load_clustered(path)); });
    const auto stem = c.dataset + "_" + params.tag();
    detail::write_file(dir / (stem + ".csv"), [&](std::ostream& o) { report::write_population(o, series); });
    detail::write_file(dir / (stem + "_summary.csv"), [&](std::ostream& o) { report::write_summary(o, series); });
    out.runs.push_back(report::make_run(params, series));
  }
  out.table = report::clustering_effects_table(out.runs);
  detail::write_file(dir / (c.dataset + "_clustering_effects.csv"),
                     [&](std::ostream& o) { report::write_effects(o, out.table); });
  if (!report::attack_totals_agree(out.runs)) c.note("report: warning, attack totals differ across clusterings");
  c.note("report: " + std::to_string(out.runs.size()) + " clusterings -> " + dir.string());
  return out;
}

/// synth (when no input is given) -> graph -> cluster -> train -> report.
inline void run_all(PipelineConfig c) {
  c.validate();
  if (c.inputs.empty()) {
    c.inputs = {cmd_synth(c).string()};
    c.schema = FlowSchema::synthetic;
  }
  cmd_graph(c);
  cmd_cluster(c);
  cmd_train(c);
  cmd_report(c);
}

}  // namespace flowgraph::pipeline
