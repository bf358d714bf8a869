// Acceptance suite: one PASS/FAIL/SKIP line per criterion, exit status 1 if
// any criterion fails. Criterion 9 needs the UNSW-NB15 CSV files, passed as a
// ':'-separated list in FLOWGRAPH_UNSW15.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "flowgraph/pipeline.hpp"
#include "flowgraph/spectral.hpp"
#include "oracles.hpp"

namespace fg = flowgraph;
namespace fc = flowgraph::cluster;
namespace gcn = flowgraph::gcn;
namespace pl = flowgraph::pipeline;
using fg::linalg::Matrix;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::pass;
  std::string detail;
};

Outcome check(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

struct Criterion {
  int id;
  const char* title;
  double limit_s;
  std::function<Outcome()> body;
};

struct TinyGraph {
  struct Node {
    fg::FeatureVector features{};
    fg::FlowLabel label = fg::FlowLabel::normal;
  };
  std::vector<Node> nodes;
  std::vector<fg::Edge> edges;
};

TinyGraph random_graph(std::mt19937_64& rng, std::size_t n, double p) {
  TinyGraph g;
  std::uniform_real_distribution<double> u(0, 1);
  g.nodes.resize(n);
  for (auto& node : g.nodes) {
    for (double& v : node.features) v = u(rng);
    node.label = u(rng) < 0.4 ? fg::FlowLabel::attack : fg::FlowLabel::normal;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && u(rng) < p) g.edges.push_back({i, j, 1});
  return g;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

double chebyshev_scalar(std::size_t j, double x) {
  if (std::abs(x) <= 1.0) return std::cos(static_cast<double>(j) * std::acos(x));
  return (x > 0 ? 1.0 : (j % 2 ? -1.0 : 1.0)) * std::cosh(static_cast<double>(j) * std::acosh(std::abs(x)));
}

fg::FlowRecord flow(const std::string& s, const std::string& d, bool attack) {
  fg::FlowRecord f;
  f.src = {s, 80};
  f.dst = {d, 80};
  f.duration = 1;
  f.bytes_src_to_dst = 100;
  f.bytes_dst_to_src = 50;
  f.packets_total = 4;
  f.label = attack ? fg::FlowLabel::attack : fg::FlowLabel::normal;
  return f;
}

// ---- criteria ----------------------------------------------------------------

Outcome labelling() {
  // Node 1 mostly normal, node 3 mostly malicious, node 4 a draw; node 2 is a
  // hub touching all of them.
  const std::vector<fg::FlowRecord> flows = {
      flow("10.0.0.1", "10.0.0.2", false), flow("10.0.0.1", "10.0.0.2", false), flow("10.0.0.2", "10.0.0.1", true),
      flow("10.0.0.3", "10.0.0.2", true),  flow("10.0.0.3", "10.0.0.2", true),  flow("10.0.0.2", "10.0.0.3", false),
      flow("10.0.0.4", "10.0.0.2", true),  flow("10.0.0.2", "10.0.0.4", false), flow("10.0.0.3", "10.0.0.4", true),
      flow("10.0.0.4", "10.0.0.1", false),
  };
  const auto g = fg::build_graph(flows);
  std::size_t checks = 0, ok = 0;
  auto expect = [&](const std::string& ip, fg::FlowLabel want) {
    ++checks;
    std::size_t found = 0;
    for (const auto& n : g.nodes)
      if (n.id.ip == ip) found += n.label == want ? 1 : 2;
    ok += found == 1;
  };
  expect("10.0.0.1", fg::FlowLabel::normal);  // 3 normal vs 1 attack
  expect("10.0.0.2", fg::FlowLabel::normal);  // 4 vs 4
  expect("10.0.0.3", fg::FlowLabel::attack);  // 3 attack vs 1 normal
  expect("10.0.0.4", fg::FlowLabel::normal);  // 2 vs 2
  for (std::uint64_t total = 0; total <= 40; ++total)
    for (std::uint64_t attack = 0; attack <= total; ++attack) {
      ++checks;
      ok += fg::majority_label(attack, total) ==
            (2 * attack > total ? fg::FlowLabel::attack : fg::FlowLabel::normal);
    }
  // A self-loop attack flow counts twice and outweighs one normal flow.
  const auto loop = fg::build_graph({flow("10.0.0.9", "10.0.0.9", true), flow("10.0.0.9", "10.0.0.8", false)});
  ++checks;
  ok += loop.nodes[0].label == fg::FlowLabel::attack && loop.nodes[1].label == fg::FlowLabel::normal;
  return check(ok == checks, std::to_string(ok) + "/" + std::to_string(checks) + " assertions");
}

struct PointCase {
  oracle::Rows rows;
  double eps;
  std::size_t min_pts;
};

std::vector<PointCase> point_cases() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> n_d(1, 100), mp_d(1, 6);
  std::uniform_real_distribution<double> eps_d(0.1, 0.9);
  std::vector<PointCase> cases;
  for (int i = 0; i < 100; ++i) {
    auto rows = oracle::mixture(rng, static_cast<std::size_t>(n_d(rng)), 8);
    cases.push_back({std::move(rows), eps_d(rng), static_cast<std::size_t>(mp_d(rng))});
  }
  return cases;
}

Outcome dbscan_oracle() {
  int matched = 0;
  for (const auto& c : point_cases()) {
    const auto pts = oracle::to_points(c.rows, 8);
    const auto want = oracle::dbscan(c.rows, c.eps, c.min_pts);
    bool ok = true;
    for (auto kind : {fc::IndexKind::brute_force, fc::IndexKind::grid})
      ok = ok && fc::dbscan(pts, c.eps, c.min_pts, kind).assignment == want;
    matched += ok;
  }
  return check(matched == 100, std::to_string(matched) + "/100 sets identical to closure oracle");
}

Outcome optics_agreement() {
  int matched = 0;
  for (const auto& c : point_cases()) {
    const auto pts = oracle::to_points(c.rows, 8);
    const auto core = oracle::core_flags(c.rows, c.eps, c.min_pts);
    const auto a = fc::optics(pts, c.eps, c.min_pts).assignment;
    const auto b = fc::dbscan(pts, c.eps, c.min_pts).assignment;
    std::vector<int> ca, cb;
    for (std::size_t i = 0; i < core.size(); ++i)
      if (core[i]) {
        ca.push_back(a[i]);
        cb.push_back(b[i]);
      }
    matched += oracle::canonical(ca) == oracle::canonical(cb);
  }
  return check(matched == 100, std::to_string(matched) + "/100 sets agree on core points");
}

Outcome hdbscan_recovery() {
  int recovered = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(5000 + static_cast<unsigned>(seed));
    const double spread = 0.05, separation = 20 * spread;
    auto [rows, truth] = oracle::planted_blobs(rng, 3, 10, spread, separation);
    recovered += oracle::same_partition(fc::hdbscan(oracle::to_points(rows, 2), 2, 5).assignment, truth);
  }
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> n_d(2, 50), mp_d(1, 5);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(n_d(rng));
    const auto min_pts = std::min<std::size_t>(static_cast<std::size_t>(mp_d(rng)), n);
    const auto rows = oracle::mixture(rng, n, 8);
    const auto tree = fc::hdbscan_tree(oracle::to_points(rows, 8), min_pts, 5);
    worst = std::max(worst, std::abs(tree.mst_weight() - oracle::mst_weight(rows, min_pts)));
  }
  std::ostringstream d;
  d << recovered << "/100 blob partitions recovered, max MST weight error " << worst;
  return check(recovered >= 95 && worst <= 1e-9, d.str());
}

std::vector<fg::SnapshotGraph> synthetic_graphs(std::uint64_t seed, double duration) {
  fg::synth::SynthConfig c;
  c.seed = seed;
  c.duration = duration;
  return pl::build_graphs(fg::synth::generate(c), 600.0);
}

Outcome population_accounting() {
  std::size_t runs = 0, violations = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto graphs = synthetic_graphs(seed, 6 * 3600.0);
    std::vector<fg::report::ClusteringRun> totals;
    for (const auto& params : pl::experiment_grid()) {
      ++runs;
      const auto series = fg::report::population_series(graphs, pl::cluster_graphs(graphs, params).graphs);
      for (const auto& r : series.rows) violations += r.clustered_normal_count > r.normal_count;
      std::uint64_t attack = 0;
      for (const auto& g : graphs) attack += g.attack_count();
      violations += series.attack_total != attack;
      totals.push_back(fg::report::make_run(params, series));
    }
    violations += !fg::report::attack_totals_agree(totals);
    for (const auto& row : fg::report::clustering_effects_table(totals)) {
      const double share = 100.0 * static_cast<double>(row.clustered_normal) /
                           static_cast<double>(row.clustered_normal + row.attack_total);
      violations += fg::text::format_fixed(share, 2) != row.share_percent;
    }
  }
  return check(violations == 0,
               std::to_string(runs) + " synthetic clustering runs, " + std::to_string(violations) + " violations");
}

Outcome gradient_checks() {
  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<int> n_d(2, 10);
  double worst_gcn = 0, worst_cheb = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_graph(rng, static_cast<std::size_t>(n_d(rng)), 0.35);
    const auto seed = static_cast<std::uint64_t>(trial);
    const auto in1 = gcn::prepare(g, gcn::Variant::gcn, 1);
    worst_gcn = std::max(worst_gcn, gcn::gradient_check(gcn::init_model(gcn::Variant::gcn, 1, 3, seed), in1,
                                                        {0.7, 1.9})
                                        .max_relative_error);
    const auto in3 = gcn::prepare(g, gcn::Variant::cheb, 3);
    worst_cheb = std::max(worst_cheb, gcn::gradient_check(gcn::init_model(gcn::Variant::cheb, 3, 4, seed), in3,
                                                          {0.7, 1.9})
                                          .max_relative_error);
  }
  std::ostringstream d;
  d << "max relative error gcn " << worst_gcn << ", cheb(k=3) " << worst_cheb;
  return check(worst_gcn < 1e-5 && worst_cheb < 1e-5, d.str());
}

Outcome spectral_identity() {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> n_d(1, 20);
  std::uniform_real_distribution<double> p_d(0.05, 0.6);
  std::normal_distribution<double> nd;
  double worst = 0, hi = -2, lo = 2;
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<std::size_t>(n_d(rng));
    const auto g = random_graph(rng, n, p_d(rng));
    const auto s = fg::spectral::scaled_laplacian(g).matrix;
    Matrix x(n, 4);
    for (double& v : x.data()) v = nd(rng);
    const auto basis = fg::spectral::chebyshev_basis(s, x, 5);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(s));
    const Eigen::MatrixXd& u = es.eigenvectors();
    for (std::size_t j = 0; j <= 5; ++j) {
      Eigen::VectorXd tj(n);
      for (std::size_t i = 0; i < n; ++i) tj(i) = chebyshev_scalar(j, es.eigenvalues()(i));
      const Eigen::MatrixXd expected = u * tj.asDiagonal() * u.transpose() * to_eigen(x);
      worst = std::max(worst, (to_eigen(basis[j]) - expected).cwiseAbs().maxCoeff());
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(to_eigen(fg::spectral::normalize_renormalized(g)));
    hi = std::max(hi, ea.eigenvalues().maxCoeff());
    lo = std::min(lo, ea.eigenvalues().minCoeff());
  }
  std::ostringstream d;
  d << "max |T_j(L~)x - U T_j(Lambda~) U^T x| = " << worst << ", A^ eigenvalues in [" << lo << ", " << hi << "]";
  return check(worst <= 1e-8 && hi <= 1 + 1e-9 && lo >= -1, d.str());
}

Outcome end_to_end() {
  fg::synth::SynthConfig sc;  // defaults: one day, 240 entities, high separation
  sc.seed = 2024;
  const auto flows = fg::synth::generate(sc);
  const auto graphs = pl::build_graphs(flows, 600.0);
  const auto clustered = pl::cluster_graphs(graphs, {fg::Algorithm::dbscan, 0.2, 2, 5}).graphs;
  const auto out = pl::train_and_evaluate(clustered, pl::GcnSettings{}, 2024);
  std::ostringstream d;
  d << flows.size() << " flows, " << graphs.size() << " snapshots, " << out.train_snapshots
    << " train; test balanced accuracy " << out.test_metrics.balanced_accuracy;
  return check(out.test_metrics.balanced_accuracy >= 0.90 && graphs.size() == 144, d.str());
}

Outcome reference_numbers() {
  const char* env = std::getenv("FLOWGRAPH_UNSW15");
  if (!env || !*env) return {Status::skip, "set FLOWGRAPH_UNSW15 to the ':'-separated UNSW-NB15 CSV files"};
  std::vector<std::string> paths;
  for (auto p : fg::text::split(env, ':'))
    if (!p.empty()) paths.emplace_back(p);
  const auto table = fg::parse_flows(paths, fg::FlowSchema::unsw15);
  const auto graphs = pl::build_graphs(table.records, 600.0, std::thread::hardware_concurrency());
  std::uint64_t normal = 0, attack = 0;
  for (const auto& g : graphs) {
    normal += g.normal_count();
    attack += g.attack_count();
  }
  std::ostringstream d;
  bool ok = graphs.size() == 147 && normal == 2583605 && attack == 80174;
  d << graphs.size() << " snapshots, normal " << normal << ", attack " << attack;
  const std::uint64_t reference[] = {369931, 447026, 479938, 141935, 137903, 127346, 176645};
  const auto grid = pl::experiment_grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto c = pl::cluster_graphs(graphs, grid[i], fg::AverageSpace::raw, std::thread::hardware_concurrency());
    std::uint64_t clustered = 0;
    for (const auto& g : c.graphs) clustered += g.normal_count();
    const double rel = std::abs(static_cast<double>(clustered) - static_cast<double>(reference[i])) /
                       static_cast<double>(reference[i]);
    ok = ok && rel <= 0.02;
    d << "; " << grid[i].tag() << " " << clustered << " (" << fg::text::format_fixed(100 * rel, 2) << "% off)";
  }
  return check(ok, d.str());
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "labelling rule", 1, labelling},
      {2, "DBSCAN oracle equivalence", 30, dbscan_oracle},
      {3, "OPTICS/DBSCAN core agreement", 60, optics_agreement},
      {4, "HDBSCAN blob recovery and MST", 60, hdbscan_recovery},
      {5, "population accounting", 10, population_accounting},
      {6, "GCN gradient check", 10, gradient_checks},
      {7, "spectral identity", 10, spectral_identity},
      {8, "end-to-end synthetic classification", 300, end_to_end},
      {9, "reference UNSW-NB15 totals", 0, reference_numbers},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.status == Status::pass && c.limit_s > 0 && secs > c.limit_s) {
      o.status = Status::fail;
      o.detail += "; over time limit";
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    failures += o.status == Status::fail;
    std::printf("%s criterion %d (%s): %s [%.3f s", tag, c.id, c.title, o.detail.c_str(), secs);
    if (c.limit_s > 0) std::printf(", limit %.0f s", c.limit_s);
    std::printf("]\n");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
