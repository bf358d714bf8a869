#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "flowgraph/pipeline.hpp"

namespace fg = flowgraph;
namespace pl = flowgraph::pipeline;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("flowgraph");
  logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("FLOWGRAPH_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept real level names.
    if (level != spdlog::level::off || std::string(env) == "off")
      spdlog::set_level(level);
    else
      spdlog::warn("FLOWGRAPH_LOG='{}' is not a log level, using info", env);
  }
}

// String-typed options parsed after CLI11 is done, so enum errors surface as
// toolkit errors with the usual exit code.
struct RawOptions {
  std::string schema = "synthetic";
  std::string algorithm = "dbscan";
  std::string variant = "gcn";
  std::string optimizer = "adam";
  std::string average = "raw";
  std::string train_input = "clustered";
  std::string separation = "high";
  bool skip_malformed = false;
};

void finish(pl::PipelineConfig& c, const RawOptions& raw) {
  c.schema = fg::parse_schema(raw.schema);
  c.cluster.algorithm = fg::parse_algorithm(raw.algorithm);
  c.gcn.variant = fg::gcn::parse_variant(raw.variant);
  if (raw.optimizer == "adam")
    c.gcn.optimizer = fg::gcn::Optimizer::adam;
  else if (raw.optimizer == "sgd")
    c.gcn.optimizer = fg::gcn::Optimizer::sgd;
  else
    throw fg::InvalidParameter("unknown optimizer '" + raw.optimizer + "'");
  if (raw.average == "raw")
    c.average = fg::AverageSpace::raw;
  else if (raw.average == "normalized")
    c.average = fg::AverageSpace::normalized;
  else
    throw fg::InvalidParameter("unknown averaging space '" + raw.average + "'");
  c.gcn.input = pl::parse_train_input(raw.train_input);
  c.synth.behaviour_separation = fg::synth::parse_separation(raw.separation);
  c.row_policy = raw.skip_malformed ? fg::RowPolicy::skip : fg::RowPolicy::abort;
  c.log = [](std::string_view msg) { spdlog::info("{}", msg); };
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Temporal behaviour graphs, density clustering and GCN classification of network flows"};
  app.set_config("--config", "", "Key-value config file (TOML/INI style, keys are long option names)");
  app.require_subcommand(1);
  app.fallthrough();

  pl::PipelineConfig cfg;
  RawOptions raw;
  bool grid = false;

  app.add_option("--input", cfg.inputs, "Flow CSV file(s), concatenated in order")->check(CLI::ExistingFile);
  app.add_option("--schema", raw.schema, "Input schema: synthetic or unsw15")->capture_default_str();
  app.add_flag("--skip-malformed", raw.skip_malformed, "Skip and count malformed rows instead of aborting");
  app.add_option("--out-dir", cfg.out_dir, "Output directory")->capture_default_str();
  app.add_option("--dataset", cfg.dataset, "Dataset name used in report file names")->capture_default_str();
  app.add_option("--width", cfg.width, "Snapshot width in seconds")->capture_default_str();
  app.add_option("--algorithm", raw.algorithm, "dbscan, optics or hdbscan")->capture_default_str();
  app.add_option("--eps", cfg.cluster.eps, "Neighbourhood radius (dbscan, optics)")->capture_default_str();
  app.add_option("--min-pts", cfg.cluster.min_pts, "Density threshold")->capture_default_str();
  app.add_option("--min-cluster-size", cfg.cluster.min_cluster_size, "HDBSCAN minimum cluster size")
      ->capture_default_str();
  app.add_option("--average", raw.average, "Super-node feature averaging: raw or normalized")->capture_default_str();
  app.add_option("--variant", raw.variant, "GCN variant: gcn or cheb")->capture_default_str();
  app.add_option("--k", cfg.gcn.k, "Chebyshev order (cheb)")->capture_default_str();
  app.add_option("--hidden", cfg.gcn.hidden, "Hidden units")->capture_default_str();
  app.add_option("--lr", cfg.gcn.learning_rate, "Learning rate")->capture_default_str();
  app.add_option("--epochs", cfg.gcn.epochs, "Training epochs")->capture_default_str();
  app.add_option("--optimizer", raw.optimizer, "adam or sgd")->capture_default_str();
  app.add_flag("--weighted-adjacency", cfg.gcn.weighted_adjacency, "Use flow-count edge weights in propagation");
  app.add_option("--train-input", raw.train_input, "Train on clustered graphs or raw graphs")->capture_default_str();
  app.add_option("--train-fraction", cfg.gcn.train_fraction, "Leading share of snapshots used for training")
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "Seed for synthesis and weight init")->capture_default_str();
  app.add_option("--jobs", cfg.jobs, "Snapshots processed concurrently")->capture_default_str();
  app.add_option("--duration", cfg.synth.duration, "Synthetic trace length in seconds")->capture_default_str();
  app.add_option("--normal-entities", cfg.synth.n_normal_entities, "Synthetic normal entities")->capture_default_str();
  app.add_option("--attack-entities", cfg.synth.n_attack_entities, "Synthetic attack entities")->capture_default_str();
  app.add_option("--rate", cfg.synth.flows_per_entity_rate, "Synthetic flows per entity per second")
      ->capture_default_str();
  app.add_option("--attack-fraction", cfg.synth.attack_fraction_of_flows, "Share of synthetic flows that are attacks")
      ->capture_default_str();
  app.add_option("--separation", raw.separation, "Synthetic behaviour separation: low or high")
      ->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic flow trace to <out-dir>/flows.csv");
  auto* graph = app.add_subcommand("graph", "Build per-snapshot behaviour graphs under <out-dir>/graphs");
  auto* cluster = app.add_subcommand("cluster", "Cluster normal entities and aggregate super-nodes");
  cluster->add_flag("--grid", grid, "Run all seven reference configurations (optics/dbscan eps 0.2,0.5,0.8; hdbscan)");
  auto* train = app.add_subcommand("train", "Train and evaluate the GCN on a temporal split");
  auto* report = app.add_subcommand("report", "Population series and clustering-effects table");
  auto* run_all = app.add_subcommand("run-all", "synth (without --input), graph, cluster, train, report");

  CLI11_PARSE(app, argc, argv);

  try {
    finish(cfg, raw);
    if (synth->parsed()) {
      pl::cmd_synth(cfg);
    } else if (graph->parsed()) {
      if (cfg.inputs.empty()) cfg.inputs = {pl::flows_path(cfg).string()};
      pl::cmd_graph(cfg);
    } else if (cluster->parsed()) {
      if (grid)
        for (const auto& p : pl::experiment_grid()) pl::cmd_cluster(cfg, p);
      else
        pl::cmd_cluster(cfg);
    } else if (train->parsed()) {
      pl::cmd_train(cfg);
    } else if (report->parsed()) {
      pl::cmd_report(cfg);
    } else if (run_all->parsed()) {
      pl::run_all(cfg);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
