#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "flowgraph/behavior_graph.hpp"
#include "flowgraph/cluster/result.hpp"
#include "flowgraph/density_cluster.hpp"
#include "flowgraph/error.hpp"
#include "flowgraph/text.hpp"

namespace flowgraph::report {

struct PopulationRow {
  SnapshotIndex snapshot;
  std::uint64_t normal_count = 0;
  std::uint64_t attack_count = 0;
  std::uint64_t clustered_normal_count = 0;

  friend bool operator==(const PopulationRow&, const PopulationRow&) = default;
};

struct PopulationSeries {
  std::vector<PopulationRow> rows;
  std::uint64_t normal_total = 0;
  std::uint64_t attack_total = 0;
  std::uint64_t clustered_normal_total = 0;

  double mean_normal() const { return mean(normal_total); }
  double mean_attack() const { return mean(attack_total); }
  double mean_clustered_normal() const { return mean(clustered_normal_total); }

 private:
  double mean(std::uint64_t total) const {
    return rows.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(rows.size());
  }
};

/// One row per snapshot, in the order given. `clustered[i]` must be the
/// clustering of `graphs[i]`.
inline PopulationSeries population_series(const std::vector<SnapshotGraph>& graphs,
                                          const std::vector<ClusteredGraph>& clustered) {
  if (graphs.size() != clustered.size())
    throw LengthMismatch("population series: " + std::to_string(graphs.size()) + " graphs but " +
                         std::to_string(clustered.size()) + " clustered graphs");
  PopulationSeries s;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (graphs[i].snapshot.index != clustered[i].snapshot.index)
      throw LengthMismatch("population series: snapshot " + std::to_string(graphs[i].snapshot.index) +
                           " paired with clustered snapshot " + std::to_string(clustered[i].snapshot.index));
    PopulationRow r{graphs[i].snapshot, graphs[i].normal_count(), graphs[i].attack_count(),
                    clustered[i].normal_count()};
    s.normal_total += r.normal_count;
    s.attack_total += r.attack_count;
    s.clustered_normal_total += r.clustered_normal_count;
    s.rows.push_back(r);
  }
  return s;
}

/// Totals of one clustering configuration over a whole dataset.
struct ClusteringRun {
  Algorithm algorithm = Algorithm::dbscan;
  std::optional<double> eps;  // absent for hdbscan
  std::uint64_t normal_total = 0;
  std::uint64_t attack_total = 0;
  std::uint64_t clustered_normal_total = 0;
};

inline ClusteringRun make_run(const ClusterParams& params, const PopulationSeries& series) {
  ClusteringRun r;
  r.algorithm = params.algorithm;
  if (params.algorithm != Algorithm::hdbscan) r.eps = params.eps;
  r.normal_total = series.normal_total;
  r.attack_total = series.attack_total;
  r.clustered_normal_total = series.clustered_normal_total;
  return r;
}

struct EffectsRow {
  std::string method;
  std::string eps;  // "-" when not applicable
  std::uint64_t clustered_normal = 0;
  std::uint64_t attack_total = 0;
  std::string share_percent;  // clustered / (clustered + attack), 2 decimals
};

inline std::string share_percent(std::uint64_t clustered_normal, std::uint64_t attack_total) {
  const auto denom = clustered_normal + attack_total;
  const double share = denom == 0 ? 0.0 : 100.0 * static_cast<double>(clustered_normal) / static_cast<double>(denom);
  return text::format_fixed(share, 2);
}

inline std::vector<EffectsRow> clustering_effects_table(const std::vector<ClusteringRun>& runs) {
  std::vector<EffectsRow> rows;
  for (const auto& r : runs)
    rows.push_back({std::string(to_string(r.algorithm)), r.eps ? text::format_double(*r.eps) : "-",
                    r.clustered_normal_total, r.attack_total,
                    share_percent(r.clustered_normal_total, r.attack_total)});
  return rows;
}

/// True when every run saw the same attack population.
inline bool attack_totals_agree(const std::vector<ClusteringRun>& runs) {
  for (const auto& r : runs)
    if (r.attack_total != runs.front().attack_total) return false;
  return true;
}

inline constexpr std::string_view kPopulationHeader =
    "snapshot,window_start,window_end,normal,attack,clustered_normal";
inline constexpr std::string_view kSummaryHeader = "statistic,normal,attack,clustered_normal";
inline constexpr std::string_view kEffectsHeader = "method,eps,clustered_normal,attack,share_percent";

inline void write_population(std::ostream& out, const PopulationSeries& s) {
  out << kPopulationHeader << '\n';
  for (const auto& r : s.rows)
    out << r.snapshot.index << ',' << text::format_double(r.snapshot.window_start) << ','
        << text::format_double(r.snapshot.window_end) << ',' << r.normal_count << ',' << r.attack_count << ','
        << r.clustered_normal_count << '\n';
}

inline void write_summary(std::ostream& out, const PopulationSeries& s) {
  out << kSummaryHeader << '\n';
  out << "snapshots," << s.rows.size() << ',' << s.rows.size() << ',' << s.rows.size() << '\n';
  out << "total," << s.normal_total << ',' << s.attack_total << ',' << s.clustered_normal_total << '\n';
  out << "mean," << text::format_fixed(s.mean_normal(), 2) << ',' << text::format_fixed(s.mean_attack(), 2) << ','
      << text::format_fixed(s.mean_clustered_normal(), 2) << '\n';
}

inline void write_effects(std::ostream& out, const std::vector<EffectsRow>& rows) {
  out << kEffectsHeader << '\n';
  for (const auto& r : rows)
    out << r.method << ',' << r.eps << ',' << r.clustered_normal << ',' << r.attack_total << ',' << r.share_percent
        << '\n';
}

/// `<dataset>_<algorithm>_<eps>.csv`, with "na" for hdbscan's eps.
inline std::string series_file_name(const std::string& dataset, const ClusterParams& params) {
  return dataset + "_" + params.tag() + ".csv";
}

}  // namespace flowgraph::report
