#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flowgraph/error.hpp"
#include "flowgraph/text.hpp"

namespace flowgraph::cluster {

inline constexpr int kNoise = -1;

/// Per-point cluster id (dense, from 0) or kNoise.
struct ClusterResult {
  std::vector<int> assignment;
  std::size_t cluster_count = 0;

  std::size_t noise_count() const {
    std::size_t n = 0;
    for (int a : assignment) n += a == kNoise;
    return n;
  }
  friend bool operator==(const ClusterResult&, const ClusterResult&) = default;
};

/// Renumbers clusters by the lowest point index they contain.
inline void canonicalize(ClusterResult& r) {
  std::unordered_map<int, int> remap;
  for (int& a : r.assignment) {
    if (a == kNoise) continue;
    auto [it, inserted] = remap.try_emplace(a, static_cast<int>(remap.size()));
    a = it->second;
  }
  r.cluster_count = remap.size();
}

enum class Algorithm { dbscan, optics, hdbscan };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::dbscan: return "dbscan";
    case Algorithm::optics: return "optics";
    case Algorithm::hdbscan: return "hdbscan";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "dbscan") return Algorithm::dbscan;
  if (s == "optics") return Algorithm::optics;
  if (s == "hdbscan") return Algorithm::hdbscan;
  throw InvalidParameter("unknown clustering algorithm '" + std::string(s) + "'");
}

/// Defaults are the experiment settings: min_pts 2, eps 0.2, min cluster size 5.
struct ClusterParams {
  Algorithm algorithm = Algorithm::dbscan;
  double eps = 0.2;
  std::size_t min_pts = 2;
  std::size_t min_cluster_size = 5;

  void validate() const {
    if (algorithm != Algorithm::hdbscan && !(eps > 0.0 && std::isfinite(eps)))
      throw InvalidParameter("eps must be > 0, got " + text::format_double(eps));
    if (min_pts < 1) throw InvalidParameter("min_pts must be >= 1");
    if (algorithm == Algorithm::hdbscan && min_cluster_size < 2)
      throw InvalidParameter("min_cluster_size must be >= 2");
  }

  /// Short run tag such as "dbscan_0.2" or "hdbscan_na".
  std::string tag() const {
    return std::string(to_string(algorithm)) + "_" +
           (algorithm == Algorithm::hdbscan ? std::string("na") : text::format_double(eps));
  }
};

}  // namespace flowgraph::cluster
