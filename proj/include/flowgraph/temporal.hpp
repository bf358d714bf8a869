#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "flowgraph/error.hpp"
#include "flowgraph/flow_model.hpp"

namespace flowgraph {

/// Half-open window [window_start, window_end) of one snapshot.
struct SnapshotIndex {
  std::uint64_t index = 0;
  double window_start = 0.0;
  double window_end = 0.0;

  static SnapshotIndex at(std::uint64_t index, double width) {
    const double start = static_cast<double>(index) * width;
    return {index, start, start + width};
  }
  friend bool operator==(const SnapshotIndex&, const SnapshotIndex&) = default;
};

inline std::uint64_t snapshot_of(double start_time, double width) {
  return static_cast<std::uint64_t>(std::floor(start_time / width));
}

/// Snapshots in increasing index order; only non-empty windows are present.
struct Snapshot {
  SnapshotIndex window;
  std::vector<FlowRecord> flows;
};

inline std::vector<Snapshot> dissect(const std::vector<FlowRecord>& flows, double width) {
  if (!(width > 0.0) || !std::isfinite(width)) throw NonPositiveWidth();
  std::map<std::uint64_t, std::vector<FlowRecord>> buckets;
  for (const auto& f : flows) buckets[snapshot_of(f.start_time, width)].push_back(f);
  std::vector<Snapshot> out;
  out.reserve(buckets.size());
  for (auto& [idx, bucket] : buckets) out.push_back({SnapshotIndex::at(idx, width), std::move(bucket)});
  return out;
}

}  // namespace flowgraph
