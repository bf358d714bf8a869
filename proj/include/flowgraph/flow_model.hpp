#pragma once

#include <arpa/inet.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flowgraph/error.hpp"
#include "flowgraph/text.hpp"

namespace flowgraph {

/// True when `ip` is a syntactically valid IPv4 or IPv6 literal.
inline bool is_valid_ip(const std::string& ip) {
  unsigned char buf[sizeof(struct in6_addr)];
  return inet_pton(AF_INET, ip.c_str(), buf) == 1 || inet_pton(AF_INET6, ip.c_str(), buf) == 1;
}

/// Network endpoint identity: (address literal, port).
struct EntityId {
  std::string ip;
  std::uint16_t port = 0;

  friend bool operator==(const EntityId&, const EntityId&) = default;
  friend auto operator<=>(const EntityId&, const EntityId&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const EntityId& e) {
  return os << e.ip << '#' << e.port;
}

struct EntityIdHash {
  std::size_t operator()(const EntityId& e) const noexcept {
    return std::hash<std::string>{}(e.ip) * 31u + e.port;
  }
};

enum class FlowLabel : std::uint8_t { normal = 0, attack = 1 };

struct FlowRecord {
  EntityId src;
  EntityId dst;
  double start_time = 0.0;  // seconds, capture-relative after parsing
  double duration = 0.0;
  std::uint64_t bytes_src_to_dst = 0;
  std::uint64_t bytes_dst_to_src = 0;
  std::uint64_t packets_total = 0;
  FlowLabel label = FlowLabel::normal;

  bool is_attack() const noexcept { return label == FlowLabel::attack; }
  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

enum class FlowSchema { unsw15, synthetic };

inline FlowSchema parse_schema(std::string_view s) {
  if (s == "unsw15") return FlowSchema::unsw15;
  if (s == "synthetic") return FlowSchema::synthetic;
  throw InvalidParameter("unknown flow schema '" + std::string(s) + "'");
}

enum class RowPolicy { abort, skip };

struct FlowTable {
  std::vector<FlowRecord> records;
  std::size_t skipped_rows = 0;
};

namespace detail {

// Logical fields in the order every schema maps onto.
enum Field : std::size_t {
  kSrcIp, kSrcPort, kDstIp, kDstPort, kStart, kDuration, kBytesFwd, kBytesBwd, kPacketsA, kPacketsB, kLabel,
  kFieldCount
};

inline constexpr std::array<std::string_view, kFieldCount> kSyntheticColumns = {
    "src_ip", "src_port", "dst_ip", "dst_port", "start_time", "duration",
    "bytes_fwd", "bytes_bwd", "packets", "", "label"};

inline constexpr std::array<std::string_view, kFieldCount> kUnswColumns = {
    "srcip", "sport", "dstip", "dsport", "stime", "dur", "sbytes", "dbytes", "spkts", "dpkts", "label"};

// Positions in the headerless 49-column UNSW-NB15 capture files.
inline constexpr std::array<std::size_t, kFieldCount> kUnswRawPositions = {0, 1, 2, 3, 28, 6, 7, 8, 16, 17, 48};
inline constexpr std::size_t kUnswRawWidth = 49;

using ColumnMap = std::array<std::size_t, kFieldCount>;
inline constexpr std::size_t kUnused = std::numeric_limits<std::size_t>::max();

inline std::string lower(std::string_view s) {
  std::string out(text::trim(s));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

inline ColumnMap map_header(const std::vector<std::string_view>& header, FlowSchema schema) {
  const auto& wanted = schema == FlowSchema::synthetic ? kSyntheticColumns : kUnswColumns;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index.emplace(lower(header[i]), i);
  ColumnMap map{};
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    if (wanted[f].empty()) {
      map[f] = kUnused;
      continue;
    }
    auto it = index.find(std::string(wanted[f]));
    if (it == index.end()) throw MissingColumn(std::string(wanted[f]));
    map[f] = it->second;
  }
  return map;
}

inline ColumnMap raw_unsw_map() {
  ColumnMap map{};
  std::copy(kUnswRawPositions.begin(), kUnswRawPositions.end(), map.begin());
  return map;
}

inline EntityId parse_entity(std::string_view ip, std::string_view port, std::size_t row) {
  EntityId id{std::string(text::trim(ip)), 0};
  if (!is_valid_ip(id.ip)) throw MalformedRow(row, "invalid address '" + id.ip + "'");
  auto p = text::parse_number<std::int64_t>(port);
  if (!p || *p < 0 || *p > 65535) throw MalformedRow(row, "invalid port '" + std::string(port) + "'");
  id.port = static_cast<std::uint16_t>(*p);
  return id;
}

inline double parse_nonneg_real(std::string_view s, std::string_view what, std::size_t row) {
  auto v = text::parse_number<double>(s);
  if (!v || !std::isfinite(*v) || *v < 0.0)
    throw MalformedRow(row, "invalid " + std::string(what) + " '" + std::string(s) + "'");
  return *v;
}

inline std::uint64_t parse_count(std::string_view s, std::string_view what, std::size_t row) {
  auto v = text::parse_number<std::uint64_t>(s);
  if (!v) throw MalformedRow(row, "invalid " + std::string(what) + " '" + std::string(s) + "'");
  return *v;
}

inline FlowRecord parse_row(const std::vector<std::string_view>& cols, const ColumnMap& map, std::size_t width,
                            std::size_t row) {
  if (cols.size() != width)
    throw MalformedRow(row, "expected " + std::to_string(width) + " fields, got " + std::to_string(cols.size()));
  FlowRecord r;
  r.src = parse_entity(cols[map[kSrcIp]], cols[map[kSrcPort]], row);
  r.dst = parse_entity(cols[map[kDstIp]], cols[map[kDstPort]], row);
  r.start_time = parse_nonneg_real(cols[map[kStart]], "start time", row);
  r.duration = parse_nonneg_real(cols[map[kDuration]], "duration", row);
  r.bytes_src_to_dst = parse_count(cols[map[kBytesFwd]], "byte count", row);
  r.bytes_dst_to_src = parse_count(cols[map[kBytesBwd]], "byte count", row);
  r.packets_total = parse_count(cols[map[kPacketsA]], "packet count", row);
  if (map[kPacketsB] != kUnused) r.packets_total += parse_count(cols[map[kPacketsB]], "packet count", row);
  auto label = text::parse_number<int>(cols[map[kLabel]]);
  if (!label || (*label != 0 && *label != 1))
    throw MalformedRow(row, "label must be 0 or 1, got '" + std::string(cols[map[kLabel]]) + "'");
  r.label = static_cast<FlowLabel>(*label);
  return r;
}

inline void append_stream(std::istream& in, FlowSchema schema, RowPolicy policy, FlowTable& table) {
  std::string line;
  if (!text::getline_any(in, line)) {
    // A completely empty file has no header to validate against.
    throw MissingColumn(std::string(schema == FlowSchema::synthetic ? kSyntheticColumns[0] : kUnswColumns[0]));
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  auto first = text::split(line);
  ColumnMap map{};
  std::size_t width = first.size();
  std::size_t row = 0;
  bool header_consumed = true;
  if (schema == FlowSchema::unsw15 && first.size() == kUnswRawWidth &&
      is_valid_ip(std::string(text::trim(first[0])))) {
    // Original capture files ship without a header row.
    map = raw_unsw_map();
    header_consumed = false;
  } else {
    map = map_header(first, schema);
  }

  auto handle = [&](const std::vector<std::string_view>& cols) {
    ++row;
    try {
      table.records.push_back(parse_row(cols, map, width, row));
    } catch (const MalformedRow&) {
      if (policy == RowPolicy::abort) throw;
      ++table.skipped_rows;
    }
  };

  if (!header_consumed) handle(first);
  while (text::getline_any(in, line)) {
    if (text::trim(line).empty()) continue;
    handle(text::split(line));
  }
}

inline void rebase(std::vector<FlowRecord>& flows) {
  if (flows.empty()) return;
  double t0 = flows.front().start_time;
  for (const auto& f : flows) t0 = std::min(t0, f.start_time);
  for (auto& f : flows) f.start_time -= t0;
}

}  // namespace detail

/// Parses one or more flow CSV files as a single capture. Records keep file
/// order (files concatenated in the order given) and start times are rebased
/// so the earliest flow starts at 0.
inline FlowTable parse_flows(const std::vector<std::string>& paths, FlowSchema schema,
                             RowPolicy policy = RowPolicy::abort) {
  FlowTable table;
  for (const auto& path : paths) {
    auto in = text::open_input(path);
    detail::append_stream(in, schema, policy, table);
  }
  detail::rebase(table.records);
  return table;
}

inline FlowTable parse_flows(const std::string& path, FlowSchema schema, RowPolicy policy = RowPolicy::abort) {
  return parse_flows(std::vector<std::string>{path}, schema, policy);
}

inline FlowTable parse_flows(std::istream& in, FlowSchema schema, RowPolicy policy = RowPolicy::abort) {
  FlowTable table;
  detail::append_stream(in, schema, policy, table);
  detail::rebase(table.records);
  return table;
}

inline constexpr std::string_view kSyntheticHeader =
    "src_ip,src_port,dst_ip,dst_port,start_time,duration,bytes_fwd,bytes_bwd,packets,label";

/// Writes records in the synthetic (canonical interchange) schema.
inline void write_flows(std::ostream& out, const std::vector<FlowRecord>& flows) {
  out << kSyntheticHeader << '\n';
  for (const auto& f : flows) {
    out << f.src.ip << ',' << f.src.port << ',' << f.dst.ip << ',' << f.dst.port << ','
        << text::format_double(f.start_time) << ',' << text::format_double(f.duration) << ','
        << f.bytes_src_to_dst << ',' << f.bytes_dst_to_src << ',' << f.packets_total << ','
        << static_cast<int>(f.label) << '\n';
  }
}

inline void write_flows(const std::string& path, const std::vector<FlowRecord>& flows) {
  auto out = text::open_output(path);
  write_flows(out, flows);
}

}  // namespace flowgraph
