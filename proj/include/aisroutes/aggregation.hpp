// Endpoint snapping, port-pair grouping and per-group features.
#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "aisroutes/ports.hpp"
#include "aisroutes/segmentation.hpp"

namespace aisroutes {

struct GroupKey {
  PortId departure{};
  PortId destination{};
  VesselType vessel_type{VesselType::Unknown};

  auto operator<=>(const GroupKey&) const = default;
  bool operator==(const GroupKey&) const = default;

  /// "dep-dst-Type", e.g. "3-7-Cargo".
  std::string str() const;
  static std::optional<GroupKey> parse(std::string_view s);
};

struct AggregateFeatures {
  std::size_t n_routes{};
  std::size_t n_points{};
  Meters median_spatial_sampling{};
  Seconds median_temporal_sampling{};
  Seconds median_duration{};
  Meters mean_distance{};

  static constexpr std::size_t kCount = 6;
  std::array<double, kCount> as_array() const;
  static const std::array<const char*, kCount>& names();
};

struct RouteGroup {
  GroupKey key;
  std::vector<Segment> segments;
  AggregateFeatures features;
  bool low_support{};
};

/// Re-anchors the first/last fix of each Complete segment on its port
/// centroid; other segments pass through untouched. Throws ConsistencyError
/// on a port id missing from `db`.
std::vector<Segment> snap_endpoints(std::span<const Segment> segments, const PortDatabase& db);

AggregateFeatures compute_features(std::span<const Segment> segments);

/// Groups Complete segments by (departure, arrival, vessel type); groups
/// come back sorted by key, segments in (mmsi, t_start) order.
std::vector<RouteGroup> group_routes(std::span<const Segment> segments, std::size_t min_group_routes = 3,
                                     int workers = 1);

/// One row per group: key columns followed by the six features.
void write_group_summary_csv(std::ostream& out, std::span<const RouteGroup> groups);

struct GroupSummary {
  GroupKey key;
  AggregateFeatures features;
  bool low_support{};
};
std::vector<GroupSummary> read_group_summary_csv(std::istream& in);

}  // namespace aisroutes
