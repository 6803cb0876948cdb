// Standard-route extraction: an iterative density-clustering walk from the
// departure port toward the destination that splits into labelled branches
// wherever the traffic forks.
#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "aisroutes/aggregation.hpp"
#include "aisroutes/dbscan.hpp"

namespace aisroutes {

struct ExtractionParams {
  Meters eps{3000.0};
  std::size_t min_samples{3};
  Meters r{6000.0};  // search radius around the route front
  double expansion_factor{1.5};
  std::size_t max_expansions{3};
  Meters d_complete{12'000.0};
  std::size_t max_iterations{10'000};

  /// Fills d_complete = max(2r, d_complete_min) from the three tuned values.
  static ExtractionParams make(Meters eps, std::size_t min_samples, Meters r, Meters d_complete_min = 5000.0);
  /// Throws std::invalid_argument unless all values are positive and r >= eps.
  void validate() const;
};

struct StandardRoute {
  std::string route_id;
  GroupKey group_key;
  std::string label;  // branch path: "0", "0.1", "0.1.0", ...
  std::vector<LatLon> waypoints;
  bool completed{};
  std::size_t support{};         // distinct segments that fed any cluster
  std::size_t outlier_points{};  // noise points met along this lineage
};

/// One clustering step, kept for the audit log.
struct ExtractionStep {
  std::string label;
  LatLon front;
  Meters radius{};
  std::size_t expansions{};
  std::size_t selected{};
  int clusters{};
  std::size_t noise{};
  std::vector<LatLon> barycenters;
};

struct ExtractionAudit {
  GroupKey group_key;
  ExtractionParams params;
  std::size_t pool_size{};
  std::size_t iterations{};
  std::size_t expansions{};
  std::vector<ExtractionStep> steps;
  /// Pool indices labelled noise by some branch and never clustered by any.
  std::vector<std::size_t> outlier_indices;
  /// Pool indices selected by at least one branch.
  std::size_t visited{};
};

struct ExtractionResult {
  std::vector<StandardRoute> routes;  // sorted by label
  ExtractionAudit audit;
};

/// Pool order: segments in group order, points in segment order.
ExtractionResult extract_standard_routes(const RouteGroup& group, const ExtractionParams& params,
                                         const PortDatabase& db);

/// Same, with explicit endpoints instead of a port lookup.
ExtractionResult extract_standard_routes(const RouteGroup& group, const ExtractionParams& params,
                                         const LatLon& departure, const LatLon& destination);

/// GeoJSON Feature: LineString of the waypoints, or a Point when the route
/// has a single waypoint.
nlohmann::json route_to_feature(const StandardRoute& route);
nlohmann::json feature_collection(std::span<const StandardRoute> routes);

nlohmann::json to_json(const StandardRoute& r);
StandardRoute standard_route_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExtractionAudit& a);
nlohmann::json to_json(const ExtractionParams& p);

}  // namespace aisroutes
