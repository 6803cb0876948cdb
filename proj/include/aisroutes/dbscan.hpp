// Deterministic DBSCAN over geographic points with a great-circle metric.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aisroutes/geo.hpp"

namespace aisroutes {

struct DbscanParams {
  Meters eps{};
  std::size_t min_samples{1};
};

inline constexpr int kNoise = -1;

struct Clustering {
  std::vector<int> labels;  // cluster id in [0, n_clusters) or kNoise
  int n_clusters{};

  /// Member indices of each cluster, in input order.
  std::vector<std::vector<std::size_t>> members() const;
};

/// Core points have at least `min_samples` points (themselves included)
/// within `eps`. Clusters are the connected components of core points,
/// numbered by their lowest input index. A non-core point joins the cluster
/// of its lowest-indexed core neighbour, or is noise.
///
/// Above kIndexThreshold points neighbours are found through a latitude
/// band index; results are identical to the quadratic scan.
Clustering dbscan(std::span<const LatLon> points, const DbscanParams& params);

inline constexpr std::size_t kIndexThreshold = 5000;

/// Exposed for tests: forces the indexed (true) or quadratic (false) path.
Clustering dbscan(std::span<const LatLon> points, const DbscanParams& params, bool use_index);

}  // namespace aisroutes
