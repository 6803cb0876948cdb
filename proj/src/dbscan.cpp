#include "aisroutes/dbscan.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace aisroutes {
namespace {

using Neighbours = std::vector<std::vector<std::size_t>>;

Neighbours neighbours_quadratic(std::span<const LatLon> pts, Meters eps) {
  Neighbours nb(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    nb[i].push_back(i);
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if (haversine_distance(pts[i], pts[j]) <= eps) {
        nb[i].push_back(j);
        nb[j].push_back(i);
      }
    }
  }
  for (auto& v : nb) std::sort(v.begin(), v.end());
  return nb;
}

Neighbours neighbours_indexed(std::span<const LatLon> pts, Meters eps) {
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pts[a].lat < pts[b].lat || (pts[a].lat == pts[b].lat && a < b);
  });
  // Any pair within eps differs in latitude by at most eps / R radians.
  const double band = rad_to_deg(eps / kEarthRadius) * (1.0 + 1e-9) + 1e-12;
  Neighbours nb(pts.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    nb[i].push_back(i);
    for (std::size_t m = k + 1; m < order.size(); ++m) {
      const std::size_t j = order[m];
      if (pts[j].lat - pts[i].lat > band) break;
      if (haversine_distance(pts[i], pts[j]) <= eps) {
        nb[i].push_back(j);
        nb[j].push_back(i);
      }
    }
  }
  for (auto& v : nb) std::sort(v.begin(), v.end());
  return nb;
}

}  // namespace

std::vector<std::vector<std::size_t>> Clustering::members() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(n_clusters));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) out[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return out;
}

Clustering dbscan(std::span<const LatLon> points, const DbscanParams& params) {
  return dbscan(points, params, points.size() > kIndexThreshold);
}

Clustering dbscan(std::span<const LatLon> points, const DbscanParams& params, bool use_index) {
  if (!(params.eps > 0.0) || params.min_samples < 1) {
    throw std::invalid_argument("dbscan: eps must be > 0 and min_samples >= 1");
  }
  Clustering out;
  out.labels.assign(points.size(), kNoise);
  if (points.empty()) return out;

  const Neighbours nb = use_index ? neighbours_indexed(points, params.eps)
                                  : neighbours_quadratic(points, params.eps);
  std::vector<char> core(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) core[i] = nb[i].size() >= params.min_samples;

  // Expand core components in input order.
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < points.size(); ++seed) {
    if (!core[seed] || out.labels[seed] != kNoise) continue;
    const int id = out.n_clusters++;
    out.labels[seed] = id;
    stack.assign(1, seed);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      for (std::size_t q : nb[p]) {
        if (core[q] && out.labels[q] == kNoise) {
          out.labels[q] = id;
          stack.push_back(q);
        }
      }
    }
  }
  // Border points: first core neighbour in input order.
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (core[i]) continue;
    for (std::size_t q : nb[i]) {
      if (core[q]) {
        out.labels[i] = out.labels[q];
        break;
      }
    }
  }
  return out;
}

}  // namespace aisroutes
