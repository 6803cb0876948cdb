#include <algorithm>
#include <set>

#include "doctest.h"
#include "oracles.hpp"

#include "aisroutes/standard_route.hpp"
#include "aisroutes/synthgen.hpp"

using namespace aisroutes;

namespace {

const LatLon kA{68.0, 12.0};

std::vector<oracle::P> to_oracle(const std::vector<LatLon>& v) {
  std::vector<oracle::P> out;
  for (const auto& p : v) out.push_back({p.lat, p.lon});
  return out;
}

// Copies of one straight voyage with a fix every `step` meters.
RouteGroup identical_voyages(LatLon a, LatLon b, std::size_t copies = 3, Meters step = 2000.0) {
  RouteGroup g;
  g.key = {1, 2, VesselType::Cargo};
  const Meters L = haversine_distance(a, b);
  const auto n = static_cast<std::size_t>(L / step);
  for (std::size_t k = 0; k < copies; ++k) {
    Segment s;
    s.mmsi = static_cast<Mmsi>(257000001 + k);
    s.vessel_type = VesselType::Cargo;
    s.departure_port = 1;
    s.arrival_port = 2;
    for (std::size_t i = 0; i <= n; ++i) {
      const auto p = oracle::interpolate({a.lat, a.lon}, {b.lat, b.lon}, static_cast<double>(i) / static_cast<double>(n));
      AisRecord r;
      r.mmsi = s.mmsi;
      r.ts = 1'700'000'000 + static_cast<Timestamp>(300 * i);
      r.pos = {p.lat, p.lon};
      s.points.push_back(r);
    }
    s.refresh();
    g.segments.push_back(s);
  }
  g.features = compute_features(g.segments);
  return g;
}

bool is_barycenter_in_audit(const LatLon& w, const ExtractionAudit& audit) {
  for (const auto& st : audit.steps) {
    for (const auto& b : st.barycenters) {
      if (b == w) return true;
    }
  }
  return false;
}

}  // namespace

TEST_SUITE("standard_route") {

TEST_CASE("parameter rules") {
  const auto p = ExtractionParams::make(3000.0, 3, 6000.0);
  CHECK(p.d_complete == 12000.0);
  CHECK(ExtractionParams::make(1000.0, 3, 2000.0).d_complete == 5000.0);
  CHECK_THROWS_AS(ExtractionParams::make(3000.0, 3, 2000.0).validate(), std::invalid_argument);
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("three identical straight voyages give one completed route") {
  const LatLon b = destination_point(kA, 70.0, 200'000.0);
  const auto g = identical_voyages(kA, b);
  const auto res = extract_standard_routes(g, ExtractionParams::make(3000.0, 3, 6000.0), kA, b);
  REQUIRE(res.routes.size() == 1);
  const auto& r = res.routes[0];
  CHECK(r.completed);
  CHECK(r.label == "0");
  CHECK(r.waypoints.front() == kA);
  CHECK(r.support == 3);
  CHECK(r.outlier_points == 0);
  CHECK(oracle::hausdorff(to_oracle(r.waypoints), to_oracle({kA, b})) < 1000.0 + 12000.0);
  // Away from the destination tolerance the route hugs the line.
  for (const auto& w : r.waypoints) CHECK(distance_to_arc(w, kA, b) < 1000.0);
  CHECK(haversine_distance(r.waypoints.back(), b) <= 12000.0);
  for (std::size_t i = 1; i < r.waypoints.size(); ++i) {
    CHECK(haversine_distance(r.waypoints[i - 1], r.waypoints[i]) <= 2 * 6000.0);
  }
}

TEST_CASE("a planted fork gives two completed branches") {
  const LatLon b = destination_point(kA, 90.0, 200'000.0);
  synth::GroupSpec spec;
  spec.seed = 5;
  spec.paths = {synth::detour_path(kA, b, 15'000.0, 0.3, 0.7), synth::detour_path(kA, b, -15'000.0, 0.3, 0.7)};
  spec.n_segments = 10;
  spec.spacing = 2000.0;
  spec.jitter_sigma = 100.0;
  const auto sg = synth::make_route_group(spec);
  const auto res = extract_standard_routes(sg.group, ExtractionParams::make(3000.0, 3, 6000.0), kA, b);
  REQUIRE(res.routes.size() == 2);
  CHECK(res.routes[0].label == "0.0");
  CHECK(res.routes[1].label == "0.1");
  std::set<std::size_t> matched;
  for (const auto& r : res.routes) {
    CHECK(r.completed);
    std::vector<oracle::P> line = to_oracle(r.waypoints);
    line.push_back({b.lat, b.lon});
    double best = 1e18;
    std::size_t which = 0;
    for (std::size_t p = 0; p < spec.paths.size(); ++p) {
      const double h = oracle::hausdorff(line, to_oracle(spec.paths[p]), 200.0);
      if (h < best) {
        best = h;
        which = p;
      }
    }
    CHECK(best < 2000.0);
    matched.insert(which);
  }
  CHECK(matched.size() == 2);
}

TEST_CASE("a single sparse segment cannot seed a route") {
  // Fixes 5 km apart: no fix has min_samples neighbours within eps.
  const LatLon b = destination_point(kA, 70.0, 100'000.0);
  const auto g = identical_voyages(kA, b, 1, 5000.0);
  const auto res = extract_standard_routes(g, ExtractionParams::make(3000.0, 3, 6000.0), kA, b);
  REQUIRE(res.routes.size() == 1);
  CHECK_FALSE(res.routes[0].completed);
  CHECK(res.routes[0].waypoints.size() == 1);
  CHECK(res.routes[0].waypoints[0] == kA);
}

TEST_CASE("GeoJSON features") {
  StandardRoute r;
  r.route_id = "1-2-Cargo/0";
  r.group_key = {1, 2, VesselType::Cargo};
  r.label = "0";
  r.waypoints = {{68.0, 12.0}, {68.5, 13.0}};
  auto f = route_to_feature(r);
  CHECK(f["type"] == "Feature");
  CHECK(f["geometry"]["type"] == "LineString");
  REQUIRE(f["geometry"]["coordinates"].size() == 2);
  CHECK(f["geometry"]["coordinates"][1][0] == 13.0);
  CHECK(f["geometry"]["coordinates"][1][1] == 68.5);
  for (const char* k : {"route_id", "label", "departure_port", "destination_port", "vessel_type", "support", "completed",
                        "outlier_points"}) {
    CHECK(f["properties"].contains(k));
  }
  r.waypoints.pop_back();
  f = route_to_feature(r);
  CHECK(f["geometry"]["type"] == "Point");
  const auto fc = feature_collection(std::vector<StandardRoute>{r});
  CHECK(fc["type"] == "FeatureCollection");
  CHECK(fc["features"].size() == 1);
  CHECK(to_json(standard_route_from_json(to_json(r))) == to_json(r));
}

TEST_CASE("audit invariants under noise and gaps") {
  const LatLon b = destination_point(kA, 45.0, 150'000.0);
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    synth::GroupSpec spec;
    spec.seed = seed;
    spec.paths = {{kA, b}};
    spec.n_segments = 6;
    spec.jitter_sigma = 200.0;
    spec.noise_rate = 0.05;
    spec.noise_min = 8000.0;
    spec.noise_max = 15000.0;
    spec.gap_rate = 0.3;
    const auto sg = synth::make_route_group(spec);
    const auto params = ExtractionParams::make(3000.0, 3, 6000.0);
    const auto res = extract_standard_routes(sg.group, params, kA, b);
    const auto again = extract_standard_routes(sg.group, params, kA, b);
    REQUIRE(res.routes.size() == again.routes.size());
    for (std::size_t i = 0; i < res.routes.size(); ++i) CHECK(to_json(res.routes[i]) == to_json(again.routes[i]));
    std::size_t pool = 0;
    for (const auto& s : sg.group.segments) pool += s.points.size();
    CHECK(res.audit.pool_size == pool);
    CHECK(res.audit.visited <= pool);
    CHECK(res.audit.outlier_indices.size() <= res.audit.visited);
    CHECK(std::is_sorted(res.audit.outlier_indices.begin(), res.audit.outlier_indices.end()));
    for (const auto& r : res.routes) {
      CHECK(r.waypoints.front() == kA);
      for (std::size_t i = 1; i < r.waypoints.size(); ++i) CHECK(is_barycenter_in_audit(r.waypoints[i], res.audit));
      if (r.completed) CHECK(haversine_distance(r.waypoints.back(), b) <= params.d_complete);
    }
  }
}

}
