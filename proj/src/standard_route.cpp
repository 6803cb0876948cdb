#include "aisroutes/standard_route.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

#include "aisroutes/errors.hpp"
#include "aisroutes/text.hpp"

namespace aisroutes {

ExtractionParams ExtractionParams::make(Meters eps, std::size_t min_samples, Meters r, Meters d_complete_min) {
  ExtractionParams p;
  p.eps = eps;
  p.min_samples = min_samples;
  p.r = r;
  p.d_complete = std::max(2.0 * r, d_complete_min);
  return p;
}

void ExtractionParams::validate() const {
  if (!(eps > 0.0) || min_samples < 1 || !(r > 0.0) || !(expansion_factor > 0.0) || !(d_complete > 0.0) ||
      max_iterations < 1) {
    throw std::invalid_argument("extraction parameters must be positive");
  }
  if (r < eps) throw std::invalid_argument("search radius r must be >= eps");
}

namespace {

struct PoolPoint {
  LatLon pos;
  std::size_t segment;
};

struct Branch {
  std::string label;
  std::vector<LatLon> waypoints;
  std::vector<char> visited;     // per pool point
  std::vector<char> members;     // per segment: still eligible for this branch
  std::vector<char> contributed; // per segment: fed at least one cluster
  std::size_t outliers{};
  std::size_t iterations{};
};

// Orders "0.10" after "0.9".
bool label_less(const std::string& a, const std::string& b) {
  auto parts = [](const std::string& s) {
    std::vector<long long> out;
    std::size_t start = 0;
    while (start <= s.size()) {
      const auto dot = s.find('.', start);
      const auto end = dot == std::string::npos ? s.size() : dot;
      out.push_back(text::parse_int(std::string_view(s).substr(start, end - start)).value_or(0));
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    return out;
  };
  return parts(a) < parts(b);
}

}  // namespace

ExtractionResult extract_standard_routes(const RouteGroup& group, const ExtractionParams& params,
                                         const PortDatabase& db) {
  const Port* dep = db.find(group.key.departure);
  const Port* dst = db.find(group.key.destination);
  if (dep == nullptr || dst == nullptr) {
    throw ConsistencyError("route group " + group.key.str() + " references an unknown port");
  }
  return extract_standard_routes(group, params, dep->centroid, dst->centroid);
}

ExtractionResult extract_standard_routes(const RouteGroup& group, const ExtractionParams& params,
                                         const LatLon& departure, const LatLon& destination) {
  params.validate();
  ExtractionResult result;
  ExtractionAudit& audit = result.audit;
  audit.group_key = group.key;
  audit.params = params;

  std::vector<PoolPoint> pool;
  for (std::size_t s = 0; s < group.segments.size(); ++s) {
    for (const auto& p : group.segments[s].points) pool.push_back({p.pos, s});
  }
  audit.pool_size = pool.size();

  std::vector<char> flagged_noise(pool.size(), 0);
  std::vector<char> clustered(pool.size(), 0);
  std::vector<char> ever_selected(pool.size(), 0);

  std::deque<Branch> worklist;
  {
    Branch root;
    root.label = "0";
    root.waypoints.push_back(departure);
    root.visited.assign(pool.size(), 0);
    root.members.assign(group.segments.size(), 1);
    root.contributed.assign(group.segments.size(), 0);
    worklist.push_back(std::move(root));
  }

  auto finalize = [&](Branch& b, bool completed) {
    StandardRoute route;
    route.group_key = group.key;
    route.label = b.label;
    route.route_id = group.key.str() + "/" + b.label;
    route.waypoints = std::move(b.waypoints);
    route.completed = completed;
    route.support = static_cast<std::size_t>(std::count(b.contributed.begin(), b.contributed.end(), 1));
    route.outlier_points = b.outliers;
    result.routes.push_back(std::move(route));
  };
  auto near_destination = [&](const LatLon& p) { return haversine_distance(p, destination) <= params.d_complete; };

  std::vector<std::size_t> selected;
  std::vector<LatLon> selected_pos;
  while (!worklist.empty()) {
    Branch b = std::move(worklist.front());
    worklist.pop_front();

    while (true) {
      const LatLon front = b.waypoints.back();
      if (b.iterations >= params.max_iterations) {
        finalize(b, near_destination(front));
        break;
      }
      ++b.iterations;
      ++audit.iterations;

      Meters radius = params.r;
      std::size_t expansions = 0;
      auto select = [&] {
        selected.clear();
        for (std::size_t i = 0; i < pool.size(); ++i) {
          if (b.visited[i] || !b.members[pool[i].segment]) continue;
          if (haversine_distance(pool[i].pos, front) <= radius) selected.push_back(i);
        }
      };
      select();
      while (selected.size() < params.min_samples && expansions < params.max_expansions) {
        radius *= params.expansion_factor;
        ++expansions;
        select();
      }
      audit.expansions += expansions;

      ExtractionStep step;
      step.label = b.label;
      step.front = front;
      step.radius = radius;
      step.expansions = expansions;
      step.selected = selected.size();

      if (selected.size() < params.min_samples) {
        audit.steps.push_back(std::move(step));
        finalize(b, near_destination(front));
        break;
      }

      selected_pos.clear();
      for (std::size_t i : selected) selected_pos.push_back(pool[i].pos);
      const Clustering c = dbscan(selected_pos, DbscanParams{params.eps, params.min_samples});
      for (std::size_t k = 0; k < selected.size(); ++k) {
        const std::size_t i = selected[k];
        b.visited[i] = 1;
        ever_selected[i] = 1;
        if (c.labels[k] == kNoise) {
          flagged_noise[i] = 1;
          ++b.outliers;
          ++step.noise;
        } else {
          clustered[i] = 1;
        }
      }
      step.clusters = c.n_clusters;

      const auto members = c.members();
      std::vector<LatLon> centers;
      std::vector<std::vector<char>> cluster_segments;
      for (const auto& idx : members) {
        std::vector<LatLon> pts;
        std::vector<char> segs(group.segments.size(), 0);
        for (std::size_t k : idx) {
          pts.push_back(selected_pos[k]);
          segs[pool[selected[k]].segment] = 1;
        }
        centers.push_back(barycenter(pts));
        cluster_segments.push_back(std::move(segs));
      }
      step.barycenters = centers;
      audit.steps.push_back(std::move(step));

      if (centers.empty()) continue;
      if (centers.size() == 1) {
        b.waypoints.push_back(centers.front());
        for (std::size_t s = 0; s < cluster_segments[0].size(); ++s) b.contributed[s] |= cluster_segments[0][s];
        if (near_destination(centers.front())) {
          finalize(b, true);
          break;
        }
        continue;
      }

      // Fork: one child per cluster, each keeping only the segments that fed
      // its cluster so siblings cannot drift onto each other's corridor.
      for (std::size_t j = 0; j < centers.size(); ++j) {
        Branch child = b;
        child.label = b.label + "." + std::to_string(j);
        child.waypoints.push_back(centers[j]);
        for (std::size_t s = 0; s < child.members.size(); ++s) {
          child.members[s] = child.members[s] && cluster_segments[j][s];
          child.contributed[s] |= cluster_segments[j][s];
        }
        if (near_destination(centers[j])) {
          finalize(child, true);
        } else {
          worklist.push_back(std::move(child));
        }
      }
      break;
    }
  }

  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (flagged_noise[i] && !clustered[i]) audit.outlier_indices.push_back(i);
  }
  audit.visited = static_cast<std::size_t>(std::count(ever_selected.begin(), ever_selected.end(), 1));
  std::sort(result.routes.begin(), result.routes.end(),
            [](const StandardRoute& a, const StandardRoute& b) { return label_less(a.label, b.label); });
  return result;
}

nlohmann::json route_to_feature(const StandardRoute& route) {
  nlohmann::json geometry;
  if (route.waypoints.size() >= 2) {
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& w : route.waypoints) coords.push_back({w.lon, w.lat});
    geometry = {{"type", "LineString"}, {"coordinates", coords}};
  } else {
    const LatLon w = route.waypoints.empty() ? LatLon{} : route.waypoints.front();
    geometry = {{"type", "Point"}, {"coordinates", {w.lon, w.lat}}};
  }
  return {{"type", "Feature"},
          {"geometry", geometry},
          {"properties",
           {{"route_id", route.route_id},
            {"label", route.label},
            {"departure_port", route.group_key.departure},
            {"destination_port", route.group_key.destination},
            {"vessel_type", to_string(route.group_key.vessel_type)},
            {"support", route.support},
            {"completed", route.completed},
            {"outlier_points", route.outlier_points}}}};
}

nlohmann::json feature_collection(std::span<const StandardRoute> routes) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& r : routes) features.push_back(route_to_feature(r));
  return {{"type", "FeatureCollection"}, {"features", features}};
}

nlohmann::json to_json(const StandardRoute& r) {
  nlohmann::json wps = nlohmann::json::array();
  for (const auto& w : r.waypoints) wps.push_back({w.lat, w.lon});
  return {{"route_id", r.route_id},
          {"group_key", r.group_key.str()},
          {"label", r.label},
          {"waypoints", wps},
          {"completed", r.completed},
          {"support", r.support},
          {"outlier_points", r.outlier_points}};
}

StandardRoute standard_route_from_json(const nlohmann::json& j) {
  try {
    StandardRoute r;
    r.route_id = j.at("route_id").get<std::string>();
    const auto key = GroupKey::parse(j.at("group_key").get<std::string>());
    if (!key) throw ConsistencyError("bad group key in route " + r.route_id);
    r.group_key = *key;
    r.label = j.at("label").get<std::string>();
    for (const auto& w : j.at("waypoints")) r.waypoints.push_back(LatLon::make(w.at(0), w.at(1)));
    r.completed = j.at("completed").get<bool>();
    r.support = j.at("support").get<std::size_t>();
    r.outlier_points = j.at("outlier_points").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError(std::string("malformed route record: ") + e.what());
  }
}

nlohmann::json to_json(const ExtractionParams& p) {
  return {{"eps_m", p.eps},
          {"min_samples", p.min_samples},
          {"r_m", p.r},
          {"expansion_factor", p.expansion_factor},
          {"max_expansions", p.max_expansions},
          {"d_complete_m", p.d_complete},
          {"max_iterations", p.max_iterations}};
}

nlohmann::json to_json(const ExtractionAudit& a) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : a.steps) {
    nlohmann::json centers = nlohmann::json::array();
    for (const auto& c : s.barycenters) centers.push_back({c.lat, c.lon});
    steps.push_back({{"label", s.label},
                     {"front", {s.front.lat, s.front.lon}},
                     {"radius_m", s.radius},
                     {"expansions", s.expansions},
                     {"selected", s.selected},
                     {"clusters", s.clusters},
                     {"noise", s.noise},
                     {"barycenters", centers}});
  }
  return {{"group_key", a.group_key.str()},
          {"params", to_json(a.params)},
          {"pool_size", a.pool_size},
          {"visited", a.visited},
          {"iterations", a.iterations},
          {"expansions", a.expansions},
          {"outlier_count", a.outlier_indices.size()},
          {"steps", steps}};
}

}  // namespace aisroutes
