#include "aisroutes/aggregation.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>

#include "aisroutes/errors.hpp"
#include "aisroutes/parallel.hpp"
#include "aisroutes/text.hpp"

namespace aisroutes {

std::string GroupKey::str() const {
  return std::to_string(departure) + "-" + std::to_string(destination) + "-" + std::string(to_string(vessel_type));
}

std::optional<GroupKey> GroupKey::parse(std::string_view s) {
  const auto a = s.find('-');
  if (a == std::string_view::npos) return std::nullopt;
  const auto b = s.find('-', a + 1);
  if (b == std::string_view::npos) return std::nullopt;
  const auto dep = text::parse_int(s.substr(0, a));
  const auto dst = text::parse_int(s.substr(a + 1, b - a - 1));
  const auto vt = parse_vessel_type(s.substr(b + 1));
  if (!dep || !dst || !vt || *dep < 0 || *dst < 0) return std::nullopt;
  return GroupKey{static_cast<PortId>(*dep), static_cast<PortId>(*dst), *vt};
}

std::array<double, AggregateFeatures::kCount> AggregateFeatures::as_array() const {
  return {static_cast<double>(n_routes), static_cast<double>(n_points), median_spatial_sampling,
          median_temporal_sampling,      median_duration,                 mean_distance};
}

const std::array<const char*, AggregateFeatures::kCount>& AggregateFeatures::names() {
  static const std::array<const char*, kCount> kNames = {
      "n_routes", "n_points", "median_spatial_sampling_m", "median_temporal_sampling_s", "median_duration_s",
      "mean_distance_m"};
  return kNames;
}

std::vector<Segment> snap_endpoints(std::span<const Segment> segments, const PortDatabase& db) {
  std::vector<Segment> out(segments.begin(), segments.end());
  for (auto& s : out) {
    if (s.completeness != Completeness::Complete || s.points.empty()) continue;
    const Port* dep = db.find(*s.departure_port);
    const Port* arr = db.find(*s.arrival_port);
    if (dep == nullptr || arr == nullptr) {
      throw ConsistencyError("segment of mmsi " + std::to_string(s.mmsi) + " references unknown port " +
                             std::to_string(dep == nullptr ? *s.departure_port : *s.arrival_port));
    }
    s.points.front().pos = dep->centroid;
    s.points.back().pos = arr->centroid;
    const Timestamp t0 = s.t_start, t1 = s.t_end;
    s.refresh();
    s.t_start = t0;
    s.t_end = t1;
  }
  return out;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

AggregateFeatures compute_features(std::span<const Segment> segments) {
  AggregateFeatures f;
  f.n_routes = segments.size();
  std::vector<double> gaps_m, gaps_s, durations, distances;
  for (const auto& s : segments) {
    f.n_points += s.points.size();
    for (std::size_t i = 1; i < s.points.size(); ++i) {
      gaps_m.push_back(haversine_distance(s.points[i - 1].pos, s.points[i].pos));
      gaps_s.push_back(static_cast<double>(s.points[i].ts - s.points[i - 1].ts));
    }
    durations.push_back(static_cast<double>(s.t_end - s.t_start));
    distances.push_back(s.distance);
  }
  // Summed in sorted order so the mean does not depend on member order.
  std::sort(distances.begin(), distances.end());
  double total_distance = 0.0;
  for (double d : distances) total_distance += d;
  f.median_spatial_sampling = median(std::move(gaps_m));
  f.median_temporal_sampling = median(std::move(gaps_s));
  f.median_duration = median(std::move(durations));
  f.mean_distance = segments.empty() ? 0.0 : total_distance / static_cast<double>(segments.size());
  return f;
}

std::vector<RouteGroup> group_routes(std::span<const Segment> segments, std::size_t min_group_routes, int workers) {
  std::map<GroupKey, std::vector<Segment>> buckets;
  for (const auto& s : segments) {
    if (s.completeness != Completeness::Complete) continue;
    buckets[GroupKey{*s.departure_port, *s.arrival_port, s.vessel_type}].push_back(s);
  }
  std::vector<RouteGroup> groups;
  groups.reserve(buckets.size());
  for (auto& [key, segs] : buckets) {
    std::sort(segs.begin(), segs.end(), [](const Segment& a, const Segment& b) {
      return std::tie(a.mmsi, a.t_start) < std::tie(b.mmsi, b.t_start);
    });
    groups.push_back(RouteGroup{key, std::move(segs), {}, false});
  }
  parallel_for(workers, groups.size(), [&](std::size_t i) {
    groups[i].features = compute_features(groups[i].segments);
    groups[i].low_support = groups[i].features.n_routes < min_group_routes;
  });
  return groups;
}

void write_group_summary_csv(std::ostream& out, std::span<const RouteGroup> groups) {
  out << "group_key,departure_port,destination_port,vessel_type";
  for (const char* n : AggregateFeatures::names()) out << ',' << n;
  out << ",low_support\n";
  for (const auto& g : groups) {
    out << g.key.str() << ',' << g.key.departure << ',' << g.key.destination << ',' << to_string(g.key.vessel_type)
        << ',' << g.features.n_routes << ',' << g.features.n_points << ','
        << text::format_double(g.features.median_spatial_sampling) << ','
        << text::format_double(g.features.median_temporal_sampling) << ','
        << text::format_double(g.features.median_duration) << ',' << text::format_double(g.features.mean_distance)
        << ',' << (g.low_support ? 1 : 0) << '\n';
  }
}

std::vector<GroupSummary> read_group_summary_csv(std::istream& in) {
  std::vector<GroupSummary> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto row = text::split_csv(line);
    if (!row || row->size() != 11) throw ConsistencyError("malformed group summary row: " + line);
    const auto key = GroupKey::parse((*row)[0]);
    const auto n_routes = text::parse_int((*row)[4]);
    const auto n_points = text::parse_int((*row)[5]);
    const auto sp = text::parse_double((*row)[6]);
    const auto tp = text::parse_double((*row)[7]);
    const auto du = text::parse_double((*row)[8]);
    const auto di = text::parse_double((*row)[9]);
    if (!key || !n_routes || !n_points || !sp || !tp || !du || !di) {
      throw ConsistencyError("malformed group summary row: " + line);
    }
    GroupSummary g;
    g.key = *key;
    g.features = {static_cast<std::size_t>(*n_routes), static_cast<std::size_t>(*n_points), *sp, *tp, *du, *di};
    g.low_support = text::trim((*row)[10]) == "1";
    out.push_back(g);
  }
  return out;
}

}  // namespace aisroutes
