#include "aisroutes/ports.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "aisroutes/errors.hpp"
#include "aisroutes/kinematics.hpp"
#include "aisroutes/text.hpp"

namespace aisroutes {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Sum of heading changes along the window, using only moves of at least
// `min_step` so stationary jitter does not contribute.
Degrees cumulative_turn(std::span<const AisRecord> recs, Meters min_step) {
  if (recs.size() < 3) return 0.0;
  Degrees total = 0.0;
  std::optional<Degrees> last_bearing;
  LatLon anchor = recs.front().pos;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    const LatLon& p = recs[i].pos;
    if (haversine_distance(anchor, p) < min_step) continue;
    const Degrees b = initial_bearing(anchor, p);
    if (last_bearing) total += angular_difference(*last_bearing, b);
    last_bearing = b;
    anchor = p;
  }
  return total;
}

}  // namespace

std::vector<PortCandidate> detect_candidates(const VesselTrack& track, const PortDetectionConfig& cfg) {
  std::vector<PortCandidate> out;
  const auto& recs = track.records;
  if (recs.size() < 2) return out;

  RollingSpeed rolling(cfg.window, cfg.window_min_fixes);
  std::vector<char> slow(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const Knots v = rolling.push(recs[i].ts, fix_speed(i ? &recs[i - 1] : nullptr, recs[i]));
    slow[i] = v < cfg.min_speed_departure;
  }

  std::size_t i = 0;
  while (i < recs.size()) {
    if (!slow[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < recs.size() && slow[j + 1]) ++j;
    if (j > i) {
      // Include the fix before the window so the entry heading counts.
      const std::size_t from = i > 0 ? i - 1 : i;
      const auto span = std::span<const AisRecord>(recs).subspan(from, j - from + 1);
      const Degrees turn = cumulative_turn(span, cfg.bearing_min_step);
      const Seconds duration = static_cast<Seconds>(recs[j].ts - recs[i].ts);
      if (turn >= cfg.heading_change_min || duration >= cfg.dwell_min) {
        std::vector<double> lats, lons;
        for (std::size_t k = i; k <= j; ++k) {
          lats.push_back(recs[k].pos.lat);
          lons.push_back(recs[k].pos.lon);
        }
        out.push_back({track.mmsi, LatLon{median_of(lats), median_of(lons)}, recs[i].ts, recs[j].ts, turn});
      }
    }
    i = j + 1;
  }
  return out;
}

std::string_view to_string(PortSource s) {
  switch (s) {
    case PortSource::Derived: return "Derived";
    case PortSource::OSM: return "OSM";
    case PortSource::WPI: return "WPI";
    case PortSource::Merged: return "Merged";
  }
  return "Derived";
}

std::optional<PortSource> parse_port_source(std::string_view s) {
  const std::string u = text::to_upper(text::trim(s));
  if (u == "DERIVED") return PortSource::Derived;
  if (u == "OSM") return PortSource::OSM;
  if (u == "WPI") return PortSource::WPI;
  if (u == "MERGED") return PortSource::Merged;
  return std::nullopt;
}

const Port* PortDatabase::find(PortId id) const {
  for (const auto& p : ports) {
    if (p.port_id == id) return &p;
  }
  return nullptr;
}

namespace {

struct DerivedCluster {
  std::vector<LatLon> members;
  LatLon centroid{};
};

void recompute(DerivedCluster& c) { c.centroid = barycenter(c.members); }

Meters cluster_radius(const DerivedCluster& c, const PortConsolidationConfig& cfg) {
  std::vector<double> d;
  d.reserve(c.members.size());
  for (const auto& m : c.members) d.push_back(haversine_distance(m, c.centroid));
  std::sort(d.begin(), d.end());
  // Nearest-rank 95th percentile.
  const std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(d.size())));
  const double p95 = d[std::max<std::size_t>(rank, 1) - 1];
  return std::clamp(std::max(cfg.min_radius, p95), cfg.min_radius, cfg.max_radius);
}

}  // namespace

PortDatabase consolidate_ports(std::span<const PortCandidate> candidates, std::span<const ReferencePort> reference,
                               const PortConsolidationConfig& cfg, Timestamp built_at) {
  PortDatabase db;
  db.built_at = built_at;
  db.params = cfg.params;

  std::vector<LatLon> pts;
  pts.reserve(candidates.size());
  for (const auto& c : candidates) pts.push_back(c.pos);
  const Clustering clustering = dbscan(pts, cfg.params);

  std::vector<DerivedCluster> clusters;
  for (const auto& idx : clustering.members()) {
    DerivedCluster c;
    for (std::size_t k : idx) c.members.push_back(pts[k]);
    recompute(c);
    clusters.push_back(std::move(c));
  }
  // Enforce the post-consolidation separation: fold any cluster whose
  // centroid lands within eps of an earlier one.
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t a = 0; a < clusters.size() && !merged; ++a) {
      for (std::size_t b = a + 1; b < clusters.size() && !merged; ++b) {
        if (haversine_distance(clusters[a].centroid, clusters[b].centroid) < cfg.params.eps) {
          auto& dst = clusters[a].members;
          dst.insert(dst.end(), clusters[b].members.begin(), clusters[b].members.end());
          clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(b));
          recompute(clusters[a]);
          merged = true;
        }
      }
    }
  }

  PortId next_id = 1;
  for (const auto& c : clusters) {
    Port p;
    p.port_id = next_id++;
    p.centroid = c.centroid;
    p.radius = cluster_radius(c, cfg);
    p.support = c.members.size();
    const ReferencePort* best = nullptr;
    Meters best_d = cfg.label_match_dist;
    for (const auto& ref : reference) {
      const Meters d = haversine_distance(ref.pos, p.centroid);
      if (d <= best_d && (best == nullptr || d < best_d)) {
        best = &ref;
        best_d = d;
      }
    }
    if (best != nullptr) {
      p.label = best->name;
      p.source = PortSource::Merged;
    }
    db.ports.push_back(std::move(p));
  }
  const std::size_t n_derived = db.ports.size();

  for (const auto& ref : reference) {
    bool covered = false;
    for (std::size_t k = 0; k < n_derived && !covered; ++k) {
      covered = haversine_distance(ref.pos, db.ports[k].centroid) <= cfg.label_match_dist;
    }
    for (std::size_t k = n_derived; k < db.ports.size() && !covered; ++k) {
      covered = haversine_distance(ref.pos, db.ports[k].centroid) < cfg.params.eps;
    }
    if (covered) continue;
    Port p;
    p.port_id = next_id++;
    p.centroid = ref.pos;
    p.radius = std::clamp(cfg.reference_radius, cfg.min_radius, cfg.max_radius);
    p.label = ref.name;
    p.source = ref.source;
    p.support = 0;
    db.ports.push_back(std::move(p));
  }
  return db;
}

std::optional<PortMatch> nearest_port(const LatLon& pos, const PortDatabase& db, Meters slack) {
  std::optional<PortMatch> best;
  for (const auto& p : db.ports) {
    const Meters d = haversine_distance(pos, p.centroid);
    if (d > p.radius + slack) continue;
    if (!best || d < best->distance || (d == best->distance && p.port_id < best->port->port_id)) {
      best = PortMatch{&p, d};
    }
  }
  return best;
}

std::vector<ReferencePort> read_reference_ports(std::istream& in, PortSource default_source) {
  std::vector<ReferencePort> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    auto row = text::split_csv(line);
    if (header) {
      header = false;
      if (row && !row->empty() && text::to_upper(text::trim((*row)[0])) == "NAME") continue;
    }
    if (!row || row->size() < 3) continue;
    const auto lat = text::parse_double((*row)[1]);
    const auto lon = text::parse_double((*row)[2]);
    if (!lat || !lon || !LatLon::valid(*lat, *lon)) continue;
    ReferencePort ref{std::string(text::trim((*row)[0])), LatLon::make(*lat, *lon), default_source};
    if (row->size() > 3) {
      if (auto s = parse_port_source((*row)[3])) ref.source = *s;
    }
    out.push_back(std::move(ref));
  }
  return out;
}

void write_reference_ports(std::ostream& out, std::span<const ReferencePort> ports) {
  out << "name,lat,lon,source\n";
  for (const auto& p : ports) {
    out << text::csv_field(p.name) << ',' << text::format_double(p.pos.lat) << ','
        << text::format_double(p.pos.lon) << ',' << to_string(p.source) << '\n';
  }
}

std::vector<ReferencePort> convert_wpi_csv(std::istream& in, const std::string& name_col, const std::string& lat_col,
                                           const std::string& lon_col) {
  std::vector<ReferencePort> out;
  std::string line;
  int ni = -1, lai = -1, loi = -1;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto row = text::split_csv(line);
    if (!row) continue;
    if (header) {
      for (std::size_t i = 0; i < row->size(); ++i) {
        const std::string h(text::trim((*row)[i]));
        if (h == name_col) ni = static_cast<int>(i);
        if (h == lat_col) lai = static_cast<int>(i);
        if (h == lon_col) loi = static_cast<int>(i);
      }
      if (ni < 0 || lai < 0 || loi < 0) throw ConfigError("WPI file lacks name/latitude/longitude columns");
      header = false;
      continue;
    }
    const auto need = static_cast<std::size_t>(std::max({ni, lai, loi}));
    if (row->size() <= need) continue;
    const auto lat = text::parse_double((*row)[static_cast<std::size_t>(lai)]);
    const auto lon = text::parse_double((*row)[static_cast<std::size_t>(loi)]);
    if (!lat || !lon || !LatLon::valid(*lat, *lon)) continue;
    out.push_back({std::string(text::trim((*row)[static_cast<std::size_t>(ni)])), LatLon::make(*lat, *lon),
                   PortSource::WPI});
  }
  return out;
}

std::vector<ReferencePort> convert_osm_geojson(const nlohmann::json& doc) {
  std::vector<ReferencePort> out;
  if (!doc.contains("features") || !doc["features"].is_array()) {
    throw ConfigError("OSM input is not a GeoJSON FeatureCollection");
  }
  for (const auto& f : doc["features"]) {
    const auto& g = f.value("geometry", nlohmann::json::object());
    if (g.value("type", "") != "Point" || !g.contains("coordinates")) continue;
    const auto& c = g["coordinates"];
    if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) continue;
    const double lon = c[0].get<double>();
    const double lat = c[1].get<double>();
    if (!LatLon::valid(lat, lon)) continue;
    std::string name;
    if (f.contains("properties") && f["properties"].is_object()) {
      const auto& props = f["properties"];
      if (props.contains("name") && props["name"].is_string()) name = props["name"].get<std::string>();
    }
    if (name.empty()) continue;
    out.push_back({name, LatLon::make(lat, lon), PortSource::OSM});
  }
  return out;
}

nlohmann::json to_json(const PortDatabase& db) {
  nlohmann::json ports = nlohmann::json::array();
  for (const auto& p : db.ports) {
    ports.push_back({{"port_id", p.port_id},
                     {"lat", p.centroid.lat},
                     {"lon", p.centroid.lon},
                     {"radius_m", p.radius},
                     {"label", p.label ? nlohmann::json(*p.label) : nlohmann::json(nullptr)},
                     {"source", to_string(p.source)},
                     {"support", p.support}});
  }
  return {{"ports", ports},
          {"params", {{"eps_m", db.params.eps}, {"min_samples", db.params.min_samples}}},
          {"built_at", db.built_at}};
}

PortDatabase port_database_from_json(const nlohmann::json& j) {
  try {
    PortDatabase db;
    db.built_at = j.at("built_at").get<Timestamp>();
    db.params.eps = j.at("params").at("eps_m").get<double>();
    db.params.min_samples = j.at("params").at("min_samples").get<std::size_t>();
    for (const auto& e : j.at("ports")) {
      Port p;
      p.port_id = e.at("port_id").get<PortId>();
      p.centroid = LatLon::make(e.at("lat").get<double>(), e.at("lon").get<double>());
      p.radius = e.at("radius_m").get<double>();
      if (!e.at("label").is_null()) p.label = e.at("label").get<std::string>();
      const auto src = parse_port_source(e.at("source").get<std::string>());
      if (!src) throw ConsistencyError("unknown port source");
      p.source = *src;
      p.support = e.at("support").get<std::size_t>();
      db.ports.push_back(std::move(p));
    }
    return db;
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError(std::string("malformed port database: ") + e.what());
  } catch (const GeoError& e) {
    throw ConsistencyError(std::string("malformed port database: ") + e.what());
  }
}

}  // namespace aisroutes
