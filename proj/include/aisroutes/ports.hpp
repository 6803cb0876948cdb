// Port discovery from vessel behaviour and consolidation into a port database.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "aisroutes/dbscan.hpp"
#include "aisroutes/ingest.hpp"

namespace aisroutes {

struct PortDetectionConfig {
  Seconds window{600.0};
  std::size_t window_min_fixes{3};
  Knots min_speed_departure{2.0};
  Degrees heading_change_min{60.0};
  Seconds dwell_min{1800.0};
  /// Positions closer than this to the previous bearing anchor are skipped
  /// so that GPS jitter at near-zero speed does not read as turning.
  Meters bearing_min_step{25.0};
};

/// One slow-speed window that looks like a mooring manoeuvre or a dwell.
struct PortCandidate {
  Mmsi mmsi{};
  LatLon pos{};
  Timestamp t_start{};
  Timestamp t_end{};
  Degrees max_heading_change{};  // cumulative over the window
};

std::vector<PortCandidate> detect_candidates(const VesselTrack& track, const PortDetectionConfig& cfg = {});

enum class PortSource { Derived, OSM, WPI, Merged };
std::string_view to_string(PortSource s);
std::optional<PortSource> parse_port_source(std::string_view s);

using PortId = std::uint32_t;

struct Port {
  PortId port_id{};
  LatLon centroid{};
  Meters radius{};
  std::optional<std::string> label;
  PortSource source{PortSource::Derived};
  std::size_t support{};
};

struct ReferencePort {
  std::string name;
  LatLon pos{};
  PortSource source{PortSource::WPI};
};

struct PortConsolidationConfig {
  DbscanParams params{1500.0, 3};
  Meters label_match_dist{3000.0};
  Meters min_radius{200.0};
  Meters max_radius{10'000.0};
  Meters reference_radius{1000.0};
};

struct PortDatabase {
  std::vector<Port> ports;
  Timestamp built_at{};
  DbscanParams params{};

  const Port* find(PortId id) const;
};

/// Clusters candidate positions into derived ports, labels them from the
/// nearest reference port within `label_match_dist`, then appends reference
/// ports that matched nothing. Port ids are 1-based and follow cluster
/// discovery order, then reference order.
PortDatabase consolidate_ports(std::span<const PortCandidate> candidates, std::span<const ReferencePort> reference,
                               const PortConsolidationConfig& cfg = {}, Timestamp built_at = 0);

struct PortMatch {
  const Port* port;
  Meters distance;
};

/// Closest port whose radius + slack covers `pos`; ties go to the lower id.
std::optional<PortMatch> nearest_port(const LatLon& pos, const PortDatabase& db, Meters slack = 1000.0);

/// Reference CSV: name,lat,lon[,source]. Bad rows are skipped.
std::vector<ReferencePort> read_reference_ports(std::istream& in, PortSource default_source = PortSource::WPI);
void write_reference_ports(std::ostream& out, std::span<const ReferencePort> ports);

/// Converts a World Port Index CSV export (columns named by `name_col`,
/// `lat_col`, `lon_col`) to reference ports.
std::vector<ReferencePort> convert_wpi_csv(std::istream& in, const std::string& name_col = "Main Port Name",
                                           const std::string& lat_col = "Latitude",
                                           const std::string& lon_col = "Longitude");
/// Converts an OSM GeoJSON FeatureCollection of Point features (name taken
/// from properties.name) to reference ports.
std::vector<ReferencePort> convert_osm_geojson(const nlohmann::json& doc);

nlohmann::json to_json(const PortDatabase& db);
PortDatabase port_database_from_json(const nlohmann::json& j);

}  // namespace aisroutes
