// Geodesic primitives on a spherical earth.
#pragma once

#include <span>
#include <stdexcept>
#include <string>

namespace aisroutes {

using Meters = double;
using Degrees = double;
using Knots = double;
using Seconds = double;

inline constexpr Meters kEarthRadius = 6'371'000.0;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kMetersPerNauticalMile = 1852.0;

constexpr double deg_to_rad(Degrees d) { return d * kPi / 180.0; }
constexpr Degrees rad_to_deg(double r) { return r * 180.0 / kPi; }
constexpr double knots_to_mps(Knots v) { return v * kMetersPerNauticalMile / 3600.0; }
constexpr Knots mps_to_knots(double v) { return v * 3600.0 / kMetersPerNauticalMile; }

class GeoError : public std::runtime_error {
 public:
  explicit GeoError(const std::string& what) : std::runtime_error(what) {}
};

/// Wraps any finite longitude into [-180, 180).
Degrees normalize_lon(Degrees lon);

/// Geographic position in degrees. `make` validates latitude and normalizes
/// longitude; direct aggregate construction is unchecked.
struct LatLon {
  Degrees lat{};
  Degrees lon{};

  static LatLon make(Degrees lat, Degrees lon);
  static bool valid(Degrees lat, Degrees lon);

  friend bool operator==(const LatLon&, const LatLon&) = default;
};

Meters haversine_distance(const LatLon& a, const LatLon& b);

/// Forward azimuth from `a` to `b`, clockwise from true north, in [0, 360).
/// Throws GeoError when the points coincide or `a` is a pole.
Degrees initial_bearing(const LatLon& a, const LatLon& b);

/// Minimal circular difference between two bearings, in [0, 180].
Degrees angular_difference(Degrees h1, Degrees h2);

/// Spherical mean: average of unit vectors re-projected to lat/lon, so sets
/// straddling the antimeridian average correctly. Throws on empty input or
/// when the resultant vector vanishes (e.g. two antipodal points).
LatLon barycenter(std::span<const LatLon> points);

/// Point reached travelling `distance` along the great circle leaving
/// `start` on `bearing`.
LatLon destination_point(const LatLon& start, Degrees bearing, Meters distance);

/// Offsets `p` by a local east/north displacement in meters.
LatLon offset_meters(const LatLon& p, Meters east, Meters north);

/// Distance from `p` to the great-circle arc between `a` and `b`.
Meters distance_to_arc(const LatLon& p, const LatLon& a, const LatLon& b);

/// Distance from `p` to the nearest point of a polyline.
Meters distance_to_polyline(const LatLon& p, std::span<const LatLon> line);

/// Summed haversine length of a polyline.
Meters polyline_length(std::span<const LatLon> line);

}  // namespace aisroutes
