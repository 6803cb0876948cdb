#include "aisroutes/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aisroutes {
namespace {

struct Vec3 {
  double x{}, y{}, z{};
};

Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(double s, const Vec3& v) { return {s * v.x, s * v.y, s * v.z}; }
double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

Vec3 to_unit(const LatLon& p) {
  const double lat = deg_to_rad(p.lat);
  const double lon = deg_to_rad(p.lon);
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

LatLon from_vector(const Vec3& v) {
  const double n = norm(v);
  const double lat = rad_to_deg(std::asin(std::clamp(v.z / n, -1.0, 1.0)));
  const double lon = rad_to_deg(std::atan2(v.y, v.x));
  return {lat, normalize_lon(lon)};
}

constexpr double kPoleTolerance = 1e-12;

}  // namespace

Degrees normalize_lon(Degrees lon) {
  if (lon >= -180.0 && lon < 180.0) return lon;
  double r = std::fmod(lon + 180.0, 360.0);
  if (r < 0.0) r += 360.0;
  r -= 180.0;
  // fmod can round 179.999...9 + 180 up to exactly 360.
  if (r >= 180.0) r -= 360.0;
  return r;
}

bool LatLon::valid(Degrees lat, Degrees lon) {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0;
}

LatLon LatLon::make(Degrees lat, Degrees lon) {
  if (!valid(lat, lon)) {
    throw GeoError("invalid coordinates: lat=" + std::to_string(lat) + " lon=" + std::to_string(lon));
  }
  return {lat, normalize_lon(lon)};
}

Meters haversine_distance(const LatLon& a, const LatLon& b) {
  const double lat1 = deg_to_rad(a.lat);
  const double lat2 = deg_to_rad(b.lat);
  const double dlat = lat2 - lat1;
  const double dlon = deg_to_rad(b.lon - a.lon);
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h = std::clamp(s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2, 0.0, 1.0);
  return 2.0 * kEarthRadius * std::asin(std::sqrt(h));
}

Degrees initial_bearing(const LatLon& a, const LatLon& b) {
  if (std::abs(std::abs(a.lat) - 90.0) < kPoleTolerance) {
    throw GeoError("bearing undefined from a pole");
  }
  if (haversine_distance(a, b) == 0.0) {
    throw GeoError("bearing undefined between coincident points");
  }
  const Vec3 va = to_unit(a);
  const Vec3 vb = to_unit(b);
  if (norm(va + vb) < 1e-12) {
    throw GeoError("bearing undefined between antipodal points");
  }
  const double lat1 = deg_to_rad(a.lat);
  const double lat2 = deg_to_rad(b.lat);
  const double dlon = deg_to_rad(b.lon - a.lon);
  const double y = std::sin(dlon) * std::cos(lat2);
  const double x = std::cos(lat1) * std::sin(lat2) - std::sin(lat1) * std::cos(lat2) * std::cos(dlon);
  double deg = rad_to_deg(std::atan2(y, x));
  deg = std::fmod(deg + 360.0, 360.0);
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

Degrees angular_difference(Degrees h1, Degrees h2) {
  const double d = std::fmod(std::abs(h1 - h2), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

LatLon barycenter(std::span<const LatLon> points) {
  if (points.empty()) throw GeoError("barycenter of an empty point set");
  if (points.size() == 1) return points.front();
  Vec3 sum{};
  for (const auto& p : points) sum = sum + to_unit(p);
  if (norm(sum) < 1e-12 * static_cast<double>(points.size())) {
    throw GeoError("barycenter undefined: points cancel on the sphere");
  }
  return from_vector(sum);
}

LatLon destination_point(const LatLon& start, Degrees bearing, Meters distance) {
  const double delta = distance / kEarthRadius;
  const double theta = deg_to_rad(bearing);
  const double lat1 = deg_to_rad(start.lat);
  const double lon1 = deg_to_rad(start.lon);
  const double sin_lat2 =
      std::sin(lat1) * std::cos(delta) + std::cos(lat1) * std::sin(delta) * std::cos(theta);
  const double lat2 = std::asin(std::clamp(sin_lat2, -1.0, 1.0));
  const double lon2 = lon1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(lat1),
                                        std::cos(delta) - std::sin(lat1) * sin_lat2);
  return {rad_to_deg(lat2), normalize_lon(rad_to_deg(lon2))};
}

LatLon offset_meters(const LatLon& p, Meters east, Meters north) {
  const double dlat = rad_to_deg(north / kEarthRadius);
  const double coslat = std::max(std::cos(deg_to_rad(p.lat)), 1e-9);
  const double dlon = rad_to_deg(east / (kEarthRadius * coslat));
  return {std::clamp(p.lat + dlat, -90.0, 90.0), normalize_lon(p.lon + dlon)};
}

Meters distance_to_arc(const LatLon& p, const LatLon& a, const LatLon& b) {
  const Vec3 vp = to_unit(p);
  const Vec3 va = to_unit(a);
  const Vec3 vb = to_unit(b);
  const Vec3 n = cross(va, vb);
  const double nn = norm(n);
  const double endpoint = std::min(haversine_distance(p, a), haversine_distance(p, b));
  if (nn < 1e-15) return endpoint;
  const Vec3 un = (1.0 / nn) * n;
  const double off = dot(vp, un);
  const Vec3 proj = vp - off * un;
  if (norm(proj) < 1e-15) return endpoint;
  // The projection lies on the arc iff it is between a and b around the normal.
  if (dot(cross(va, proj), un) >= 0.0 && dot(cross(proj, vb), un) >= 0.0) {
    return std::min(endpoint, kEarthRadius * std::asin(std::min(1.0, std::abs(off))));
  }
  return endpoint;
}

Meters distance_to_polyline(const LatLon& p, std::span<const LatLon> line) {
  if (line.empty()) return std::numeric_limits<double>::infinity();
  if (line.size() == 1) return haversine_distance(p, line.front());
  Meters best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < line.size(); ++i) {
    best = std::min(best, distance_to_arc(p, line[i - 1], line[i]));
  }
  return best;
}

Meters polyline_length(std::span<const LatLon> line) {
  Meters total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) total += haversine_distance(line[i - 1], line[i]);
  return total;
}

}  // namespace aisroutes
