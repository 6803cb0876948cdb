// AIS CSV ingestion: feature selection, quality filtering, vessel
// classification and per-vessel track assembly.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aisroutes/geo.hpp"

namespace aisroutes {

using Mmsi = std::uint32_t;
using Timestamp = std::int64_t;  // seconds since the Unix epoch, UTC

enum class VesselType { Cargo, Tanker, Fishing, Passenger, Tug, Pleasure, Other, Unknown };

std::string_view to_string(VesselType t);
std::optional<VesselType> parse_vessel_type(std::string_view name);

/// Maps an AIS ship-type code (0-99) to a vessel class. Total: absent codes
/// are Unknown, anything outside the named ranges is Other.
VesselType classify_vessel(std::optional<int> type_code);

/// ISO 3166 alpha-2 flag from the MMSI's maritime identification digits,
/// or an empty string when the MID is not allocated.
std::string flag_from_mmsi(Mmsi mmsi);

inline constexpr Mmsi kMinMmsi = 100'000'000;
inline constexpr Mmsi kMaxMmsi = 999'999'999;
inline constexpr Knots kMaxSog = 102.2;

struct AisRecord {
  Mmsi mmsi{};
  Timestamp ts{};
  LatLon pos{};
  std::optional<Knots> sog;
  std::optional<Degrees> cog;
  std::optional<Degrees> heading;
  VesselType vessel_type{VesselType::Unknown};
  std::string flag;
  std::string destination;
  std::optional<int> nav_status;

  friend bool operator==(const AisRecord&, const AisRecord&) = default;
};

enum class RejectReason { BadCoords, BadMmsi, Duplicate, TimeRegression, SpeedJump, Malformed };
inline constexpr std::array<RejectReason, 6> kAllRejectReasons = {
    RejectReason::BadCoords,      RejectReason::BadMmsi,   RejectReason::Duplicate,
    RejectReason::TimeRegression, RejectReason::SpeedJump, RejectReason::Malformed};

std::string_view to_string(RejectReason r);

/// Row accounting for one ingest run. Every input row lands in exactly one
/// bucket: records_out + total_rejected() == records_in.
struct QualityReport {
  std::uint64_t records_in{};
  std::uint64_t records_out{};
  std::map<RejectReason, std::uint64_t> rejected_by_reason;
  std::uint64_t bytes_in{};
  std::uint64_t bytes_out{};

  QualityReport();
  std::uint64_t total_rejected() const;
  void reject(RejectReason r, std::uint64_t n = 1);
  /// 1 - bytes_out / bytes_in, or 0 when nothing was read.
  double size_reduction() const;
  QualityReport& operator+=(const QualityReport& other);
};

/// Canonical field name -> header name in the input file. Canonical names:
/// mmsi, timestamp, lat, lon (required); sog, cog, heading, ship_type,
/// vessel_type, flag, destination, nav_status (optional).
using ColumnMap = std::map<std::string, std::string>;

struct ParseResult {
  std::vector<AisRecord> records;
  QualityReport report;
};

/// Parses a CSV stream with a header row. Bad rows are counted, never fatal.
/// Throws ConfigError when a required column is missing or the stream has no
/// header.
ParseResult parse_records(std::istream& in, const ColumnMap& columns = {});

/// Parses ISO-8601 UTC ("2024-01-31T12:00:00Z", optional fraction and
/// offset) or integer epoch seconds.
std::optional<Timestamp> parse_timestamp(std::string_view s);
/// "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(Timestamp ts);

/// Writes records in the canonical track CSV schema (re-readable by
/// parse_records with the default column map).
void write_records_csv(std::ostream& out, std::span<const AisRecord> records);

struct VesselTrack {
  Mmsi mmsi{};
  VesselType vessel_type{VesselType::Unknown};
  std::string flag;
  std::vector<AisRecord> records;  // strictly increasing ts
};

struct TrackConfig {
  Knots speed_jump{60.0};
};

/// Groups records by MMSI, sorts each track by time, collapses repeated
/// timestamps to their first occurrence (TimeRegression) and drops fixes
/// implying more than `speed_jump` from the last kept fix (SpeedJump).
/// Tracks come back sorted by MMSI; `report` is updated in place.
std::vector<VesselTrack> build_tracks(std::vector<AisRecord> records, QualityReport& report,
                                      const TrackConfig& cfg = {}, int workers = 1);

}  // namespace aisroutes
