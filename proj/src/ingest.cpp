#include "aisroutes/ingest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "aisroutes/errors.hpp"
#include "aisroutes/parallel.hpp"
#include "aisroutes/text.hpp"

namespace aisroutes {

std::string_view to_string(VesselType t) {
  switch (t) {
    case VesselType::Cargo: return "Cargo";
    case VesselType::Tanker: return "Tanker";
    case VesselType::Fishing: return "Fishing";
    case VesselType::Passenger: return "Passenger";
    case VesselType::Tug: return "Tug";
    case VesselType::Pleasure: return "Pleasure";
    case VesselType::Other: return "Other";
    case VesselType::Unknown: return "Unknown";
  }
  return "Unknown";
}

std::optional<VesselType> parse_vessel_type(std::string_view name) {
  for (auto t : {VesselType::Cargo, VesselType::Tanker, VesselType::Fishing, VesselType::Passenger,
                 VesselType::Tug, VesselType::Pleasure, VesselType::Other, VesselType::Unknown}) {
    if (text::to_upper(name) == text::to_upper(to_string(t))) return t;
  }
  return std::nullopt;
}

VesselType classify_vessel(std::optional<int> type_code) {
  if (!type_code) return VesselType::Unknown;
  const int c = *type_code;
  if (c >= 70 && c <= 79) return VesselType::Cargo;
  if (c >= 80 && c <= 89) return VesselType::Tanker;
  if (c == 30) return VesselType::Fishing;
  if (c >= 60 && c <= 69) return VesselType::Passenger;
  if (c == 52) return VesselType::Tug;
  if (c == 36 || c == 37) return VesselType::Pleasure;
  return VesselType::Other;
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::BadCoords: return "bad_coords";
    case RejectReason::BadMmsi: return "bad_mmsi";
    case RejectReason::Duplicate: return "duplicate";
    case RejectReason::TimeRegression: return "time_regression";
    case RejectReason::SpeedJump: return "speed_jump";
    case RejectReason::Malformed: return "malformed";
  }
  return "malformed";
}

QualityReport::QualityReport() {
  for (auto r : kAllRejectReasons) rejected_by_reason[r] = 0;
}

std::uint64_t QualityReport::total_rejected() const {
  std::uint64_t n = 0;
  for (const auto& [reason, count] : rejected_by_reason) n += count;
  return n;
}

void QualityReport::reject(RejectReason r, std::uint64_t n) {
  rejected_by_reason[r] += n;
  records_out -= std::min(records_out, n);
}

double QualityReport::size_reduction() const {
  if (bytes_in == 0) return 0.0;
  return 1.0 - static_cast<double>(bytes_out) / static_cast<double>(bytes_in);
}

QualityReport& QualityReport::operator+=(const QualityReport& other) {
  records_in += other.records_in;
  records_out += other.records_out;
  for (const auto& [reason, count] : other.rejected_by_reason) rejected_by_reason[reason] += count;
  bytes_in += other.bytes_in;
  bytes_out += other.bytes_out;
  return *this;
}

std::optional<Timestamp> parse_timestamp(std::string_view raw) {
  const std::string_view s = text::trim(raw);
  if (s.empty()) return std::nullopt;
  if (auto epoch = text::parse_int(s)) return *epoch;

  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0, consumed = 0;
  const std::string buf(s);
  if (std::sscanf(buf.c_str(), "%4d-%2d-%2d%*1[T ]%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec,
                  &consumed) != 6) {
    return std::nullopt;
  }
  std::string_view rest = s.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    while (!rest.empty() && std::isdigit(static_cast<unsigned char>(rest.front()))) rest.remove_prefix(1);
  }
  long offset = 0;
  if (rest == "Z" || rest.empty()) {
    offset = 0;
  } else if ((rest.front() == '+' || rest.front() == '-') && rest.size() == 6 && rest[3] == ':') {
    const auto oh = text::parse_int(rest.substr(1, 2));
    const auto om = text::parse_int(rest.substr(4, 2));
    if (!oh || !om) return std::nullopt;
    offset = (rest.front() == '+' ? 1 : -1) * (*oh * 3600 + *om * 60);
  } else {
    return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<Timestamp>(days) * 86400 + h * 3600 + mi * 60 + sec - offset;
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto days = ts >= 0 ? ts / 86400 : (ts - 86399) / 86400;
  const auto secs = ts - days * 86400;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(secs / 3600), static_cast<long long>(secs % 3600 / 60),
                static_cast<long long>(secs % 60));
  return buf;
}

namespace {

struct ColumnIndex {
  int mmsi = -1, timestamp = -1, lat = -1, lon = -1;
  int sog = -1, cog = -1, heading = -1, ship_type = -1, vessel_type = -1;
  int flag = -1, destination = -1, nav_status = -1;
};

std::string lower(std::string_view s) {
  std::string out(text::trim(s));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

ColumnIndex resolve_columns(const std::vector<std::string>& header, const ColumnMap& columns) {
  static const std::string kKnown[] = {"mmsi",    "timestamp",   "lat",  "lon",
                                       "sog",     "cog",         "heading", "ship_type",
                                       "vessel_type", "flag",    "destination", "nav_status"};
  for (const auto& [canonical, name] : columns) {
    if (std::find(std::begin(kKnown), std::end(kKnown), canonical) == std::end(kKnown)) {
      throw ConfigError("unknown canonical column '" + canonical + "'");
    }
  }
  auto find = [&](const std::string& canonical) {
    auto it = columns.find(canonical);
    const std::string wanted = lower(it == columns.end() ? canonical : it->second);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (lower(header[i]) == wanted) return static_cast<int>(i);
    }
    return -1;
  };
  ColumnIndex idx;
  idx.mmsi = find("mmsi");
  idx.timestamp = find("timestamp");
  idx.lat = find("lat");
  idx.lon = find("lon");
  for (auto [name, value] : {std::pair{"mmsi", idx.mmsi}, std::pair{"timestamp", idx.timestamp},
                             std::pair{"lat", idx.lat}, std::pair{"lon", idx.lon}}) {
    if (value < 0) throw ConfigError(std::string("missing mandatory column '") + name + "'");
  }
  idx.sog = find("sog");
  idx.cog = find("cog");
  idx.heading = find("heading");
  idx.ship_type = find("ship_type");
  idx.vessel_type = find("vessel_type");
  idx.flag = find("flag");
  idx.destination = find("destination");
  idx.nav_status = find("nav_status");
  return idx;
}

std::string_view field(const std::vector<std::string>& row, int i) {
  if (i < 0) return {};
  return text::trim(row[static_cast<std::size_t>(i)]);
}

// Optional numeric field: empty or the AIS "not available" sentinel -> absent.
// Returns false when the value is present but invalid.
bool optional_measure(std::string_view s, double sentinel, double lo, double hi, bool hi_inclusive,
                      std::optional<double>& out) {
  out.reset();
  if (s.empty()) return true;
  const auto v = text::parse_double(s);
  if (!v) return false;
  if (*v == sentinel) return true;
  if (*v < lo || (hi_inclusive ? *v > hi : *v >= hi)) return false;
  out = *v;
  return true;
}

}  // namespace

ParseResult parse_records(std::istream& in, const ColumnMap& columns) {
  if (!in) throw ConfigError("unreadable input stream");
  ParseResult result;
  QualityReport& rep = result.report;

  std::string line;
  std::optional<ColumnIndex> idx;
  std::size_t width = 0;
  std::unordered_set<std::string> seen;

  while (std::getline(in, line)) {
    rep.bytes_in += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    if (!idx) {
      auto header = text::split_csv(line);
      if (!header) throw ConfigError("unparseable CSV header");
      idx = resolve_columns(*header, columns);
      width = header->size();
      continue;
    }
    ++rep.records_in;
    ++rep.records_out;

    if (!seen.insert(line).second) {
      rep.reject(RejectReason::Duplicate);
      continue;
    }
    auto row = text::split_csv(line);
    if (!row || row->size() != width) {
      rep.reject(RejectReason::Malformed);
      continue;
    }
    const auto& r = *row;

    const auto mmsi = text::parse_int(field(r, idx->mmsi));
    if (!mmsi || *mmsi < kMinMmsi || *mmsi > kMaxMmsi) {
      rep.reject(RejectReason::BadMmsi);
      continue;
    }
    const auto lat = text::parse_double(field(r, idx->lat));
    const auto lon = text::parse_double(field(r, idx->lon));
    if (!lat || !lon || !LatLon::valid(*lat, *lon) || *lon < -180.0 || *lon > 180.0) {
      rep.reject(RejectReason::BadCoords);
      continue;
    }
    const auto ts = parse_timestamp(field(r, idx->timestamp));
    if (!ts || *ts <= 0) {
      rep.reject(RejectReason::Malformed);
      continue;
    }

    AisRecord rec;
    rec.mmsi = static_cast<Mmsi>(*mmsi);
    rec.ts = *ts;
    rec.pos = LatLon::make(*lat, *lon);
    if (!optional_measure(field(r, idx->sog), 102.3, 0.0, kMaxSog, true, rec.sog) ||
        !optional_measure(field(r, idx->cog), 360.0, 0.0, 360.0, false, rec.cog) ||
        !optional_measure(field(r, idx->heading), 511.0, 0.0, 360.0, false, rec.heading)) {
      rep.reject(RejectReason::Malformed);
      continue;
    }

    std::optional<VesselType> vt;
    if (idx->vessel_type >= 0) vt = parse_vessel_type(field(r, idx->vessel_type));
    if (!vt) {
      std::optional<int> code;
      if (auto c = text::parse_int(field(r, idx->ship_type)); c && *c >= 0) code = static_cast<int>(*c);
      vt = classify_vessel(code);
    }
    rec.vessel_type = *vt;

    const std::string flag = text::to_upper(field(r, idx->flag));
    rec.flag = flag.size() == 2 ? flag : flag_from_mmsi(rec.mmsi);
    rec.destination = std::string(field(r, idx->destination));
    if (auto ns = text::parse_int(field(r, idx->nav_status)); ns && *ns >= 0 && *ns <= 15) {
      rec.nav_status = static_cast<int>(*ns);
    }
    result.records.push_back(std::move(rec));
  }
  if (!idx) throw ConfigError("input has no CSV header");
  return result;
}

void write_records_csv(std::ostream& out, std::span<const AisRecord> records) {
  out << "mmsi,timestamp,lat,lon,sog,cog,heading,vessel_type,flag,destination,nav_status\n";
  auto opt = [](const std::optional<double>& v) { return v ? text::format_double(*v) : std::string(); };
  for (const auto& r : records) {
    out << r.mmsi << ',' << r.ts << ',' << text::format_double(r.pos.lat) << ','
        << text::format_double(r.pos.lon) << ',' << opt(r.sog) << ',' << opt(r.cog) << ','
        << opt(r.heading) << ',' << to_string(r.vessel_type) << ',' << text::csv_field(r.flag) << ','
        << text::csv_field(r.destination) << ','
        << (r.nav_status ? std::to_string(*r.nav_status) : std::string()) << '\n';
  }
}

namespace {

struct TrackFilterCounts {
  std::uint64_t time_regression = 0;
  std::uint64_t speed_jump = 0;
};

VesselTrack assemble_track(std::vector<AisRecord> recs, const TrackConfig& cfg, TrackFilterCounts& counts) {
  std::stable_sort(recs.begin(), recs.end(),
                   [](const AisRecord& a, const AisRecord& b) { return a.ts < b.ts; });
  VesselTrack track;
  track.mmsi = recs.front().mmsi;
  for (auto& rec : recs) {
    if (!track.records.empty()) {
      const AisRecord& prev = track.records.back();
      if (rec.ts <= prev.ts) {
        ++counts.time_regression;
        continue;
      }
      const double dt = static_cast<double>(rec.ts - prev.ts);
      if (mps_to_knots(haversine_distance(prev.pos, rec.pos) / dt) > cfg.speed_jump) {
        ++counts.speed_jump;
        continue;
      }
    }
    track.records.push_back(std::move(rec));
  }

  // Most frequent declared class wins; Unknown only when nothing else is declared.
  std::map<VesselType, std::size_t> votes;
  for (const auto& r : track.records) {
    if (r.vessel_type != VesselType::Unknown) ++votes[r.vessel_type];
    if (track.flag.empty() && !r.flag.empty()) track.flag = r.flag;
  }
  std::size_t best = 0;
  for (const auto& [type, n] : votes) {
    if (n > best) {
      best = n;
      track.vessel_type = type;
    }
  }
  return track;
}

}  // namespace

std::vector<VesselTrack> build_tracks(std::vector<AisRecord> records, QualityReport& report,
                                      const TrackConfig& cfg, int workers) {
  std::unordered_map<Mmsi, std::size_t> slot;
  std::vector<std::vector<AisRecord>> by_vessel;
  for (auto& rec : records) {
    auto [it, inserted] = slot.try_emplace(rec.mmsi, by_vessel.size());
    if (inserted) by_vessel.emplace_back();
    by_vessel[it->second].push_back(std::move(rec));
  }
  std::sort(by_vessel.begin(), by_vessel.end(),
            [](const auto& a, const auto& b) { return a.front().mmsi < b.front().mmsi; });

  std::vector<VesselTrack> tracks(by_vessel.size());
  std::vector<TrackFilterCounts> counts(by_vessel.size());
  parallel_for(workers, by_vessel.size(), [&](std::size_t i) {
    tracks[i] = assemble_track(std::move(by_vessel[i]), cfg, counts[i]);
  });
  for (const auto& c : counts) {
    report.reject(RejectReason::TimeRegression, c.time_regression);
    report.reject(RejectReason::SpeedJump, c.speed_jump);
  }
  return tracks;
}

}  // namespace aisroutes
