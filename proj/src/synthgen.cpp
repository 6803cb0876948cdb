#include "aisroutes/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "aisroutes/errors.hpp"

namespace aisroutes::synth {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  spare_ = mag * std::sin(2.0 * kPi * u2);
  return mag * std::cos(2.0 * kPi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::index on empty range");
  return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
}

std::pair<double, double> Rng::truncated_offset(double sigma) {
  if (sigma <= 0.0) return {0.0, 0.0};
  while (true) {
    const double dx = sigma * normal();
    const double dy = sigma * normal();
    if (std::hypot(dx, dy) <= 3.0 * sigma) return {dx, dy};
  }
}

void ScenarioSpec::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid scenario: " + msg); };
  if (berths.empty()) fail("no berths");
  for (const auto& b : berths) {
    if (!LatLon::valid(b.pos.lat, b.pos.lon)) fail("berth '" + b.name + "' has invalid coordinates");
    if (b.name.empty()) fail("berth without a name");
  }
  if (corridors.empty()) fail("no corridors");
  for (const auto& c : corridors) {
    if (c.from >= berths.size() || c.to >= berths.size()) fail("corridor endpoint is not a berth");
    if (c.from == c.to) fail("corridor joins a berth to itself");
    if (c.vessels == 0 || c.voyages_per_vessel == 0) fail("corridor without traffic");
    if (!(c.speed > 0.0) || !(c.report_interval > 0.0)) fail("non-positive speed or report interval");
    for (const auto& path : c.paths) {
      for (const auto& p : path) {
        if (!LatLon::valid(p.lat, p.lon)) fail("corridor waypoint has invalid coordinates");
      }
    }
  }
  const auto& d = defects;
  if (d.gaps_per_voyage < 0.0 || !(d.gap_duration > 0.0) || !(d.gap_length > 0.0)) fail("bad gap model");
  if (d.gps_sigma < 0.0) fail("negative gps sigma");
  if (d.out_of_aoi_rate < 0.0 || d.out_of_aoi_rate > 1.0) fail("out-of-AOI rate outside [0,1]");
  if (!(dwell_min > 0.0) || dwell_max < dwell_min) fail("bad dwell range");
  if (turn_offset < 0.0) fail("negative turn offset");
}

namespace {

constexpr Meters kSlowZone = 600.0;
constexpr Meters kRampZone = 2000.0;
constexpr Knots kHarbourSpeed = 1.0;
constexpr Seconds kSubstep = 2.0;

constexpr int kMids[] = {257, 258, 259, 231, 219, 251};

struct Row {
  Mmsi mmsi{};
  Timestamp ts{};
  LatLon pos;
  double sog{};
  double cog{};
  int ship_type{};
  std::string destination;
  int nav_status{};
};

std::string format_row(const Row& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%u,%s,%.6f,%.6f,%.1f,%.1f,%d,%d,", r.mmsi, format_timestamp(r.ts).c_str(),
                r.pos.lat, r.pos.lon, r.sog, r.cog, static_cast<int>(std::lround(r.cog)) % 360, r.ship_type);
  // Static voyage fields carried by real feeds; ingest drops them.
  const unsigned serial = r.mmsi % 1'000'000u;
  char stat[96];
  std::snprintf(stat, sizeof(stat), ",IMO%07u,LA%04u,NORDIC CARRIER %u,%u,%u,%.1f,A", 9'000'000u + serial % 1'000'000u,
                serial % 10'000u, serial % 1000u, 90u + serial % 100u, 14u + serial % 12u, 5.0 + (serial % 40) / 10.0);
  return std::string(buf) + r.destination + "," + std::to_string(r.nav_status) + stat;
}

Mmsi make_mmsi(std::size_t serial) {
  const int mid = kMids[serial % std::size(kMids)];
  return static_cast<Mmsi>(mid) * 1'000'000u + 100'000u + static_cast<Mmsi>(serial);
}

std::string upper_name(const Berth& b) {
  std::string s = b.name;
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// Berth -> interior waypoints -> berth, with a turn point next to each berth
// so arrivals and departures carry a ~120 degree heading change.
std::vector<LatLon> sailed_polyline(const ScenarioSpec& spec, const CorridorSpec& c, std::size_t path, bool reverse) {
  std::vector<LatLon> pts;
  pts.push_back(spec.berths[c.from].pos);
  if (!c.paths.empty()) {
    const auto& via = c.paths[path % c.paths.size()];
    pts.insert(pts.end(), via.begin(), via.end());
  }
  pts.push_back(spec.berths[c.to].pos);
  if (reverse) std::reverse(pts.begin(), pts.end());
  if (spec.turn_offset <= 0.0) return pts;

  const LatLon a = pts.front();
  const LatLon b = pts.back();
  const Degrees out = initial_bearing(a, pts[1]);
  const Degrees in = initial_bearing(pts[pts.size() - 2], b);
  std::vector<LatLon> line;
  line.push_back(a);
  line.push_back(destination_point(a, out + 120.0, spec.turn_offset));
  line.insert(line.end(), pts.begin() + 1, pts.end() - 1);
  line.push_back(destination_point(b, in - 60.0, spec.turn_offset));
  line.push_back(b);
  return line;
}

class Polyline {
 public:
  explicit Polyline(std::vector<LatLon> pts) : pts_(std::move(pts)) {
    cum_.push_back(0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) {
      cum_.push_back(cum_.back() + haversine_distance(pts_[i - 1], pts_[i]));
      bearing_.push_back(initial_bearing(pts_[i - 1], pts_[i]));
    }
  }
  Meters length() const { return cum_.back(); }
  std::pair<LatLon, Degrees> at(Meters s) const {
    s = std::clamp(s, 0.0, length());
    auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    std::size_t i = static_cast<std::size_t>(it - cum_.begin());
    i = std::clamp<std::size_t>(i, 1, pts_.size() - 1) - 1;
    return {destination_point(pts_[i], bearing_[i], s - cum_[i]), bearing_[i]};
  }

 private:
  std::vector<LatLon> pts_;
  std::vector<Meters> cum_;
  std::vector<Degrees> bearing_;
};

// Trapezoidal profile: harbour speed near either end, linear ramp, cruise.
Knots speed_at(Meters s, Meters length, Knots cruise) {
  const Meters edge = std::min(s, length - s);
  if (edge < kSlowZone) return kHarbourSpeed;
  return kHarbourSpeed + (cruise - kHarbourSpeed) * std::min(1.0, (edge - kSlowZone) / kRampZone);
}

struct Vessel {
  Mmsi mmsi{};
  int ship_type{};
  double t{};
};

struct Hole {
  Meters start{};
  Meters length{};
};

class Simulator {
 public:
  Simulator(const ScenarioSpec& spec, Rng& rng, std::vector<Row>& rows) : spec_(spec), rng_(rng), rows_(rows) {}

  void dwell(Vessel& v, const Berth& at, Seconds interval, const std::string& destination) {
    const Seconds duration = rng_.uniform(spec_.dwell_min, spec_.dwell_max);
    const double heading = rng_.uniform(0.0, 360.0);
    const double end = v.t + duration;
    while (v.t + interval <= end) {
      v.t += interval;
      emit(v, at.pos, rng_.uniform(0.1, 0.3), heading, destination, 5);
    }
  }

  // Sails `line`, reporting only fixes with arc length in [keep_from, keep_to].
  void sail(Vessel& v, const Polyline& line, const CorridorSpec& c, const std::string& destination,
            const std::vector<Hole>& holes, Meters keep_from, Meters keep_to, VoyageTruth& truth) {
    const Meters length = line.length();
    const double cruise = c.speed;
    double s = 0.0;
    double next_report = v.t;
    std::size_t hole = 0;
    bool in_hole = false;
    bool hole_pending = false;
    bool first = true;
    while (true) {
      const bool done = s >= length;
      if (done) s = length;
      if (!in_hole && hole < holes.size() && s >= holes[hole].start) {
        in_hole = true;
        truth.gaps.push_back({last_ts_, 0});
        v.t += spec_.defects.gap_duration;
      }
      if (in_hole && s >= holes[hole].start + holes[hole].length) {
        in_hole = false;
        hole_pending = true;
        next_report = v.t;
        ++hole;
      }
      if ((v.t >= next_report || done) && !in_hole && s >= keep_from && s <= keep_to) {
        const auto [pos, cog] = line.at(s);
        if (emit(v, pos, speed_at(s, length, cruise), cog, destination, 0)) {
          if (first) truth.t_depart = last_ts_;
          first = false;
          truth.t_arrive = last_ts_;
          if (hole_pending) {
            truth.gaps.back().t_end = last_ts_;
            hole_pending = false;
          }
        }
      }
      while (next_report <= v.t) next_report += c.report_interval;
      if (done) break;
      s += knots_to_mps(speed_at(s, length, cruise)) * kSubstep;
      v.t += kSubstep;
    }
  }

 private:
  bool emit(const Vessel& v, const LatLon& pos, double sog, double cog, const std::string& destination, int nav) {
    const Timestamp ts = std::llround(v.t);
    if (have_last_ && last_mmsi_ == v.mmsi && ts <= last_ts_) return false;
    const auto [dx, dy] = rng_.truncated_offset(spec_.defects.gps_sigma);
    Row r;
    r.mmsi = v.mmsi;
    r.ts = ts;
    r.pos = offset_meters(pos, dx, dy);
    r.sog = sog;
    r.cog = std::fmod(cog + 360.0, 360.0);
    r.ship_type = v.ship_type;
    r.destination = destination;
    r.nav_status = nav;
    rows_.push_back(std::move(r));
    have_last_ = true;
    last_mmsi_ = v.mmsi;
    last_ts_ = ts;
    return true;
  }

  const ScenarioSpec& spec_;
  Rng& rng_;
  std::vector<Row>& rows_;
  bool have_last_{false};
  Mmsi last_mmsi_{};
  Timestamp last_ts_{};
};

std::vector<Hole> plan_holes(Rng& rng, const DefectModel& d, Meters length) {
  std::size_t k = static_cast<std::size_t>(std::floor(d.gaps_per_voyage));
  if (rng.uniform() < d.gaps_per_voyage - std::floor(d.gaps_per_voyage)) ++k;
  std::vector<Hole> holes;
  if (k == 0) return holes;
  const Meters slot = 0.5 * length / static_cast<double>(k);
  const Meters len = std::min(d.gap_length, 0.6 * slot);
  for (std::size_t i = 0; i < k; ++i) {
    const Meters start = 0.25 * length + static_cast<double>(i) * slot + rng.uniform(0.0, slot - len);
    holes.push_back({start, len});
  }
  return holes;
}

struct Slot {
  std::size_t corridor;
  std::size_t vessel;
  std::size_t voyage;
};

void plant_parse_defects(Rng& rng, const ParseDefects& defects, std::vector<std::string>& lines,
                         const std::vector<Row>& rows) {
  if (defects.total() > rows.size()) throw ConfigError("invalid scenario: more parse defects than clean rows");
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < defects.total(); ++i) std::swap(order[i], order[i + rng.index(order.size() - i)]);

  std::vector<std::vector<std::string>> extra(rows.size());
  std::size_t next = 0;
  auto plant = [&](std::size_t count, auto make) {
    for (std::size_t i = 0; i < count; ++i, ++next) {
      const std::size_t src = order[next];
      extra[src].push_back(make(rows[src], lines[src]));
    }
  };
  plant(defects.bad_coords, [](Row r, const std::string&) {
    r.pos.lat = 91.0;
    return format_row(r);
  });
  plant(defects.bad_mmsi, [](Row r, const std::string&) {
    r.mmsi = 12345;
    return format_row(r);
  });
  plant(defects.duplicate, [](const Row&, const std::string& line) { return line; });
  plant(defects.malformed, [](const Row& r, const std::string& line) {
    const std::string ts = format_timestamp(r.ts);
    std::string out = line;
    out.replace(out.find(ts), ts.size(), "not-a-time");
    return out;
  });
  plant(defects.time_regression, [](Row r, const std::string&) {
    r.sog += 0.5;
    return format_row(r);
  });
  plant(defects.speed_jump, [](Row r, const std::string&) {
    r.ts += 1;
    r.pos.lat += r.pos.lat > 0.0 ? -0.5 : 0.5;
    return format_row(r);
  });

  std::vector<std::string> out;
  out.reserve(lines.size() + defects.total());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out.push_back(std::move(lines[i]));
    for (auto& e : extra[i]) out.push_back(std::move(e));
  }
  lines = std::move(out);
}

}  // namespace

Scenario generate(const ScenarioSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<Row> rows;
  Scenario scenario;
  GroundTruth& truth = scenario.truth;
  truth.seed = spec.seed;
  truth.berths = spec.berths;
  truth.defects = spec.defects.parse;

  std::vector<Slot> slots;
  for (std::size_t c = 0; c < spec.corridors.size(); ++c) {
    for (std::size_t v = 0; v < spec.corridors[c].vessels; ++v) {
      for (std::size_t j = 0; j < spec.corridors[c].voyages_per_vessel; ++j) slots.push_back({c, v, j});
    }
  }
  const auto n_planted = static_cast<std::size_t>(std::llround(spec.defects.out_of_aoi_rate * slots.size()));
  std::vector<std::size_t> order(slots.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < n_planted; ++i) std::swap(order[i], order[i + rng.index(order.size() - i)]);
  std::vector<char> planted(slots.size(), 0);
  for (std::size_t i = 0; i < n_planted; ++i) planted[order[i]] = 1;

  Simulator sim(spec, rng, rows);
  std::size_t serial = 0;
  std::size_t slot = 0;
  for (std::size_t c = 0; c < spec.corridors.size(); ++c) {
    const CorridorSpec& cor = spec.corridors[c];
    for (std::size_t k = 0; k < cor.vessels; ++k) {
      std::size_t n_voyages = 0;
      for (std::size_t j = 0; j < cor.voyages_per_vessel; ++j) n_voyages += planted[slot + j] ? 0 : 1;
      slot += cor.voyages_per_vessel;
      if (n_voyages == 0) continue;

      Vessel v{make_mmsi(serial++), cor.ship_type, static_cast<double>(spec.start) + rng.uniform(0.0, 86400.0)};
      const std::size_t path = cor.paths.empty() ? 0 : k % cor.paths.size();
      std::size_t at = cor.from;
      for (std::size_t j = 0; j < n_voyages; ++j) {
        const bool reverse = at != cor.from;
        const std::size_t to = reverse ? cor.from : cor.to;
        sim.dwell(v, spec.berths[at], cor.report_interval, upper_name(spec.berths[to]));
        const Polyline line(sailed_polyline(spec, cor, path, reverse));
        VoyageTruth vt;
        vt.mmsi = v.mmsi;
        vt.corridor = c;
        vt.from = at;
        vt.to = to;
        vt.path = path;
        vt.polyline = sailed_polyline(spec, cor, path, reverse);
        const auto holes = plan_holes(rng, spec.defects, line.length());
        sim.sail(v, line, cor, upper_name(spec.berths[to]), holes, 0.0, line.length(), vt);
        truth.voyages.push_back(std::move(vt));
        at = to;
      }
      sim.dwell(v, spec.berths[at], cor.report_interval, upper_name(spec.berths[at]));
    }
  }

  // Out-of-AOI voyages: one standalone vessel each, cut at one end.
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!planted[i]) continue;
    const Slot& s = slots[i];
    const CorridorSpec& cor = spec.corridors[s.corridor];
    const bool reverse = s.voyage % 2 == 1;
    const std::size_t from = reverse ? cor.to : cor.from;
    const std::size_t to = reverse ? cor.from : cor.to;
    const std::size_t path = cor.paths.empty() ? 0 : s.vessel % cor.paths.size();
    const Polyline line(sailed_polyline(spec, cor, path, reverse));
    const bool enter = rng.uniform() < 0.5;
    const Meters cut = rng.uniform(0.3, 0.6) * line.length();

    Vessel v{make_mmsi(serial++), cor.ship_type, static_cast<double>(spec.start) + rng.uniform(0.0, 86400.0)};
    VoyageTruth vt;
    vt.mmsi = v.mmsi;
    vt.corridor = s.corridor;
    vt.from = from;
    vt.to = to;
    vt.path = path;
    vt.out_of_aoi = enter ? "enter" : "exit";
    vt.polyline = sailed_polyline(spec, cor, path, reverse);
    const std::string dest = upper_name(spec.berths[to]);
    if (enter) {
      sim.sail(v, line, cor, dest, {}, cut, line.length(), vt);
      sim.dwell(v, spec.berths[to], cor.report_interval, dest);
    } else {
      sim.dwell(v, spec.berths[from], cor.report_interval, dest);
      sim.sail(v, line, cor, dest, {}, 0.0, cut, vt);
    }
    truth.voyages.push_back(std::move(vt));
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return std::tie(a.ts, a.mmsi) < std::tie(b.ts, b.mmsi); });
  if (spec.max_clean_rows > 0 && rows.size() > spec.max_clean_rows) rows.resize(spec.max_clean_rows);

  std::vector<std::string> lines;
  lines.reserve(rows.size());
  for (const auto& r : rows) lines.push_back(format_row(r));
  plant_parse_defects(rng, spec.defects.parse, lines, rows);

  truth.clean_rows = rows.size();
  truth.rows = lines.size();
  std::string& csv = scenario.csv;
  csv = "mmsi,timestamp,lat,lon,sog,cog,heading,ship_type,destination,nav_status,imo,callsign,name,length,width,"
        "draught,transceiver_class\n";
  for (const auto& l : lines) {
    csv += l;
    csv += '\n';
  }
  return scenario;
}

namespace {

nlohmann::json to_json(const LatLon& p) { return nlohmann::json::array({p.lat, p.lon}); }
LatLon latlon_from_json(const nlohmann::json& j) { return LatLon::make(j.at(0).get<double>(), j.at(1).get<double>()); }

nlohmann::json to_json(const ParseDefects& d) {
  return {{"bad_coords", d.bad_coords},   {"bad_mmsi", d.bad_mmsi},
          {"duplicate", d.duplicate},     {"malformed", d.malformed},
          {"time_regression", d.time_regression}, {"speed_jump", d.speed_jump}};
}

ParseDefects parse_defects_from_json(const nlohmann::json& j) {
  ParseDefects d;
  d.bad_coords = j.value("bad_coords", std::size_t{0});
  d.bad_mmsi = j.value("bad_mmsi", std::size_t{0});
  d.duplicate = j.value("duplicate", std::size_t{0});
  d.malformed = j.value("malformed", std::size_t{0});
  d.time_regression = j.value("time_regression", std::size_t{0});
  d.speed_jump = j.value("speed_jump", std::size_t{0});
  return d;
}

nlohmann::json berths_json(const std::vector<Berth>& berths) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& b : berths) {
    out.push_back({{"name", b.name}, {"lat", b.pos.lat}, {"lon", b.pos.lon}, {"in_reference", b.in_reference}});
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const GroundTruth& gt) {
  nlohmann::json voyages = nlohmann::json::array();
  for (const auto& v : gt.voyages) {
    nlohmann::json gaps = nlohmann::json::array();
    for (const auto& g : v.gaps) gaps.push_back({{"t_start", g.t_start}, {"t_end", g.t_end}});
    nlohmann::json line = nlohmann::json::array();
    for (const auto& p : v.polyline) line.push_back(to_json(p));
    voyages.push_back({{"mmsi", v.mmsi},
                       {"corridor", v.corridor},
                       {"from", v.from},
                       {"to", v.to},
                       {"path", v.path},
                       {"t_depart", v.t_depart},
                       {"t_arrive", v.t_arrive},
                       {"out_of_aoi", v.out_of_aoi},
                       {"gaps", gaps},
                       {"polyline", line}});
  }
  return {{"seed", gt.seed},         {"berths", berths_json(gt.berths)}, {"voyages", voyages},
          {"defects", to_json(gt.defects)}, {"rows", gt.rows},            {"clean_rows", gt.clean_rows}};
}

nlohmann::json to_json(const ScenarioSpec& spec) {
  nlohmann::json corridors = nlohmann::json::array();
  for (const auto& c : spec.corridors) {
    nlohmann::json paths = nlohmann::json::array();
    for (const auto& path : c.paths) {
      nlohmann::json p = nlohmann::json::array();
      for (const auto& w : path) p.push_back(to_json(w));
      paths.push_back(p);
    }
    corridors.push_back({{"from", c.from},
                         {"to", c.to},
                         {"paths", paths},
                         {"vessels", c.vessels},
                         {"voyages_per_vessel", c.voyages_per_vessel},
                         {"ship_type", c.ship_type},
                         {"speed_kn", c.speed},
                         {"report_interval_s", c.report_interval}});
  }
  const auto& d = spec.defects;
  return {{"seed", spec.seed},
          {"start", spec.start},
          {"berths", berths_json(spec.berths)},
          {"corridors", corridors},
          {"defects",
           {{"gaps_per_voyage", d.gaps_per_voyage},
            {"gap_duration_s", d.gap_duration},
            {"gap_length_m", d.gap_length},
            {"gps_sigma_m", d.gps_sigma},
            {"out_of_aoi_rate", d.out_of_aoi_rate},
            {"parse", to_json(d.parse)}}},
          {"dwell_min_s", spec.dwell_min},
          {"dwell_max_s", spec.dwell_max},
          {"turn_offset_m", spec.turn_offset},
          {"max_clean_rows", spec.max_clean_rows}};
}

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  try {
    ScenarioSpec spec;
    spec.seed = j.value("seed", spec.seed);
    spec.start = j.value("start", spec.start);
    for (const auto& b : j.at("berths")) {
      spec.berths.push_back({b.at("name").get<std::string>(), LatLon::make(b.at("lat"), b.at("lon")),
                             b.value("in_reference", false)});
    }
    for (const auto& cj : j.at("corridors")) {
      CorridorSpec c;
      c.from = cj.at("from").get<std::size_t>();
      c.to = cj.at("to").get<std::size_t>();
      if (cj.contains("paths")) {
        for (const auto& pj : cj.at("paths")) {
          std::vector<LatLon> path;
          for (const auto& w : pj) path.push_back(latlon_from_json(w));
          c.paths.push_back(std::move(path));
        }
      }
      c.vessels = cj.value("vessels", c.vessels);
      c.voyages_per_vessel = cj.value("voyages_per_vessel", c.voyages_per_vessel);
      c.ship_type = cj.value("ship_type", c.ship_type);
      c.speed = cj.value("speed_kn", c.speed);
      c.report_interval = cj.value("report_interval_s", c.report_interval);
      spec.corridors.push_back(std::move(c));
    }
    if (j.contains("defects")) {
      const auto& dj = j.at("defects");
      auto& d = spec.defects;
      d.gaps_per_voyage = dj.value("gaps_per_voyage", d.gaps_per_voyage);
      d.gap_duration = dj.value("gap_duration_s", d.gap_duration);
      d.gap_length = dj.value("gap_length_m", d.gap_length);
      d.gps_sigma = dj.value("gps_sigma_m", d.gps_sigma);
      d.out_of_aoi_rate = dj.value("out_of_aoi_rate", d.out_of_aoi_rate);
      if (dj.contains("parse")) d.parse = parse_defects_from_json(dj.at("parse"));
    }
    spec.dwell_min = j.value("dwell_min_s", spec.dwell_min);
    spec.dwell_max = j.value("dwell_max_s", spec.dwell_max);
    spec.turn_offset = j.value("turn_offset_m", spec.turn_offset);
    spec.max_clean_rows = j.value("max_clean_rows", spec.max_clean_rows);
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  } catch (const GeoError& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
}

std::string reference_csv(const std::vector<Berth>& berths) {
  std::string out = "name,lat,lon,source\n";
  char buf[64];
  for (const auto& b : berths) {
    if (!b.in_reference) continue;
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,", b.pos.lat, b.pos.lon);
    out += upper_name(b) + buf + "WPI\n";
  }
  return out;
}

ScenarioSpec fleet_preset(std::uint64_t seed, std::size_t n_voyages, double out_of_aoi_rate, double gaps_per_voyage) {
  ScenarioSpec spec;
  spec.seed = seed;
  spec.berths = {
      {"Nordhamn", LatLon::make(69.65, 18.96), true},   {"Kvalvik", LatLon::make(70.66, 23.68), false},
      {"Skarvoy", LatLon::make(70.98, 25.97), true},    {"Austhavn", LatLon::make(70.37, 31.10), false},
      {"Grenseby", LatLon::make(69.73, 30.05), true},   {"Fjordbotn", LatLon::make(69.97, 23.27), false},
      {"Sundnes", LatLon::make(69.23, 17.98), true},    {"Lodingen", LatLon::make(68.80, 16.54), false},
  };
  const std::pair<std::size_t, std::size_t> pairs[] = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {5, 2}};
  constexpr std::size_t kVessels = 4;
  const std::size_t total_vessels = std::size(pairs) * kVessels;
  const std::size_t per_vessel = std::max<std::size_t>(1, n_voyages / total_vessels);
  for (auto [a, b] : pairs) {
    CorridorSpec c;
    c.from = a;
    c.to = b;
    // One bend 5 km off the straight line so the corridor is not a single arc.
    const LatLon pa = spec.berths[a].pos;
    const LatLon pb = spec.berths[b].pos;
    const LatLon mid = destination_point(pa, initial_bearing(pa, pb), 0.5 * haversine_distance(pa, pb));
    c.paths = {{destination_point(mid, initial_bearing(mid, pb) + 90.0, 5000.0)}};
    c.vessels = kVessels;
    c.voyages_per_vessel = per_vessel;
    spec.corridors.push_back(std::move(c));
  }
  spec.defects.out_of_aoi_rate = out_of_aoi_rate;
  spec.defects.gaps_per_voyage = gaps_per_voyage;
  return spec;
}

ScenarioSpec fork_preset(std::uint64_t seed) {
  ScenarioSpec spec;
  spec.seed = seed;
  const LatLon a = LatLon::make(70.0, 20.0);
  const LatLon b = LatLon::make(70.0, 23.0);
  spec.berths = {{"Vestport", a, true}, {"Ostport", b, false}};
  CorridorSpec c;
  c.from = 0;
  c.to = 1;
  for (Meters side : {20000.0, -20000.0}) {
    auto path = detour_path(a, b, side, 0.3, 0.7, 60.0);
    c.paths.emplace_back(path.begin() + 1, path.end() - 1);
  }
  c.vessels = 8;
  c.voyages_per_vessel = 1;
  spec.corridors.push_back(std::move(c));
  return spec;
}

ScenarioSpec defect_fixture_preset(std::uint64_t seed) {
  ScenarioSpec spec;
  spec.seed = seed;
  const LatLon a = LatLon::make(69.5, 19.0);
  spec.berths = {{"Innhavn", a, true}, {"Utvik", destination_point(a, 70.0, 60000.0), false}};
  CorridorSpec c;
  c.from = 0;
  c.to = 1;
  c.vessels = 2;
  c.voyages_per_vessel = 4;
  spec.corridors.push_back(std::move(c));
  spec.max_clean_rows = 900;
  spec.defects.parse = {20, 20, 20, 10, 15, 15};
  return spec;
}

SyntheticGroup make_route_group(const GroupSpec& spec) {
  if (spec.paths.empty() || spec.n_segments == 0 || !(spec.spacing > 0.0) || !(spec.speed > 0.0)) {
    throw std::invalid_argument("group spec needs paths, segments, spacing and speed");
  }
  Rng rng(spec.seed);
  SyntheticGroup out;
  out.departure = spec.paths.front().front();
  out.destination = spec.paths.front().back();
  out.group.key = spec.key;
  std::size_t pool_index = 0;
  for (std::size_t k = 0; k < spec.n_segments; ++k) {
    const std::size_t pi = k % spec.paths.size();
    const Polyline line(spec.paths[pi]);
    const Meters length = line.length();
    std::vector<Meters> stations{0.0};
    for (Meters s = rng.uniform(0.0, spec.spacing); s < length; s += spec.spacing) {
      if (s > 0.0) stations.push_back(s);
    }
    stations.push_back(length);
    if (rng.uniform() < spec.gap_rate && length > 2.0 * spec.gap_length) {
      const Meters g = rng.uniform(0.2 * length, std::max(0.2 * length, 0.8 * length - spec.gap_length));
      std::erase_if(stations, [&](Meters s) { return s >= g && s <= g + spec.gap_length; });
    }

    Segment seg;
    seg.mmsi = 257'000'000u + static_cast<Mmsi>(k);
    seg.vessel_type = spec.vessel_type;
    seg.departure_port = spec.key.departure;
    seg.arrival_port = spec.key.destination;
    seg.declared_destination = "DEST";
    const double t0 = 1672531200.0 + 86400.0 * static_cast<double>(k);
    for (std::size_t i = 0; i < stations.size(); ++i) {
      const auto [pos, cog] = line.at(stations[i]);
      LatLon p = pos;
      const bool interior = i > 0 && i + 1 < stations.size();
      if (interior) {
        const auto [dx, dy] = rng.truncated_offset(spec.jitter_sigma);
        p = offset_meters(p, dx, dy);
        if (rng.uniform() < spec.noise_rate) {
          // Displaced across the track so the point really leaves the corridor.
          const Degrees side = rng.uniform() < 0.5 ? 90.0 : -90.0;
          p = destination_point(pos, cog + side, rng.uniform(spec.noise_min, spec.noise_max));
          out.noise_indices.push_back(pool_index);
        }
      }
      AisRecord r;
      r.mmsi = seg.mmsi;
      r.ts = std::llround(t0 + stations[i] / knots_to_mps(spec.speed));
      r.pos = p;
      r.sog = spec.speed;
      r.cog = cog;
      r.vessel_type = spec.vessel_type;
      r.destination = "DEST";
      seg.points.push_back(std::move(r));
      ++pool_index;
    }
    seg.refresh();
    out.group.segments.push_back(std::move(seg));
    out.segment_path.push_back(pi);
  }
  out.group.features = compute_features(out.group.segments);
  out.group.low_support = out.group.segments.size() < 3;
  return out;
}

std::vector<LatLon> detour_path(const LatLon& a, const LatLon& b, Meters offset, double f0, double f1, Degrees angle) {
  const Meters length = haversine_distance(a, b);
  const Degrees course = initial_bearing(a, b);
  const Meters run = std::abs(offset) / std::tan(deg_to_rad(angle));
  const Meters s0 = f0 * length;
  const Meters s1 = f1 * length;
  if (!(f0 > 0.0 && f1 < 1.0 && s0 + run < s1 - run)) {
    throw std::invalid_argument("detour does not fit between the fork fractions");
  }
  auto base = [&](Meters s) { return destination_point(a, course, s); };
  auto side = [&](Meters s) {
    const LatLon p = base(s);
    const Degrees local = initial_bearing(p, b);
    return destination_point(p, local + (offset >= 0.0 ? 90.0 : -90.0), std::abs(offset));
  };
  return {a, base(s0), side(s0 + run), side(s1 - run), base(s1), b};
}

}  // namespace aisroutes::synth
