#include "aisroutes/segmentation.hpp"

#include "aisroutes/errors.hpp"
#include "aisroutes/text.hpp"

namespace aisroutes {

std::string_view to_string(FsmState s) {
  switch (s) {
    case FsmState::Init: return "INIT";
    case FsmState::Departure: return "DEPARTURE";
    case FsmState::Sailing: return "SAILING";
    case FsmState::Stationary: return "STATIONARY";
    case FsmState::Arrived: return "ARRIVED";
    case FsmState::Lost: return "LOST";
  }
  return "INIT";
}

std::string_view to_string(Completeness c) {
  switch (c) {
    case Completeness::Complete: return "Complete";
    case Completeness::NoDeparture: return "NoDeparture";
    case Completeness::NoArrival: return "NoArrival";
    case Completeness::Orphan: return "Orphan";
  }
  return "Orphan";
}

std::optional<Completeness> parse_completeness(std::string_view s) {
  for (auto c : {Completeness::Complete, Completeness::NoDeparture, Completeness::NoArrival, Completeness::Orphan}) {
    if (s == to_string(c)) return c;
  }
  return std::nullopt;
}

Completeness derive_completeness(const std::optional<PortId>& departure, const std::optional<PortId>& arrival) {
  if (departure && arrival) return Completeness::Complete;
  if (arrival) return Completeness::NoDeparture;
  if (departure) return Completeness::NoArrival;
  return Completeness::Orphan;
}

void Segment::refresh() {
  if (!points.empty()) {
    t_start = points.front().ts;
    t_end = points.back().ts;
  }
  distance = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) distance += haversine_distance(points[i - 1].pos, points[i].pos);
  completeness = derive_completeness(departure_port, arrival_port);
}

FsmContext::FsmContext(const PortDatabase& db, const SegmentationConfig& cfg, Mmsi mmsi, VesselType type)
    : db_(&db), cfg_(&cfg), mmsi_(mmsi), type_(type), rolling_(cfg.window, cfg.window_min_fixes) {}

void FsmContext::open(std::optional<PortId> departure) {
  Segment s;
  s.mmsi = mmsi_;
  s.vessel_type = type_;
  s.departure_port = departure;
  open_ = std::move(s);
  departure_port_ = departure;
}

std::optional<Segment> FsmContext::close_open(std::optional<PortId> arrival) {
  if (!open_) return std::nullopt;
  Segment s = std::move(*open_);
  open_.reset();
  departure_port_.reset();
  s.arrival_port = arrival;
  // The destination declared last is the one in force when the segment ends.
  for (auto it = s.points.rbegin(); it != s.points.rend(); ++it) {
    std::string d = text::normalize_destination(it->destination);
    if (!d.empty()) {
      s.declared_destination = std::move(d);
      break;
    }
  }
  s.refresh();
  return s;
}

FsmStepResult fsm_step(FsmState state, const AisRecord& rec, FsmContext& ctx) {
  const SegmentationConfig& cfg = ctx.cfg();
  FsmStepResult out{state, {}};

  if (ctx.prev_ && rec.ts < ctx.prev_->ts) {
    throw ConsistencyError("fsm_step: records out of time order for mmsi " + std::to_string(rec.mmsi));
  }
  if (ctx.prev_ && static_cast<double>(rec.ts - ctx.prev_->ts) > cfg.t_lost) {
    if (auto closed = ctx.close_open()) {
      out.events.push_back({FsmEvent::Kind::SegmentClosed, std::nullopt, std::move(closed)});
    }
    ctx.rolling_.reset();
    ctx.rolling_.push(rec.ts, fix_speed(nullptr, rec));
    ctx.home_port_.reset();
    ctx.prev_ = rec;
    out.state = FsmState::Lost;
    return out;
  }

  const AisRecord* prev = ctx.prev_ ? &*ctx.prev_ : nullptr;
  const Knots vbar = ctx.rolling_.push(rec.ts, fix_speed(prev, rec));
  const auto near = nearest_port(rec.pos, ctx.db(), cfg.d_port_slack);
  const std::optional<PortId> near_id = near ? std::optional<PortId>(near->port->port_id) : std::nullopt;
  const bool slow = vbar < cfg.min_speed_departure;

  auto arrive = [&] {
    ctx.open_->points.push_back(rec);
    auto closed = ctx.close_open(near_id);
    out.events.push_back({FsmEvent::Kind::SegmentClosed, near_id, std::move(closed)});
    ctx.home_port_ = near_id;
    out.state = FsmState::Arrived;
  };

  switch (state) {
    case FsmState::Init:
    case FsmState::Lost:
      if (near && slow) {
        ctx.home_port_ = near_id;
        out.state = FsmState::Stationary;
      } else {
        ctx.open(std::nullopt);
        ctx.open_->points.push_back(rec);
        out.events.push_back({FsmEvent::Kind::SegmentOpened, std::nullopt, std::nullopt});
        out.state = FsmState::Sailing;
      }
      break;

    case FsmState::Stationary:
      if (ctx.open_) {
        // Stopped at sea with the voyage still open.
        if (near && slow) {
          arrive();
        } else {
          ctx.open_->points.push_back(rec);
          if (!slow) out.state = FsmState::Sailing;
        }
      } else if (!slow) {
        const std::optional<PortId> dep = near_id ? near_id : ctx.home_port_;
        ctx.open(dep);
        ctx.open_->points.push_back(rec);
        out.events.push_back({FsmEvent::Kind::SegmentOpened, dep, std::nullopt});
        out.state = FsmState::Departure;
      }
      break;

    case FsmState::Departure: {
      if (near && slow) {
        arrive();
        break;
      }
      ctx.open_->points.push_back(rec);
      const Port* dep = ctx.departure_port_ ? ctx.db().find(*ctx.departure_port_) : nullptr;
      if (dep == nullptr || haversine_distance(rec.pos, dep->centroid) > dep->radius + cfg.d_port_slack) {
        out.state = FsmState::Sailing;
      }
      break;
    }

    case FsmState::Sailing:
      if (near && slow) {
        arrive();
      } else {
        ctx.open_->points.push_back(rec);
        if (!near && vbar < cfg.v_stop) out.state = FsmState::Stationary;
      }
      break;

    case FsmState::Arrived:
      out.state = FsmState::Stationary;
      break;
  }
  ctx.prev_ = rec;
  return out;
}

std::vector<Segment> extract_segments(const VesselTrack& track, const PortDatabase& db,
                                      const SegmentationConfig& cfg) {
  FsmContext ctx(db, cfg, track.mmsi, track.vessel_type);
  std::vector<Segment> raw;
  FsmState state = FsmState::Init;
  for (const auto& rec : track.records) {
    auto step = fsm_step(state, rec, ctx);
    state = step.state;
    for (auto& ev : step.events) {
      if (ev.kind == FsmEvent::Kind::SegmentClosed && ev.segment) raw.push_back(std::move(*ev.segment));
    }
  }
  if (auto trailing = ctx.close_open()) raw.push_back(std::move(*trailing));

  std::vector<Segment> out;
  for (auto& s : raw) {
    if (s.points.size() < cfg.min_segment_points || s.distance < cfg.min_segment_distance) continue;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Segment> reduce_by_destination(std::span<const Segment> segments, const SegmentationConfig& cfg) {
  std::vector<Segment> out;
  for (const auto& seg : segments) {
    if (!out.empty()) {
      Segment& cur = out.back();
      const bool mergeable = !cur.arrival_port && !seg.departure_port && cur.mmsi == seg.mmsi &&
                             !cur.declared_destination.empty() &&
                             cur.declared_destination == seg.declared_destination &&
                             static_cast<double>(seg.t_start - cur.t_end) <= cfg.t_merge_max &&
                             seg.t_start >= cur.t_end;
      if (mergeable) {
        cur.points.insert(cur.points.end(), seg.points.begin(), seg.points.end());
        cur.arrival_port = seg.arrival_port;
        cur.refresh();
        continue;
      }
    }
    out.push_back(seg);
  }
  return out;
}

nlohmann::json to_json(const Segment& s) {
  auto port = [](const std::optional<PortId>& p) { return p ? nlohmann::json(*p) : nlohmann::json(nullptr); };
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& r : s.points) {
    pts.push_back({r.ts, r.pos.lat, r.pos.lon, r.sog ? nlohmann::json(*r.sog) : nlohmann::json(nullptr)});
  }
  return {{"mmsi", s.mmsi},
          {"vessel_type", to_string(s.vessel_type)},
          {"departure_port", port(s.departure_port)},
          {"arrival_port", port(s.arrival_port)},
          {"completeness", to_string(s.completeness)},
          {"destination", s.declared_destination},
          {"t_start", s.t_start},
          {"t_end", s.t_end},
          {"distance_m", s.distance},
          {"points", pts}};
}

Segment segment_from_json(const nlohmann::json& j) {
  try {
    Segment s;
    s.mmsi = j.at("mmsi").get<Mmsi>();
    const auto vt = parse_vessel_type(j.at("vessel_type").get<std::string>());
    if (!vt) throw ConsistencyError("unknown vessel type in segment");
    s.vessel_type = *vt;
    if (!j.at("departure_port").is_null()) s.departure_port = j.at("departure_port").get<PortId>();
    if (!j.at("arrival_port").is_null()) s.arrival_port = j.at("arrival_port").get<PortId>();
    s.declared_destination = j.at("destination").get<std::string>();
    for (const auto& p : j.at("points")) {
      AisRecord r;
      r.mmsi = s.mmsi;
      r.vessel_type = s.vessel_type;
      r.ts = p.at(0).get<Timestamp>();
      r.pos = LatLon::make(p.at(1).get<double>(), p.at(2).get<double>());
      if (!p.at(3).is_null()) r.sog = p.at(3).get<double>();
      s.points.push_back(r);
    }
    s.refresh();
    s.t_start = j.at("t_start").get<Timestamp>();
    s.t_end = j.at("t_end").get<Timestamp>();
    s.distance = j.at("distance_m").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError(std::string("malformed segment record: ") + e.what());
  } catch (const GeoError& e) {
    throw ConsistencyError(std::string("malformed segment record: ") + e.what());
  }
}

}  // namespace aisroutes
