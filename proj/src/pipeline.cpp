#include "aisroutes/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <unistd.h>

#include "aisroutes/aggregation.hpp"
#include "aisroutes/errors.hpp"
#include "aisroutes/parallel.hpp"
#include "aisroutes/synthgen.hpp"
#include "aisroutes/text.hpp"

namespace fs = std::filesystem;

namespace aisroutes {

namespace {

struct KeyDef {
  ConfigKey key;
  std::function<void(PipelineConfig&, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view why) {
  throw ConfigError("bad value '" + std::string(value) + "' for " + std::string(key) + ": " + std::string(why));
}

KeyDef real(const char* name, const char* unit, double PipelineConfig::*field, bool allow_zero = false) {
  return {{name, unit},
          [=](PipelineConfig& c, std::string_view v) {
            const auto d = text::parse_double(v);
            if (!d || !std::isfinite(*d)) bad_value(name, v, "not a number");
            if (allow_zero ? *d < 0.0 : *d <= 0.0) bad_value(name, v, "must be positive");
            c.*field = *d;
          },
          [=](const PipelineConfig& c) { return text::format_double(c.*field); }};
}

KeyDef count(const char* name, std::size_t PipelineConfig::*field) {
  return {{name, "count"},
          [=](PipelineConfig& c, std::string_view v) {
            const auto n = text::parse_int(v);
            if (!n || *n < 1) bad_value(name, v, "must be a positive integer");
            c.*field = static_cast<std::size_t>(*n);
          },
          [=](const PipelineConfig& c) { return std::to_string(c.*field); }};
}

KeyDef path(const char* name, fs::path PipelineConfig::*field) {
  return {{name, "path"},
          [=](PipelineConfig& c, std::string_view v) { c.*field = fs::path(std::string(text::trim(v))); },
          [=](const PipelineConfig& c) { return (c.*field).string(); }};
}

const std::vector<KeyDef>& key_defs() {
  static const std::vector<KeyDef> defs = [] {
    using C = PipelineConfig;
    std::vector<KeyDef> d = {
        real("min_speed_departure_kn", "kn", &C::min_speed_departure),
        real("v_stop_kn", "kn", &C::v_stop),
        real("t_lost_s", "s", &C::t_lost),
        real("window_s", "s", &C::window),
        count("window_min_fixes", &C::window_min_fixes),
        real("heading_change_min_deg", "deg", &C::heading_change_min),
        real("dwell_min_s", "s", &C::dwell_min),
        real("bearing_min_step_m", "m", &C::bearing_min_step, true),
        real("d_port_slack_m", "m", &C::d_port_slack, true),
        real("eps_port_m", "m", &C::eps_port),
        count("min_samples_port", &C::min_samples_port),
        real("label_match_dist_m", "m", &C::label_match_dist),
        real("port_min_radius_m", "m", &C::port_min_radius),
        real("port_max_radius_m", "m", &C::port_max_radius),
        count("min_segment_points", &C::min_segment_points),
        real("min_segment_distance_m", "m", &C::min_segment_distance, true),
        real("t_merge_max_s", "s", &C::t_merge_max),
        real("speed_jump_kn", "kn", &C::speed_jump),
        count("min_group_routes", &C::min_group_routes),
        real("eps_m", "m", &C::eps),
        count("min_samples", &C::min_samples),
        real("search_radius_m", "m", &C::search_radius),
        real("expansion_factor", "ratio", &C::expansion_factor),
        {{"max_expansions", "count"},
         [](C& c, std::string_view v) {
           const auto n = text::parse_int(v);
           if (!n || *n < 0) bad_value("max_expansions", v, "must be a non-negative integer");
           c.max_expansions = static_cast<std::size_t>(*n);
         },
         [](const C& c) { return std::to_string(c.max_expansions); }},
        count("max_iterations", &C::max_iterations),
        real("d_complete_min_m", "m", &C::d_complete_min),
        real("eps_min_m", "m", &C::eps_min),
        real("eps_max_m", "m", &C::eps_max),
        real("r_min_m", "m", &C::r_min),
        real("r_max_m", "m", &C::r_max),
        count("min_samples_min", &C::min_samples_min),
        count("min_samples_max", &C::min_samples_max),
        {{"workers", "count"},
         [](C& c, std::string_view v) {
           const auto n = text::parse_int(v);
           if (!n || *n < 1 || *n > 1024) bad_value("workers", v, "must be in [1, 1024]");
           c.workers = static_cast<int>(*n);
         },
         [](const C& c) { return std::to_string(c.workers); }},
        {{"seed", "count"},
         [](C& c, std::string_view v) {
           const auto n = text::parse_int(v);
           if (!n || *n < 0) bad_value("seed", v, "must be a non-negative integer");
           c.seed = static_cast<std::uint64_t>(*n);
         },
         [](const C& c) { return std::to_string(c.seed); }},
        path("work_dir", &C::work_dir),
        path("input", &C::input),
        path("reference", &C::reference),
        path("labels", &C::labels),
        path("params_model", &C::params_model),
        {{"columns", "map"},
         [](C& c, std::string_view v) {
           ColumnMap m;
           std::string_view rest = text::trim(v);
           while (!rest.empty()) {
             const auto comma = rest.find(',');
             const std::string_view item = text::trim(rest.substr(0, comma));
             rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
             if (item.empty()) continue;
             const auto eq = item.find('=');
             if (eq == std::string_view::npos) bad_value("columns", v, "expected canonical=header pairs");
             m[std::string(text::trim(item.substr(0, eq)))] = std::string(text::trim(item.substr(eq + 1)));
           }
           c.columns = std::move(m);
         },
         [](const C& c) {
           std::string out;
           for (const auto& [k, h] : c.columns) out += (out.empty() ? "" : ",") + k + "=" + h;
           return out;
         }},
    };
    return d;
  }();
  return defs;
}

const KeyDef& find_key(std::string_view key) {
  for (const auto& d : key_defs()) {
    if (d.key.name == key) return d;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& d : key_defs()) out.push_back(d.key);
    return out;
  }();
  return keys;
}

void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  find_key(key).set(cfg, text::trim(value));
}

std::string get_config_value(const PipelineConfig& cfg, std::string_view key) { return find_key(key).get(cfg); }

void load_config_file(PipelineConfig& cfg, const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string_view body = text::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    set_config_value(cfg, text::trim(body.substr(0, eq)), text::trim(body.substr(eq + 1)));
  }
}

void PipelineConfig::validate() const {
  if (search_radius < eps) throw ConfigError("search_radius_m must be >= eps_m");
  if (eps_min > eps_max || r_min > r_max || min_samples_min > min_samples_max) {
    throw ConfigError("clamp range has min > max");
  }
  if (port_min_radius > port_max_radius) throw ConfigError("port_min_radius_m must be <= port_max_radius_m");
  if (v_stop > min_speed_departure) throw ConfigError("v_stop_kn must be <= min_speed_departure_kn");
}

TrackConfig PipelineConfig::tracks() const { return TrackConfig{speed_jump}; }

PortDetectionConfig PipelineConfig::port_detection() const {
  PortDetectionConfig c;
  c.window = window;
  c.window_min_fixes = window_min_fixes;
  c.min_speed_departure = min_speed_departure;
  c.heading_change_min = heading_change_min;
  c.dwell_min = dwell_min;
  c.bearing_min_step = bearing_min_step;
  return c;
}

PortConsolidationConfig PipelineConfig::port_consolidation() const {
  PortConsolidationConfig c;
  c.params = DbscanParams{eps_port, min_samples_port};
  c.label_match_dist = label_match_dist;
  c.min_radius = port_min_radius;
  c.max_radius = port_max_radius;
  return c;
}

SegmentationConfig PipelineConfig::segmentation() const {
  SegmentationConfig c;
  c.min_speed_departure = min_speed_departure;
  c.v_stop = v_stop;
  c.t_lost = t_lost;
  c.window = window;
  c.window_min_fixes = window_min_fixes;
  c.d_port_slack = d_port_slack;
  c.min_segment_points = min_segment_points;
  c.min_segment_distance = min_segment_distance;
  c.t_merge_max = t_merge_max;
  return c;
}

ExtractionParams PipelineConfig::extraction() const {
  ExtractionParams p = ExtractionParams::make(eps, min_samples, search_radius, d_complete_min);
  p.expansion_factor = expansion_factor;
  p.max_expansions = max_expansions;
  p.max_iterations = max_iterations;
  return p;
}

ParamClamp PipelineConfig::clamp() const {
  ParamClamp c;
  c.eps_min = eps_min;
  c.eps_max = eps_max;
  c.r_min = r_min;
  c.r_max = r_max;
  c.min_samples_min = static_cast<double>(min_samples_min);
  c.min_samples_max = static_cast<double>(min_samples_max);
  c.d_complete_min = d_complete_min;
  return c;
}

// ---------------------------------------------------------------------------
// Files

void write_file_atomic(const fs::path& file, std::string_view content) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  fs::path tmp = file;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw MissingInputError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw MissingInputError("write failed for " + tmp.string());
  }
  fs::rename(tmp, file);
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw MissingInputError("missing input " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

void require(const fs::path& p, std::string_view produced_by) {
  if (!fs::exists(p)) {
    throw MissingInputError("missing input " + p.string() + " (run the " + std::string(produced_by) + " stage first)");
  }
}

nlohmann::json parse_json_file(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

fs::path tracks_dir(const PipelineConfig& c) { return c.work_dir / "tracks"; }
fs::path ports_file(const PipelineConfig& c) { return c.work_dir / "ports.json"; }
fs::path segments_file(const PipelineConfig& c) { return c.work_dir / "segments.jsonl"; }
fs::path groups_file(const PipelineConfig& c) { return c.work_dir / "groups.csv"; }
fs::path aggregated_file(const PipelineConfig& c) { return c.work_dir / "aggregated.jsonl"; }
fs::path model_file(const PipelineConfig& c) { return c.work_dir / "params_model.json"; }
fs::path routes_file(const PipelineConfig& c) { return c.work_dir / "routes.json"; }

double fraction(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Stage fragments are kept one per stage, in pipeline order.
nlohmann::json record_stage(const PipelineConfig& cfg, std::string_view stage, const StageTimer& timer,
                            nlohmann::json stats) {
  nlohmann::json fragment = {{"stage", stage},
                             {"wall_clock_s", timer.seconds()},
                             {"workers", cfg.workers},
                             {"stats", std::move(stats)}};
  nlohmann::json manifest = load_manifest(cfg.work_dir);
  nlohmann::json stages = nlohmann::json::array();
  for (std::string_view name : kStages) {
    if (name == stage) {
      stages.push_back(fragment);
      continue;
    }
    for (const auto& f : manifest["stages"]) {
      if (f.value("stage", "") == name) stages.push_back(f);
    }
  }
  manifest["stages"] = stages;
  write_file_atomic(cfg.work_dir / "manifest.json", dump(manifest));
  return fragment;
}

PortDatabase load_ports(const PipelineConfig& cfg) {
  require(ports_file(cfg), "ports");
  return port_database_from_json(parse_json_file(ports_file(cfg)));
}

std::vector<Segment> load_segments(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<Segment> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(segment_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ConsistencyError(p.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RouteGroup> load_groups(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<RouteGroup> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      RouteGroup g;
      const auto key = GroupKey::parse(j.at("group_key").get<std::string>());
      if (!key) throw ConsistencyError("bad group key in " + p.string());
      g.key = *key;
      g.low_support = j.at("low_support").get<bool>();
      for (const auto& s : j.at("segments")) g.segments.push_back(segment_from_json(s));
      g.features = compute_features(g.segments);
      out.push_back(std::move(g));
    } catch (const nlohmann::json::exception& e) {
      throw ConsistencyError("malformed group record in " + p.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<VesselTrack> load_tracks(const fs::path& dir, int workers) {
  if (!fs::is_directory(dir)) throw MissingInputError("missing input " + dir.string() + " (run the ingest stage first)");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".track") files.push_back(e.path());
  }
  std::vector<VesselTrack> tracks(files.size());
  parallel_for(workers, files.size(), [&](std::size_t i) {
    std::istringstream in(read_file(files[i]));
    ParseResult parsed = parse_records(in);
    if (parsed.report.records_out != parsed.report.records_in) {
      throw ConsistencyError("track file " + files[i].string() + " contains invalid rows");
    }
    QualityReport scratch;
    auto built = build_tracks(std::move(parsed.records), scratch);
    if (built.size() != 1 || scratch.total_rejected() != 0) {
      throw ConsistencyError("track file " + files[i].string() + " is not a single clean track");
    }
    tracks[i] = std::move(built.front());
  });
  std::sort(tracks.begin(), tracks.end(), [](const VesselTrack& a, const VesselTrack& b) { return a.mmsi < b.mmsi; });
  return tracks;
}

nlohmann::json to_json(const QualityReport& q) {
  nlohmann::json reasons = nlohmann::json::object();
  for (const auto& [r, n] : q.rejected_by_reason) reasons[std::string(to_string(r))] = n;
  return {{"records_in", q.records_in},
          {"records_out", q.records_out},
          {"rejected_by_reason", reasons},
          {"total_rejected", q.total_rejected()},
          {"bytes_in", q.bytes_in},
          {"bytes_out", q.bytes_out},
          {"size_reduction", q.size_reduction()}};
}

nlohmann::json load_manifest(const fs::path& work_dir) {
  const fs::path p = work_dir / "manifest.json";
  if (!fs::exists(p)) return {{"stages", nlohmann::json::array()}};
  nlohmann::json m = parse_json_file(p);
  if (!m.is_object() || !m.contains("stages") || !m["stages"].is_array()) {
    throw ConsistencyError("malformed manifest " + p.string());
  }
  return m;
}

std::string format_report(const nlohmann::json& manifest) {
  std::ostringstream out;
  char head[64];
  std::snprintf(head, sizeof(head), "%-11s %9s  %s\n", "stage", "wall_s", "stats");
  out << head;
  for (const auto& f : manifest.value("stages", nlohmann::json::array())) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-11s %9.3f  ", f.value("stage", "?").c_str(), f.value("wall_clock_s", 0.0));
    out << buf;
    std::string stats;
    for (const auto& [k, v] : f.value("stats", nlohmann::json::object()).items()) {
      if (v.is_object() || v.is_array()) continue;
      if (!stats.empty()) stats += ' ';
      stats += k + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
    }
    out << stats << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Stages

nlohmann::json run_synth(const PipelineConfig& cfg, const SynthOptions& opts) {
  StageTimer timer;
  synth::ScenarioSpec spec;
  if (!opts.scenario.empty()) {
    require(opts.scenario, "scenario");
    try {
      spec = synth::scenario_from_json(nlohmann::json::parse(read_file(opts.scenario)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed scenario file: " + std::string(e.what()));
    }
    spec.seed = cfg.seed;
  } else if (opts.preset == "fleet") {
    if (opts.out_of_aoi_rate < 0.0 || opts.out_of_aoi_rate > 1.0 || opts.gaps_per_voyage < 0.0 || opts.voyages == 0) {
      throw ConfigError("bad fleet preset options");
    }
    spec = synth::fleet_preset(cfg.seed, opts.voyages, opts.out_of_aoi_rate, opts.gaps_per_voyage);
  } else if (opts.preset == "fork") {
    spec = synth::fork_preset(cfg.seed);
  } else if (opts.preset == "defects") {
    spec = synth::defect_fixture_preset(cfg.seed);
  } else {
    throw ConfigError("unknown synth preset '" + opts.preset + "'");
  }
  const synth::Scenario sc = synth::generate(spec);
  write_file_atomic(cfg.work_dir / "ais.csv", sc.csv);
  write_file_atomic(cfg.work_dir / "truth.json", dump(synth::to_json(sc.truth)));
  write_file_atomic(cfg.work_dir / "scenario.json", dump(synth::to_json(spec)));
  write_file_atomic(cfg.work_dir / "reference_ports.csv", synth::reference_csv(spec.berths));

  std::size_t out_of_aoi = 0;
  for (const auto& v : sc.truth.voyages) out_of_aoi += v.out_of_aoi.empty() ? 0 : 1;
  return record_stage(cfg, "synth", timer,
                      {{"seed", spec.seed},
                       {"berths", spec.berths.size()},
                       {"voyages", sc.truth.voyages.size()},
                       {"out_of_aoi_voyages", out_of_aoi},
                       {"rows", sc.truth.rows},
                       {"planted_parse_defects", sc.truth.defects.total()}});
}

nlohmann::json run_ingest(const PipelineConfig& cfg) {
  StageTimer timer;
  const fs::path input = cfg.input.empty() ? cfg.work_dir / "ais.csv" : cfg.input;
  require(input, "synth");
  const std::string raw = read_file(input);
  std::istringstream in(raw);
  ParseResult parsed = parse_records(in, cfg.columns);
  QualityReport report = parsed.report;
  report.bytes_in = raw.size();
  const auto tracks = build_tracks(std::move(parsed.records), report, cfg.tracks(), cfg.workers);

  std::vector<std::string> bodies(tracks.size());
  parallel_for(cfg.workers, tracks.size(), [&](std::size_t i) {
    std::ostringstream out;
    write_records_csv(out, tracks[i].records);
    bodies[i] = out.str();
  });

  // Build the new track directory aside, then swap it in.
  const fs::path dir = tracks_dir(cfg);
  fs::path staging = dir;
  staging += ".tmp." + std::to_string(::getpid());
  fs::remove_all(staging);
  fs::create_directories(staging);
  std::uint64_t bytes_out = 0;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    write_file_atomic(staging / (std::to_string(tracks[i].mmsi) + ".track"), bodies[i]);
    bytes_out += bodies[i].size();
  }
  fs::remove_all(dir);
  fs::rename(staging, dir);
  report.bytes_out = bytes_out;

  const nlohmann::json q = to_json(report);
  write_file_atomic(cfg.work_dir / "quality.json", dump(q));
  nlohmann::json stats = q;
  stats["vessels"] = tracks.size();
  return record_stage(cfg, "ingest", timer, stats);
}

nlohmann::json run_ports(const PipelineConfig& cfg) {
  StageTimer timer;
  const auto tracks = load_tracks(tracks_dir(cfg), cfg.workers);
  std::vector<ReferencePort> reference;
  if (!cfg.reference.empty()) {
    require(cfg.reference, "convert-ports");
    std::istringstream in(read_file(cfg.reference));
    reference = read_reference_ports(in);
  }
  std::vector<std::vector<PortCandidate>> per_track(tracks.size());
  const PortDetectionConfig det = cfg.port_detection();
  parallel_for(cfg.workers, tracks.size(), [&](std::size_t i) { per_track[i] = detect_candidates(tracks[i], det); });
  std::vector<PortCandidate> candidates;
  Timestamp built_at = 0;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    candidates.insert(candidates.end(), per_track[i].begin(), per_track[i].end());
    if (!tracks[i].records.empty()) built_at = std::max(built_at, tracks[i].records.back().ts);
  }
  const PortDatabase db = consolidate_ports(candidates, reference, cfg.port_consolidation(), built_at);
  write_file_atomic(ports_file(cfg), dump(to_json(db)));

  std::size_t derived = 0, labeled = 0;
  for (const auto& p : db.ports) {
    if (p.source == PortSource::Derived || p.source == PortSource::Merged) {
      ++derived;
      labeled += p.label ? 1 : 0;
    }
  }
  return record_stage(cfg, "ports", timer,
                      {{"candidates", candidates.size()},
                       {"ports", db.ports.size()},
                       {"derived_ports", derived},
                       {"labeled_derived_ports", labeled},
                       {"labeled_fraction", fraction(labeled, derived)},
                       {"reference_ports", reference.size()}});
}

nlohmann::json run_segments(const PipelineConfig& cfg) {
  StageTimer timer;
  const auto tracks = load_tracks(tracks_dir(cfg), cfg.workers);
  const PortDatabase db = load_ports(cfg);
  const SegmentationConfig sc = cfg.segmentation();
  std::vector<std::vector<Segment>> per_track(tracks.size());
  std::vector<std::size_t> raw_counts(tracks.size());
  parallel_for(cfg.workers, tracks.size(), [&](std::size_t i) {
    const auto raw = extract_segments(tracks[i], db, sc);
    raw_counts[i] = raw.size();
    per_track[i] = reduce_by_destination(raw, sc);
  });

  std::string body;
  std::map<Completeness, std::size_t> by_kind;
  for (auto c : {Completeness::Complete, Completeness::NoDeparture, Completeness::NoArrival, Completeness::Orphan}) {
    by_kind[c] = 0;
  }
  std::size_t total = 0, raw_total = 0;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    raw_total += raw_counts[i];
    for (const auto& s : per_track[i]) {
      body += to_json(s).dump();
      body += '\n';
      ++by_kind[s.completeness];
      ++total;
    }
  }
  write_file_atomic(segments_file(cfg), body);

  nlohmann::json kinds = nlohmann::json::object();
  for (const auto& [k, n] : by_kind) kinds[std::string(to_string(k))] = n;
  return record_stage(cfg, "segments", timer,
                      {{"segments", total},
                       {"segments_before_merge", raw_total},
                       {"by_completeness", kinds},
                       {"complete_fraction", fraction(by_kind[Completeness::Complete], total)}});
}

nlohmann::json run_aggregate(const PipelineConfig& cfg) {
  StageTimer timer;
  require(segments_file(cfg), "segments");
  const PortDatabase db = load_ports(cfg);
  const auto segments = snap_endpoints(load_segments(segments_file(cfg)), db);
  const auto groups = group_routes(segments, cfg.min_group_routes, cfg.workers);

  std::ostringstream csv;
  write_group_summary_csv(csv, groups);
  std::vector<std::string> lines(groups.size());
  parallel_for(cfg.workers, groups.size(), [&](std::size_t i) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : groups[i].segments) segs.push_back(to_json(s));
    lines[i] = nlohmann::json{{"group_key", groups[i].key.str()},
                              {"low_support", groups[i].low_support},
                              {"segments", segs}}
                   .dump();
  });
  std::string body;
  std::size_t grouped = 0, low = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    body += lines[i];
    body += '\n';
    grouped += groups[i].segments.size();
    low += groups[i].low_support ? 1 : 0;
  }
  write_file_atomic(groups_file(cfg), csv.str());
  write_file_atomic(aggregated_file(cfg), body);
  return record_stage(cfg, "aggregate", timer,
                      {{"groups", groups.size()}, {"low_support_groups", low}, {"grouped_segments", grouped}});
}

nlohmann::json run_fit_params(const PipelineConfig& cfg) {
  StageTimer timer;
  require(groups_file(cfg), "aggregate");
  if (cfg.labels.empty()) throw ConfigError("fit-params needs --labels <csv>");
  require(cfg.labels, "labeling");
  std::istringstream gin(read_file(groups_file(cfg)));
  const auto summaries = read_group_summary_csv(gin);
  std::istringstream lin(read_file(cfg.labels));
  const auto labels = read_param_labels(lin);

  std::vector<LabeledGroup> rows;
  std::size_t unmatched = 0;
  for (const auto& l : labels) {
    auto it = std::find_if(summaries.begin(), summaries.end(), [&](const GroupSummary& s) { return s.key == l.key; });
    if (it == summaries.end()) {
      ++unmatched;
      continue;
    }
    rows.push_back({l.key, it->features, l.targets});
  }
  const RegressionModel model = fit(rows);
  write_file_atomic(model_file(cfg), dump(to_json(model)));
  return record_stage(cfg, "fit-params", timer,
                      {{"labeled_groups", rows.size()},
                       {"unmatched_labels", unmatched},
                       {"residual_rms_eps_m", model.targets[0].residual_rms},
                       {"residual_rms_min_samples", model.targets[1].residual_rms},
                       {"residual_rms_r_m", model.targets[2].residual_rms}});
}

nlohmann::json run_routes(const PipelineConfig& cfg) {
  StageTimer timer;
  require(aggregated_file(cfg), "aggregate");
  const PortDatabase db = load_ports(cfg);
  std::optional<RegressionModel> model;
  if (!cfg.params_model.empty()) {
    require(cfg.params_model, "fit-params");
    model = regression_model_from_json(parse_json_file(cfg.params_model));
  }
  const auto groups = load_groups(aggregated_file(cfg));
  const ExtractionParams base = cfg.extraction();
  const ParamClamp clamp = cfg.clamp();

  std::vector<std::optional<ExtractionResult>> results(groups.size());
  parallel_for(cfg.workers, groups.size(), [&](std::size_t i) {
    const ExtractionParams p = model ? predict(*model, groups[i].features, clamp, base) : base;
    results[i] = extract_standard_routes(groups[i], p, db);
  });

  nlohmann::json routes = nlohmann::json::array();
  nlohmann::json audits = nlohmann::json::array();
  std::size_t n_routes = 0, completed = 0, split_groups = 0, outliers = 0, pool = 0, low = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    low += groups[i].low_support ? 1 : 0;
    const auto& r = *results[i];
    for (const auto& route : r.routes) {
      routes.push_back(to_json(route));
      ++n_routes;
      completed += route.completed ? 1 : 0;
    }
    split_groups += r.routes.size() > 1 ? 1 : 0;
    outliers += r.audit.outlier_indices.size();
    pool += r.audit.pool_size;
    audits.push_back(to_json(r.audit));
  }
  write_file_atomic(routes_file(cfg), dump({{"routes", routes}}));
  write_file_atomic(cfg.work_dir / "routes_audit.json", dump({{"groups", audits}}));
  return record_stage(cfg, "routes", timer,
                      {{"groups", groups.size()},
                       {"low_support_groups", low},
                       {"standard_routes", n_routes},
                       {"completed_routes", completed},
                       {"completed_fraction", fraction(completed, n_routes)},
                       {"split_groups", split_groups},
                       {"outlier_points", outliers},
                       {"pool_points", pool},
                       {"outlier_fraction", fraction(outliers, pool)},
                       {"params_source", model ? "regression" : "config"}});
}

nlohmann::json run_export(const PipelineConfig& cfg) {
  StageTimer timer;
  require(routes_file(cfg), "routes");
  const nlohmann::json doc = parse_json_file(routes_file(cfg));
  std::vector<StandardRoute> routes;
  try {
    for (const auto& r : doc.at("routes")) routes.push_back(standard_route_from_json(r));
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError("malformed routes file: " + std::string(e.what()));
  }
  write_file_atomic(cfg.work_dir / "routes.geojson", dump(feature_collection(routes)));
  return record_stage(cfg, "export", timer, {{"features", routes.size()}});
}

nlohmann::json run_stage(std::string_view stage, const PipelineConfig& cfg) {
  cfg.validate();
  if (stage == "ingest") return run_ingest(cfg);
  if (stage == "ports") return run_ports(cfg);
  if (stage == "segments") return run_segments(cfg);
  if (stage == "aggregate") return run_aggregate(cfg);
  if (stage == "fit-params") return run_fit_params(cfg);
  if (stage == "routes") return run_routes(cfg);
  if (stage == "export") return run_export(cfg);
  if (stage == "synth") return run_synth(cfg, {});
  throw ConfigError("unknown stage '" + std::string(stage) + "'");
}

}  // namespace aisroutes
