// Stage-per-command pipeline with on-disk handoff between stages.
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "aisroutes/ingest.hpp"
#include "aisroutes/param_regression.hpp"
#include "aisroutes/ports.hpp"
#include "aisroutes/segmentation.hpp"
#include "aisroutes/standard_route.hpp"

namespace aisroutes {

struct PipelineConfig {
  // Port detection and segmentation.
  Knots min_speed_departure{2.0};
  Knots v_stop{0.5};
  Seconds t_lost{6 * 3600.0};
  Seconds window{600.0};
  std::size_t window_min_fixes{3};
  Degrees heading_change_min{60.0};
  Seconds dwell_min{1800.0};
  Meters bearing_min_step{25.0};
  Meters d_port_slack{1000.0};
  Meters eps_port{1500.0};
  std::size_t min_samples_port{3};
  Meters label_match_dist{3000.0};
  Meters port_min_radius{200.0};
  Meters port_max_radius{10'000.0};
  std::size_t min_segment_points{10};
  Meters min_segment_distance{5000.0};
  Seconds t_merge_max{48 * 3600.0};
  Knots speed_jump{60.0};

  // Aggregation and route extraction.
  std::size_t min_group_routes{3};
  Meters eps{3000.0};
  std::size_t min_samples{3};
  Meters search_radius{6000.0};
  double expansion_factor{1.5};
  std::size_t max_expansions{3};
  std::size_t max_iterations{10'000};
  Meters d_complete_min{5000.0};

  // Clamp ranges for regression-predicted parameters.
  Meters eps_min{100.0}, eps_max{20'000.0};
  Meters r_min{500.0}, r_max{50'000.0};
  std::size_t min_samples_min{2}, min_samples_max{20};

  int workers{1};
  std::uint64_t seed{1};

  std::filesystem::path work_dir{"work"};
  std::filesystem::path input;         // ingest: AIS CSV (default <work_dir>/ais.csv)
  std::filesystem::path reference;     // ports: reference port CSV, optional
  std::filesystem::path labels;        // fit-params: hand-tuned labels CSV
  std::filesystem::path params_model;  // routes: regression model, optional
  ColumnMap columns;

  /// Cross-field checks; throws ConfigError.
  void validate() const;

  TrackConfig tracks() const;
  PortDetectionConfig port_detection() const;
  PortConsolidationConfig port_consolidation() const;
  SegmentationConfig segmentation() const;
  ExtractionParams extraction() const;
  ParamClamp clamp() const;
};

struct ConfigKey {
  std::string name;
  std::string unit;  // "m", "s", "kn", "deg", "count", "ratio", "path", ...
};

/// Every key accepted in a config file or as a `--key value` flag.
const std::vector<ConfigKey>& config_keys();
/// Throws ConfigError on an unknown key or an invalid value.
void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const PipelineConfig& cfg, std::string_view key);
/// Flat `key = value` lines; `#` starts a comment.
void load_config_file(PipelineConfig& cfg, const std::filesystem::path& path);

inline constexpr std::string_view kStages[] = {"synth",      "ingest", "ports",  "segments", "aggregate",
                                               "fit-params", "routes", "export"};

struct SynthOptions {
  std::string preset{"fleet"};  // fleet, fork or defects
  std::filesystem::path scenario;  // JSON ScenarioSpec; overrides the preset
  std::size_t voyages{200};
  double out_of_aoi_rate{0.05};
  double gaps_per_voyage{0.1};
};

/// Each stage reads its inputs from the work directory, writes its outputs
/// atomically and returns its RunStats fragment, which is also merged into
/// <work_dir>/manifest.json.
nlohmann::json run_synth(const PipelineConfig& cfg, const SynthOptions& opts);
nlohmann::json run_ingest(const PipelineConfig& cfg);
nlohmann::json run_ports(const PipelineConfig& cfg);
nlohmann::json run_segments(const PipelineConfig& cfg);
nlohmann::json run_aggregate(const PipelineConfig& cfg);
nlohmann::json run_fit_params(const PipelineConfig& cfg);
nlohmann::json run_routes(const PipelineConfig& cfg);
nlohmann::json run_export(const PipelineConfig& cfg);

/// Dispatches by name (any of kStages except synth, which needs options).
nlohmann::json run_stage(std::string_view stage, const PipelineConfig& cfg);

/// Loads <work_dir>/manifest.json; a missing file reads as an empty manifest.
nlohmann::json load_manifest(const std::filesystem::path& work_dir);
/// Plain-text table of the manifest's stage fragments.
std::string format_report(const nlohmann::json& manifest);

nlohmann::json to_json(const QualityReport& q);

/// Writes via a temporary file in the same directory and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Loads every <mmsi>.track file below `dir`, ordered by MMSI.
std::vector<VesselTrack> load_tracks(const std::filesystem::path& dir, int workers = 1);

}  // namespace aisroutes
