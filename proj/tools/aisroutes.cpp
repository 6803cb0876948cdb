// aisroutes: stage-per-command driver for the route extraction pipeline.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "aisroutes/errors.hpp"
#include "aisroutes/geo.hpp"
#include "aisroutes/pipeline.hpp"

namespace fs = std::filesystem;
using namespace aisroutes;

namespace {

int report_error(int code, std::string_view kind, std::string msg) {
  for (char& c : msg) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "error code=" << code << " kind=" << kind << " msg=" << msg << '\n';
  return code;
}

struct StageArgs {
  std::string config_file;
  std::map<std::string, std::string> overrides;
};

void add_config_options(CLI::App* cmd, StageArgs& args) {
  cmd->add_option("--config", args.config_file, "flat key=value config file");
  for (const auto& key : config_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key.name, [&args, name = key.name](const std::string& v) { args.overrides[name] = v; },
        "[" + key.unit + "]");
  }
}

PipelineConfig resolve(const StageArgs& args) {
  PipelineConfig cfg;
  if (!args.config_file.empty()) load_config_file(cfg, args.config_file);
  for (const auto& [k, v] : args.overrides) set_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

void convert_ports(const std::string& wpi, const std::string& osm, const std::string& out, const std::string& name_col,
                   const std::string& lat_col, const std::string& lon_col) {
  if (wpi.empty() == osm.empty()) throw ConfigError("convert-ports needs exactly one of --wpi or --osm");
  if (out.empty()) throw ConfigError("convert-ports needs --out");
  std::vector<ReferencePort> ports;
  if (!wpi.empty()) {
    std::istringstream in(read_file(wpi));
    ports = convert_wpi_csv(in, name_col, lat_col, lon_col);
  } else {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_file(osm));
    } catch (const nlohmann::json::exception& e) {
      throw ConsistencyError("malformed GeoJSON: " + std::string(e.what()));
    }
    ports = convert_osm_geojson(doc);
  }
  std::ostringstream csv;
  write_reference_ports(csv, ports);
  write_file_atomic(out, csv.str());
  std::cout << "wrote " << ports.size() << " reference ports to " << out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extract standard maritime routes from AIS position reports."};
  app.require_subcommand(1);

  std::map<std::string, StageArgs> stage_args;
  std::map<std::string, CLI::App*> stage_cmds;
  const std::pair<const char*, const char*> stages[] = {
      {"synth", "generate a synthetic AIS fleet with ground truth"},
      {"ingest", "filter AIS CSV and split it into per-vessel tracks"},
      {"ports", "detect and consolidate ports"},
      {"segments", "cut tracks into port-to-port segments"},
      {"aggregate", "group complete segments by port pair and vessel type"},
      {"fit-params", "fit the extraction-parameter regression from labels"},
      {"routes", "extract standard routes per group"},
      {"export", "write routes as a GeoJSON FeatureCollection"},
      {"report", "print the run manifest"},
  };
  for (const auto& [name, help] : stages) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_config_options(cmd, stage_args[name]);
    stage_cmds[name] = cmd;
  }

  SynthOptions synth_opts;
  stage_cmds["synth"]->add_option("--preset", synth_opts.preset, "fleet, fork or defects");
  stage_cmds["synth"]->add_option("--scenario", synth_opts.scenario, "scenario spec JSON (overrides --preset)");
  stage_cmds["synth"]->add_option("--voyages", synth_opts.voyages, "fleet preset: total voyages");
  stage_cmds["synth"]->add_option("--out-of-aoi", synth_opts.out_of_aoi_rate, "fleet preset: out-of-AOI rate");
  stage_cmds["synth"]->add_option("--gaps", synth_opts.gaps_per_voyage, "fleet preset: gaps per voyage");
  bool report_json = false;
  stage_cmds["report"]->add_flag("--json", report_json, "print JSON instead of a table");

  std::string wpi, osm, out, name_col = "Main Port Name", lat_col = "Latitude", lon_col = "Longitude";
  CLI::App* conv = app.add_subcommand("convert-ports", "convert WPI CSV or OSM GeoJSON to reference-port CSV");
  conv->add_option("--wpi", wpi, "World Port Index CSV export");
  conv->add_option("--osm", osm, "OSM GeoJSON FeatureCollection of port points");
  conv->add_option("--out", out, "output reference CSV");
  conv->add_option("--name-col", name_col);
  conv->add_option("--lat-col", lat_col);
  conv->add_option("--lon-col", lon_col);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(2, "config", e.what());
  }

  try {
    if (conv->parsed()) {
      convert_ports(wpi, osm, out, name_col, lat_col, lon_col);
      return 0;
    }
    for (const auto& [name, cmd] : stage_cmds) {
      if (!cmd->parsed()) continue;
      const PipelineConfig cfg = resolve(stage_args[name]);
      if (name == "report") {
        const nlohmann::json manifest = load_manifest(cfg.work_dir);
        std::cout << (report_json ? manifest.dump(2) + "\n" : format_report(manifest));
        return 0;
      }
      const nlohmann::json fragment = name == "synth" ? run_synth(cfg, synth_opts) : run_stage(name, cfg);
      std::cout << fragment.dump() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    return report_error(e.exit_code(), e.kind(), e.what());
  } catch (const GeoError& e) {
    return report_error(4, "data-consistency", e.what());
  } catch (const std::invalid_argument& e) {
    return report_error(2, "config", e.what());
  } catch (const fs::filesystem_error& e) {
    return report_error(3, "missing-input", e.what());
  } catch (const std::exception& e) {
    return report_error(1, "internal", e.what());
  }
  return 0;
}
