// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "oracles.hpp"

#include "aisroutes/pipeline.hpp"
#include "aisroutes/synthgen.hpp"

namespace fs = std::filesystem;
using namespace aisroutes;

namespace {

// Tolerances.
constexpr double kCompleteLo = 0.93, kCompleteHi = 0.97;
constexpr double kC1MaxSeconds = 60.0;
constexpr double kCompletedNoisyMin = 0.92;
constexpr double kC2MaxSeconds = 120.0;
constexpr std::size_t kForkScenarios = 20, kForkMinPass = 18;
constexpr Meters kForkHausdorffMax = 2000.0;
constexpr double kOutlierMax = 0.05;
constexpr double kNoiseRecoveryMin = 0.80;
constexpr Meters kBerthRecoveryMax = 500.0;
constexpr double kLabeledLo = 0.40, kLabeledHi = 0.60;
constexpr double kOracleMaxSeconds = 30.0;

// Workloads.
constexpr std::size_t kFleetVoyages = 200;
constexpr double kOutOfAoiRate = 0.05;
constexpr double kFleetGaps = 0.1;
constexpr std::size_t kRouteGroups = 50;
constexpr double kGpsNoiseRate = 0.10;
constexpr double kPlantedNoiseRate = 0.03;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(int id, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("aisroutes_accept_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

PipelineConfig config_for(const fs::path& work, int workers = 1) {
  PipelineConfig cfg;
  cfg.work_dir = work;
  cfg.workers = workers;
  cfg.reference = work / "reference_ports.csv";
  return cfg;
}

void run_fleet(const PipelineConfig& cfg, const SynthOptions& opts) {
  run_synth(cfg, opts);
  for (std::string_view stage : {"ingest", "ports", "segments", "aggregate", "routes"}) run_stage(stage, cfg);
}

nlohmann::json stage_stats(const fs::path& work, std::string_view stage) {
  const auto manifest = load_manifest(work);
  for (const auto& f : manifest["stages"]) {
    if (f["stage"].get<std::string>() == stage) return f["stats"];
  }
  return {};
}

std::vector<oracle::P> to_oracle(const std::vector<LatLon>& v) {
  std::vector<oracle::P> out;
  for (const auto& p : v) out.push_back({p.lat, p.lon});
  return out;
}

// Random single-corridor group geometry; the same seed gives the same
// corridor whatever the defect settings.
synth::GroupSpec corridor_group(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const LatLon a{58.0 + 14.0 * u(gen), -10.0 + 40.0 * u(gen)};
  const Degrees course = 360.0 * u(gen);
  const Meters length = 60'000.0 + 190'000.0 * u(gen);
  const LatLon b = destination_point(a, course, length);
  const LatLon mid = destination_point(destination_point(a, course, 0.5 * length), course + 90.0,
                                       (u(gen) - 0.5) * 0.2 * length);
  synth::GroupSpec spec;
  spec.seed = seed;
  spec.paths = {{a, mid, b}};
  spec.n_segments = 4 + gen() % 9;
  spec.spacing = 1000.0 + 1500.0 * u(gen);
  return spec;
}

ExtractionResult extract(const synth::SyntheticGroup& g) {
  return extract_standard_routes(g.group, ExtractionParams{}, g.departure, g.destination);
}

// ---------------------------------------------------------------------------

void criterion1() {
  TempDir t("c1");
  const auto t0 = Clock::now();
  SynthOptions opts;
  opts.voyages = kFleetVoyages;
  opts.out_of_aoi_rate = kOutOfAoiRate;
  opts.gaps_per_voyage = kFleetGaps;
  const auto cfg = config_for(t.path);
  run_synth(cfg, opts);
  for (std::string_view stage : {"ingest", "ports", "segments"}) run_stage(stage, cfg);
  const double secs = seconds_since(t0);
  const auto stats = stage_stats(t.path, "segments");
  const double frac = stats.value("complete_fraction", -1.0);
  const bool ok = frac >= kCompleteLo && frac <= kCompleteHi && secs < kC1MaxSeconds;
  verdict(1, ok,
          "complete_fraction=" + fmt("%.4f", frac) + " (" + stats["by_completeness"].dump() + ") target [" +
              fmt("%.2f", kCompleteLo) + "," + fmt("%.2f", kCompleteHi) + "] runtime=" + fmt("%.1fs", secs));
}

void criterion2() {
  const auto t0 = Clock::now();
  std::size_t noisy_routes = 0, noisy_done = 0, clean_routes = 0, clean_done = 0;
  for (std::uint64_t k = 0; k < kRouteGroups; ++k) {
    auto spec = corridor_group(1000 + k);
    auto clean = synth::make_route_group(spec);
    for (const auto& r : extract(clean).routes) {
      ++clean_routes;
      clean_done += r.completed;
    }
    spec.jitter_sigma = 100.0;
    spec.noise_rate = kGpsNoiseRate;
    spec.noise_min = 500.0;
    spec.noise_max = 5000.0;
    spec.gap_rate = 0.3;
    auto noisy = synth::make_route_group(spec);
    for (const auto& r : extract(noisy).routes) {
      ++noisy_routes;
      noisy_done += r.completed;
    }
  }
  const double secs = seconds_since(t0);
  const double noisy_frac = static_cast<double>(noisy_done) / static_cast<double>(std::max<std::size_t>(noisy_routes, 1));
  const bool ok = noisy_frac >= kCompletedNoisyMin && clean_done == clean_routes && clean_routes > 0 &&
                  secs < kC2MaxSeconds;
  verdict(2, ok,
          "noisy completed=" + std::to_string(noisy_done) + "/" + std::to_string(noisy_routes) + " (" +
              fmt("%.3f", noisy_frac) + ", min " + fmt("%.2f", kCompletedNoisyMin) + ") clean completed=" +
              std::to_string(clean_done) + "/" + std::to_string(clean_routes) + " runtime=" + fmt("%.1fs", secs));
}

void criterion3() {
  std::size_t passed = 0;
  double worst = 0.0;
  for (std::uint64_t k = 0; k < kForkScenarios; ++k) {
    std::mt19937_64 gen(2000 + k);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const LatLon a{60.0 + 10.0 * u(gen), 0.0 + 25.0 * u(gen)};
    const LatLon b = destination_point(a, 360.0 * u(gen), 150'000.0 + 100'000.0 * u(gen));
    // Corridors 30 km apart: ten times the default eps.
    synth::GroupSpec spec;
    spec.seed = 2000 + k;
    spec.paths = {synth::detour_path(a, b, 15'000.0, 0.3, 0.7), synth::detour_path(a, b, -15'000.0, 0.3, 0.7)};
    spec.n_segments = 8 + gen() % 5;
    spec.spacing = 1500.0 + 1000.0 * u(gen);
    spec.jitter_sigma = 100.0;
    const auto g = synth::make_route_group(spec);
    const auto res = extract(g);
    if (res.routes.size() != 2) continue;
    std::set<std::size_t> matched;
    bool close = true;
    for (const auto& r : res.routes) {
      auto line = to_oracle(r.waypoints);
      line.push_back({b.lat, b.lon});
      double best = 1e18;
      std::size_t which = 0;
      for (std::size_t p = 0; p < 2; ++p) {
        const double h = oracle::hausdorff(line, to_oracle(spec.paths[p]), 200.0);
        if (h < best) {
          best = h;
          which = p;
        }
      }
      worst = std::max(worst, best);
      close = close && best <= kForkHausdorffMax && r.completed;
      matched.insert(which);
    }
    passed += close && matched.size() == 2;
  }
  verdict(3, passed >= kForkMinPass,
          "two-branch recoveries=" + std::to_string(passed) + "/" + std::to_string(kForkScenarios) + " (min " +
              std::to_string(kForkMinPass) + ") worst Hausdorff=" + fmt("%.0f m", worst));
}

void criterion4() {
  // Clean fleet through the full pipeline.
  TempDir t("c4");
  SynthOptions opts;
  opts.voyages = kFleetVoyages;
  opts.out_of_aoi_rate = 0.0;
  opts.gaps_per_voyage = 0.0;
  run_fleet(config_for(t.path), opts);
  double worst_clean = 0.0;
  const auto audit = nlohmann::json::parse(slurp(t.path / "routes_audit.json"));
  for (const auto& g : audit["groups"]) {
    const double pool = g["pool_size"].get<double>();
    worst_clean = std::max(worst_clean, pool > 0 ? g["outlier_count"].get<double>() / pool : 0.0);
  }
  // Clean synthetic groups.
  for (std::uint64_t k = 0; k < kRouteGroups; ++k) {
    const auto g = synth::make_route_group(corridor_group(1000 + k));
    const auto res = extract(g);
    worst_clean = std::max(worst_clean, static_cast<double>(res.audit.outlier_indices.size()) /
                                            static_cast<double>(res.audit.pool_size));
  }
  // Planted off-corridor noise.
  std::size_t planted = 0, recovered = 0;
  for (std::uint64_t k = 0; k < kRouteGroups; ++k) {
    auto spec = corridor_group(3000 + k);
    spec.noise_rate = kPlantedNoiseRate;
    spec.noise_min = 3500.0;
    spec.noise_max = 5500.0;
    const auto g = synth::make_route_group(spec);
    const auto res = extract(g);
    const std::set<std::size_t> flagged(res.audit.outlier_indices.begin(), res.audit.outlier_indices.end());
    planted += g.noise_indices.size();
    for (auto i : g.noise_indices) recovered += flagged.count(i);
  }
  const double recovery = static_cast<double>(recovered) / static_cast<double>(std::max<std::size_t>(planted, 1));
  verdict(4, worst_clean < kOutlierMax && recovery >= kNoiseRecoveryMin,
          "worst clean outlier fraction=" + fmt("%.4f", worst_clean) + " (max " + fmt("%.2f", kOutlierMax) +
              ") planted noise recovered=" + std::to_string(recovered) + "/" + std::to_string(planted) + " (" +
              fmt("%.3f", recovery) + ", min " + fmt("%.2f", kNoiseRecoveryMin) + ")");
}

void criterion5() {
  TempDir t("c5");
  SynthOptions opts;
  opts.voyages = kFleetVoyages;
  opts.out_of_aoi_rate = kOutOfAoiRate;
  opts.gaps_per_voyage = kFleetGaps;
  const auto cfg = config_for(t.path);
  run_synth(cfg, opts);
  run_stage("ingest", cfg);
  run_stage("ports", cfg);
  const auto truth = nlohmann::json::parse(slurp(t.path / "truth.json"));
  const auto db = port_database_from_json(nlohmann::json::parse(slurp(t.path / "ports.json")));

  // Distinct vessels per berth, from the ground-truth voyages.
  std::map<std::size_t, std::set<Mmsi>> visitors;
  for (const auto& v : truth["voyages"]) {
    const auto mmsi = v["mmsi"].get<Mmsi>();
    const auto cut = v["out_of_aoi"].get<std::string>();
    if (cut != "enter") visitors[v["from"].get<std::size_t>()].insert(mmsi);
    if (cut != "exit") visitors[v["to"].get<std::size_t>()].insert(mmsi);
  }
  std::size_t eligible = 0, recovered = 0;
  double worst = 0.0;
  const auto& berths = truth["berths"];
  for (std::size_t i = 0; i < berths.size(); ++i) {
    if (visitors[i].size() < cfg.min_samples_port) continue;
    ++eligible;
    const LatLon pos{berths[i]["lat"].get<double>(), berths[i]["lon"].get<double>()};
    double best = 1e18;
    for (const auto& p : db.ports) {
      if (p.source == PortSource::Derived || p.source == PortSource::Merged) {
        best = std::min(best, haversine_distance(p.centroid, pos));
      }
    }
    worst = std::max(worst, best);
    recovered += best <= kBerthRecoveryMax;
  }
  const double labeled = stage_stats(t.path, "ports").value("labeled_fraction", -1.0);
  verdict(5, eligible > 0 && recovered == eligible && labeled >= kLabeledLo && labeled <= kLabeledHi,
          "berths recovered=" + std::to_string(recovered) + "/" + std::to_string(eligible) + " worst=" +
              fmt("%.0f m", worst) + " (max " + fmt("%.0f m", kBerthRecoveryMax) + ") labeled_fraction=" +
              fmt("%.3f", labeled) + " target [" + fmt("%.2f", kLabeledLo) + "," + fmt("%.2f", kLabeledHi) + "]");
}

void criterion6() {
  const auto t0 = Clock::now();
  const int code = shell(std::string(AISROUTES_UNIT_TESTS) + " --test-suite=geo,dbscan,param_regression --minimal >" +
                         (fs::temp_directory_path() / "aisroutes_accept_c6.txt").string() + " 2>&1");
  const double secs = seconds_since(t0);
  fs::remove(fs::temp_directory_path() / "aisroutes_accept_c6.txt");
  verdict(6, code == 0 && secs < kOracleMaxSeconds,
          "geo, dbscan and regression oracle suites exit=" + std::to_string(code) + " runtime=" + fmt("%.1fs", secs) +
              " (max " + fmt("%.0fs", kOracleMaxSeconds) + ")");
}

void criterion7() {
  TempDir t("c7");
  const std::string cli = AISROUTES_CLI;
  auto run = [&](const fs::path& work, int workers) {
    const std::string w = " --work_dir " + work.string() + " --workers " + std::to_string(workers) + " >/dev/null 2>&1";
    int rc = shell(cli + " synth --preset fleet" + w);
    rc |= shell(cli + " ingest" + w);
    rc |= shell(cli + " ports --reference " + (work / "reference_ports.csv").string() + w);
    for (const char* s : {"segments", "aggregate", "routes", "export"}) rc |= shell(cli + " " + s + w);
    return rc;
  };
  const fs::path a = t.path / "w1", b = t.path / "w8";
  const int rc = run(a, 1) | run(b, 8);
  std::size_t files = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    ++files;
    const auto other = b / fs::relative(e.path(), a);
    differing += !fs::exists(other) || slurp(e.path()) != slurp(other);
  }
  verdict(7, rc == 0 && files > 0 && differing == 0,
          "compared " + std::to_string(files) + " output files, " + std::to_string(differing) +
              " differ between --workers 1 and --workers 8 (manifest.json wall-clock excluded)");
}

void criterion8() {
  TempDir t("c8");
  const std::string w = " --work_dir " + t.path.string() + " >/dev/null 2>&1";
  int rc = shell(std::string(AISROUTES_CLI) + " synth --preset defects" + w);
  rc |= shell(std::string(AISROUTES_CLI) + " ingest" + w);
  const auto q = rc == 0 ? nlohmann::json::parse(slurp(t.path / "quality.json")) : nlohmann::json::object();
  const auto truth = rc == 0 ? nlohmann::json::parse(slurp(t.path / "truth.json")) : nlohmann::json::object();
  std::uint64_t by_reason = 0;
  bool reasons_match = rc == 0;
  if (rc == 0) {
    for (const auto& [k, v] : q["rejected_by_reason"].items()) {
      by_reason += v.get<std::uint64_t>();
      reasons_match = reasons_match && truth["defects"].value(k, std::uint64_t{0}) == v.get<std::uint64_t>();
    }
  }
  const auto in = q.value("records_in", std::uint64_t{0}), out = q.value("records_out", std::uint64_t{0});
  const bool conserved = rc == 0 && in > 0 && out + by_reason == in && q.value("total_rejected", ~0ull) == by_reason;
  const bool has_reduction = q.contains("size_reduction") && q["size_reduction"].is_number();
  verdict(8, conserved && reasons_match && has_reduction,
          "records_in=" + std::to_string(in) + " records_out=" + std::to_string(out) + " rejected=" +
              std::to_string(by_reason) + " planted reasons match=" + (reasons_match ? "yes" : "no") +
              " size_reduction=" + (has_reduction ? fmt("%.4f", q["size_reduction"].get<double>()) : "missing"));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                    criterion5, criterion6, criterion7, criterion8};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      verdict(static_cast<int>(i + 1), false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
