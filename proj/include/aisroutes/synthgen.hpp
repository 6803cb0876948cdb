// Synthetic AIS fleets with known ground truth.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "aisroutes/aggregation.hpp"
#include "aisroutes/ingest.hpp"

namespace aisroutes::synth {

/// Portable RNG: the engine sequence is fixed by the standard and the
/// distributions are implemented here, so a seed reproduces the same bytes
/// on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::size_t index(std::size_t n);  // [0, n)
  /// 2-D isotropic Gaussian offset truncated at 3 sigma radially.
  std::pair<double, double> truncated_offset(double sigma);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

struct Berth {
  std::string name;
  LatLon pos;
  bool in_reference{false};
};

struct CorridorSpec {
  std::size_t from{};
  std::size_t to{};
  /// Interior waypoints of each alternative path (from -> to). Vessel k
  /// sails alternative k % paths.size(); an empty list means one direct path.
  std::vector<std::vector<LatLon>> paths;
  std::size_t vessels{1};
  std::size_t voyages_per_vessel{1};
  int ship_type{70};
  Knots speed{12.0};
  Seconds report_interval{120.0};
};

struct ParseDefects {
  std::size_t bad_coords{}, bad_mmsi{}, duplicate{}, malformed{}, time_regression{}, speed_jump{};
  std::size_t total() const { return bad_coords + bad_mmsi + duplicate + malformed + time_regression + speed_jump; }
};

struct DefectModel {
  /// Integer part: guaranteed holes per voyage; fractional part: chance of one more.
  double gaps_per_voyage{0.0};
  Seconds gap_duration{12 * 3600.0};
  Meters gap_length{10'000.0};
  Meters gps_sigma{10.0};
  /// Exact fraction of voyages whose departure or arrival lies outside the AOI.
  double out_of_aoi_rate{0.0};
  ParseDefects parse;
};

struct ScenarioSpec {
  std::uint64_t seed{1};
  Timestamp start{1672531200};  // 2023-01-01T00:00:00Z
  std::vector<Berth> berths;
  std::vector<CorridorSpec> corridors;
  DefectModel defects;
  Seconds dwell_min{2700.0};
  Seconds dwell_max{5400.0};
  Meters turn_offset{400.0};
  /// Keep only the first N clean rows (time order) before planting parse
  /// defects; 0 keeps everything.
  std::size_t max_clean_rows{0};

  /// Throws ConfigError on an invalid spec.
  void validate() const;
};

struct GapTruth {
  Timestamp t_start{};
  Timestamp t_end{};
};

struct VoyageTruth {
  Mmsi mmsi{};
  std::size_t corridor{};
  std::size_t from{};
  std::size_t to{};
  std::size_t path{};
  Timestamp t_depart{};
  Timestamp t_arrive{};
  std::string out_of_aoi;  // "", "enter" or "exit"
  std::vector<GapTruth> gaps;
  std::vector<LatLon> polyline;  // sailed path including harbour turn points
};

struct GroundTruth {
  std::uint64_t seed{};
  std::vector<Berth> berths;
  std::vector<VoyageTruth> voyages;
  ParseDefects defects;
  std::size_t rows{};
  std::size_t clean_rows{};
};

struct Scenario {
  std::string csv;
  GroundTruth truth;
};

Scenario generate(const ScenarioSpec& spec);

nlohmann::json to_json(const GroundTruth& gt);
nlohmann::json to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const nlohmann::json& j);

/// Reference-port CSV for the berths flagged in_reference.
std::string reference_csv(const std::vector<Berth>& berths);

/// Multi-port Arctic fleet with `n_voyages` voyages in total.
ScenarioSpec fleet_preset(std::uint64_t seed, std::size_t n_voyages = 200, double out_of_aoi_rate = 0.05,
                          double gaps_per_voyage = 0.1);
/// Two berths joined by a corridor that forks around an island.
ScenarioSpec fork_preset(std::uint64_t seed);
/// 900 clean rows plus 100 planted parse defects.
ScenarioSpec defect_fixture_preset(std::uint64_t seed);

// ---------------------------------------------------------------------------
// Direct route-group synthesis, bypassing AIS encoding.

struct GroupSpec {
  std::uint64_t seed{1};
  /// Alternative full polylines from departure to destination; segment k
  /// follows paths[k % paths.size()].
  std::vector<std::vector<LatLon>> paths;
  std::size_t n_segments{3};
  Meters spacing{2000.0};
  Meters jitter_sigma{0.0};
  /// Fraction of fixes replaced by off-corridor noise points.
  double noise_rate{0.0};
  Meters noise_min{0.0};
  Meters noise_max{0.0};
  /// Probability that a segment carries a transmission hole.
  double gap_rate{0.0};
  Meters gap_length{8000.0};
  Knots speed{12.0};
  VesselType vessel_type{VesselType::Cargo};
  GroupKey key{1, 2, VesselType::Cargo};
};

struct SyntheticGroup {
  RouteGroup group;
  LatLon departure;
  LatLon destination;
  std::vector<std::size_t> noise_indices;  // pool indices of planted noise
  std::vector<std::size_t> segment_path;   // path followed by each segment
};

SyntheticGroup make_route_group(const GroupSpec& spec);

/// Polyline that leaves `a`, swings `offset` meters to one side of the
/// a->b line between fractions `f0` and `f1` (diverging and converging at
/// `angle` degrees), and rejoins before `b`.
std::vector<LatLon> detour_path(const LatLon& a, const LatLon& b, Meters offset, double f0, double f1,
                                Degrees angle = 45.0);

}  // namespace aisroutes::synth
