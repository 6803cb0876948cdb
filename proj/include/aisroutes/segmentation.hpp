// Port-to-port segmentation of vessel tracks with a six-state machine.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "aisroutes/ingest.hpp"
#include "aisroutes/kinematics.hpp"
#include "aisroutes/ports.hpp"

namespace aisroutes {

enum class FsmState { Init, Departure, Sailing, Stationary, Arrived, Lost };
std::string_view to_string(FsmState s);

enum class Completeness { Complete, NoDeparture, NoArrival, Orphan };
std::string_view to_string(Completeness c);
std::optional<Completeness> parse_completeness(std::string_view s);
Completeness derive_completeness(const std::optional<PortId>& departure, const std::optional<PortId>& arrival);

struct Segment {
  Mmsi mmsi{};
  VesselType vessel_type{VesselType::Unknown};
  std::optional<PortId> departure_port;
  std::optional<PortId> arrival_port;
  std::vector<AisRecord> points;
  Timestamp t_start{};
  Timestamp t_end{};
  Meters distance{};
  std::string declared_destination;  // normalized
  Completeness completeness{Completeness::Orphan};

  /// Recomputes times, distance and completeness from points and ports.
  void refresh();
};

struct SegmentationConfig {
  Knots min_speed_departure{2.0};
  Knots v_stop{0.5};
  Seconds t_lost{6 * 3600.0};
  Seconds window{600.0};
  std::size_t window_min_fixes{3};
  Meters d_port_slack{1000.0};
  std::size_t min_segment_points{10};
  Meters min_segment_distance{5000.0};
  Seconds t_merge_max{48 * 3600.0};
};

struct FsmEvent {
  enum class Kind { SegmentOpened, SegmentClosed };
  Kind kind;
  std::optional<PortId> port;      // departure for Opened, arrival for Closed
  std::optional<Segment> segment;  // set for Closed
};

struct FsmStepResult {
  FsmState state;
  std::vector<FsmEvent> events;
};

class FsmContext;
FsmStepResult fsm_step(FsmState state, const AisRecord& rec, FsmContext& ctx);

/// Running state threaded through fsm_step for one vessel.
class FsmContext {
 public:
  FsmContext(const PortDatabase& db, const SegmentationConfig& cfg, Mmsi mmsi = 0,
             VesselType type = VesselType::Unknown);

  const PortDatabase& db() const { return *db_; }
  const SegmentationConfig& cfg() const { return *cfg_; }
  bool segment_open() const { return open_.has_value(); }
  const std::optional<AisRecord>& previous() const { return prev_; }
  Knots rolling_speed() const { return rolling_.average(); }

  /// Closes the open segment, if any, with the given arrival port.
  std::optional<Segment> close_open(std::optional<PortId> arrival = std::nullopt);

 private:
  friend FsmStepResult fsm_step(FsmState, const AisRecord&, FsmContext&);

  void open(std::optional<PortId> departure);

  const PortDatabase* db_;
  const SegmentationConfig* cfg_;
  Mmsi mmsi_;
  VesselType type_;
  std::optional<AisRecord> prev_;
  RollingSpeed rolling_;
  std::optional<Segment> open_;
  std::optional<PortId> home_port_;
  std::optional<PortId> departure_port_;
};

/// Advances the machine by one fix. Throws ConsistencyError if `rec` is
/// older than the previous fix.
FsmStepResult fsm_step(FsmState state, const AisRecord& rec, FsmContext& ctx);

/// Runs the machine over a whole track, closes any trailing segment as
/// NoArrival, and drops segments below the point/distance minimums.
std::vector<Segment> extract_segments(const VesselTrack& track, const PortDatabase& db,
                                      const SegmentationConfig& cfg = {});

/// Concatenates runs of consecutive partial segments that share a non-empty
/// destination across a missing arrival/departure boundary and a gap of at
/// most t_merge_max.
std::vector<Segment> reduce_by_destination(std::span<const Segment> segments, const SegmentationConfig& cfg = {});

nlohmann::json to_json(const Segment& s);
Segment segment_from_json(const nlohmann::json& j);

}  // namespace aisroutes
