#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "roadsr/geometry.hpp"

namespace roadsr {

enum class TopologyKind : std::uint8_t {
  FourWay = 0,
  ThreeWayLeftStraight = 1,
  ThreeWayLeftRight = 2,
  StraightMultiLane = 3,
};

inline constexpr std::array<TopologyKind, 4> kAllTopologyKinds = {
    TopologyKind::FourWay, TopologyKind::ThreeWayLeftStraight, TopologyKind::ThreeWayLeftRight,
    TopologyKind::StraightMultiLane};

constexpr bool is_intersection(TopologyKind k) { return k != TopologyKind::StraightMultiLane; }

enum class AffordedAction : std::uint8_t {
  LeftTurn = 0,
  Straight = 1,
  RightTurn = 2,
  LeftLaneChange = 3,
  RightLaneChange = 4,
};

inline constexpr std::array<AffordedAction, 5> kAllActions = {
    AffordedAction::LeftTurn, AffordedAction::Straight, AffordedAction::RightTurn,
    AffordedAction::LeftLaneChange, AffordedAction::RightLaneChange};

/// i in {1,2,3} for turns/straight; 0 for lane changes.
int action_index(AffordedAction a);

enum class SemanticRegion : std::uint8_t {
  None = 0,
  S, A1, B1, C1, T1, A2, B2, C2, T2, A3, B3, C3, T3,
  NS, NCL, NTL, NCR, NTR,
};

inline constexpr std::size_t kIntersectionRegionCount = 13;
inline constexpr std::size_t kNonIntersectionRegionCount = 5;

bool is_intersection_region(SemanticRegion r);
bool is_non_intersection_region(SemanticRegion r);

/// Position of a region in its classifier vocabulary (0..12 or 0..4); -1 for None.
int vocab_index(SemanticRegion r);
/// topology_class 1 = intersection vocabulary, 0 = non-intersection.
SemanticRegion region_from_vocab(int topology_class, int index);

std::string_view to_string(TopologyKind k);
std::string_view to_string(AffordedAction a);
std::string_view to_string(SemanticRegion r);
TopologyKind topology_kind_from_string(std::string_view s);
AffordedAction action_from_string(std::string_view s);
SemanticRegion region_from_string(std::string_view s);

class UnaffordableActionError : public ContractError {
 public:
  using ContractError::ContractError;
};

struct TopologyParams {
  double lane_width = 3.5;
  int lanes_per_direction = 2;
  double crosswalk_width = 3.0;  // 0 => no crosswalks
  double approach_length = 40.0;
  double crosswalk_setback = 4.0;  // gap between arm edge and crosswalk inner edge
  double sidewalk_width = 2.0;
  double ego_half_length = 2.0;
  double ego_half_width = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Arm : std::uint8_t { South = 0, East = 1, North = 2, West = 3 };

struct RegionPolygon {
  SemanticRegion region;
  Polygon polygon;
};

/// Layout in a local frame: the ego always enters on the south arm heading +y,
/// right-hand traffic, intersection centred at the origin.
struct RoadTopology {
  TopologyKind kind = TopologyKind::FourWay;
  TopologyParams params;
  std::vector<Arm> arms;
  std::vector<Polygon> drivable;
  std::vector<Polygon> crosswalks;
  std::vector<Arm> crosswalk_arms;
  std::vector<Polygon> sidewalks;
  std::vector<Polygon> markings;
  std::optional<Polygon> intersection_core;
  std::vector<AffordedAction> afforded;
  std::map<AffordedAction, std::vector<RegionPolygon>> region_partition;

  bool affords(AffordedAction a) const;
  /// Throws UnaffordableActionError when a is not afforded.
  const std::vector<RegionPolygon>& partition(AffordedAction a) const;

  double half_road_width() const { return params.lane_width * params.lanes_per_direction; }
  /// Half side of the intersection box (0 for straight roads).
  double core_half() const;
  /// End coordinate of each arm (distance from origin) or straight-road half length.
  double arm_end() const;
  bool has_arm(Arm a) const;

  /// Ground truth surface class at a ground point.
  SemanticClass surface_class(Vec2 p) const;
  /// Bounding box of every sampled surface.
  Box bounds() const;
  /// Total area of the crosswalk polygons divided by their count (0 if none).
  double mean_crosswalk_area() const;
};

RoadTopology build_topology(TopologyKind kind, const TopologyParams& params);

std::vector<AffordedAction> afforded_actions(const RoadTopology& t);

/// Region containing p for the action's partition; earlier regions win on shared
/// boundaries; None when outside every region.
SemanticRegion ground_truth_region(const RoadTopology& t, AffordedAction action, Vec2 p);

/// Lane index (0 = next to the centre line) the ego uses for an action.
int entry_lane(const RoadTopology& t, AffordedAction a);
int exit_lane(const RoadTopology& t, AffordedAction a);

}  // namespace roadsr
