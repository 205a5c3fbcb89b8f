#include "roadsr/topology.hpp"

#include <algorithm>
#include <string>

namespace roadsr {

int action_index(AffordedAction a) {
  switch (a) {
    case AffordedAction::LeftTurn: return 1;
    case AffordedAction::Straight: return 2;
    case AffordedAction::RightTurn: return 3;
    default: return 0;
  }
}

namespace {

constexpr std::array<SemanticRegion, kIntersectionRegionCount> kIntersectionVocab = {
    SemanticRegion::S,  SemanticRegion::A1, SemanticRegion::B1, SemanticRegion::C1, SemanticRegion::T1,
    SemanticRegion::A2, SemanticRegion::B2, SemanticRegion::C2, SemanticRegion::T2, SemanticRegion::A3,
    SemanticRegion::B3, SemanticRegion::C3, SemanticRegion::T3};

constexpr std::array<SemanticRegion, kNonIntersectionRegionCount> kNonIntersectionVocab = {
    SemanticRegion::NS, SemanticRegion::NCL, SemanticRegion::NTL, SemanticRegion::NCR, SemanticRegion::NTR};

constexpr std::array<std::string_view, 19> kRegionNames = {
    "None", "S",  "A1", "B1", "C1", "T1", "A2",  "B2",  "C2", "T2",
    "A3",   "B3", "C3", "T3", "NS", "NCL", "NTL", "NCR", "NTR"};

// Region letter within a turn: 0=A, 1=B, 2=C, 3=T.
SemanticRegion turn_region(int action_i, int letter) {
  return kIntersectionVocab[1 + (action_i - 1) * 4 + letter];
}

}  // namespace

bool is_intersection_region(SemanticRegion r) {
  return r >= SemanticRegion::S && r <= SemanticRegion::T3;
}

bool is_non_intersection_region(SemanticRegion r) { return r >= SemanticRegion::NS; }

int vocab_index(SemanticRegion r) {
  if (is_intersection_region(r)) return static_cast<int>(r) - static_cast<int>(SemanticRegion::S);
  if (is_non_intersection_region(r)) return static_cast<int>(r) - static_cast<int>(SemanticRegion::NS);
  return -1;
}

SemanticRegion region_from_vocab(int topology_class, int index) {
  if (topology_class == 1) {
    if (index < 0 || index >= static_cast<int>(kIntersectionRegionCount)) {
      throw ContractError("intersection region index out of range");
    }
    return kIntersectionVocab[index];
  }
  if (topology_class == 0) {
    if (index < 0 || index >= static_cast<int>(kNonIntersectionRegionCount)) {
      throw ContractError("non-intersection region index out of range");
    }
    return kNonIntersectionVocab[index];
  }
  throw ContractError("topology class must be 0 or 1");
}

std::string_view to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::FourWay: return "FourWay";
    case TopologyKind::ThreeWayLeftStraight: return "ThreeWayLeftStraight";
    case TopologyKind::ThreeWayLeftRight: return "ThreeWayLeftRight";
    case TopologyKind::StraightMultiLane: return "StraightMultiLane";
  }
  return "?";
}

std::string_view to_string(AffordedAction a) {
  switch (a) {
    case AffordedAction::LeftTurn: return "LeftTurn";
    case AffordedAction::Straight: return "Straight";
    case AffordedAction::RightTurn: return "RightTurn";
    case AffordedAction::LeftLaneChange: return "LeftLaneChange";
    case AffordedAction::RightLaneChange: return "RightLaneChange";
  }
  return "?";
}

std::string_view to_string(SemanticRegion r) { return kRegionNames[static_cast<std::size_t>(r)]; }

TopologyKind topology_kind_from_string(std::string_view s) {
  for (auto k : kAllTopologyKinds) {
    if (to_string(k) == s) return k;
  }
  throw ContractError("unknown topology kind: " + std::string(s));
}

AffordedAction action_from_string(std::string_view s) {
  for (auto a : kAllActions) {
    if (to_string(a) == s) return a;
  }
  throw ContractError("unknown action: " + std::string(s));
}

SemanticRegion region_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kRegionNames.size(); ++i) {
    if (kRegionNames[i] == s) return static_cast<SemanticRegion>(i);
  }
  throw ContractError("unknown semantic region: " + std::string(s));
}

void TopologyParams::validate() const {
  if (!(lane_width > 2.0 * ego_half_width)) throw ContractError("lane_width must exceed the ego width");
  if (lanes_per_direction < 1) throw ContractError("lanes_per_direction must be positive");
  if (!(crosswalk_width >= 0.0)) throw ContractError("crosswalk_width must be non-negative");
  if (!(approach_length > ego_half_length)) throw ContractError("approach_length must exceed ego_half_length");
  if (!(sidewalk_width >= 0.0)) throw ContractError("sidewalk_width must be non-negative");
  if (!(ego_half_length > 0.0) || !(ego_half_width > 0.0)) throw ContractError("ego dimensions must be positive");
  if (crosswalk_width > 0.0 && !(crosswalk_setback >= ego_half_length)) {
    throw ContractError("crosswalk_setback must be at least ego_half_length");
  }
}

bool RoadTopology::affords(AffordedAction a) const {
  return std::find(afforded.begin(), afforded.end(), a) != afforded.end();
}

const std::vector<RegionPolygon>& RoadTopology::partition(AffordedAction a) const {
  auto it = region_partition.find(a);
  if (it == region_partition.end()) {
    throw UnaffordableActionError(std::string(to_string(a)) + " is not afforded by " + std::string(to_string(kind)) +
                                  " with " + std::to_string(params.lanes_per_direction) + " lane(s) per direction");
  }
  return it->second;
}

double RoadTopology::core_half() const {
  if (!is_intersection(kind)) return 0.0;
  const double hw = half_road_width();
  return params.crosswalk_width > 0.0 ? hw + params.crosswalk_setback : hw;
}

double RoadTopology::arm_end() const {
  if (!is_intersection(kind)) return params.approach_length;
  return core_half() + params.crosswalk_width + params.approach_length;
}

bool RoadTopology::has_arm(Arm a) const { return std::find(arms.begin(), arms.end(), a) != arms.end(); }

SemanticClass RoadTopology::surface_class(Vec2 p) const {
  for (const auto& c : crosswalks) {
    if (point_in_polygon(p, c)) return SemanticClass::Crosswalk;
  }
  for (const auto& m : markings) {
    if (point_in_polygon(p, m)) return SemanticClass::LaneMarking;
  }
  for (const auto& d : drivable) {
    if (point_in_polygon(p, d)) return SemanticClass::Road;
  }
  for (const auto& s : sidewalks) {
    if (point_in_polygon(p, s)) return SemanticClass::Sidewalk;
  }
  return SemanticClass::Unknown;
}

Box RoadTopology::bounds() const {
  Box b = drivable.front().bounds();
  auto grow = [&b](const Polygon& poly) {
    const Box o = poly.bounds();
    b.min.x = std::min(b.min.x, o.min.x);
    b.min.y = std::min(b.min.y, o.min.y);
    b.max.x = std::max(b.max.x, o.max.x);
    b.max.y = std::max(b.max.y, o.max.y);
  };
  for (const auto& d : drivable) grow(d);
  for (const auto& s : sidewalks) grow(s);
  return b;
}

double RoadTopology::mean_crosswalk_area() const {
  if (crosswalks.empty()) return 0.0;
  double a = 0.0;
  for (const auto& c : crosswalks) a += c.area();
  return a / static_cast<double>(crosswalks.size());
}

namespace {

// Maps a rectangle given in arm-local coordinates (along = distance from the
// origin along the arm, lateral = offset to the right of an inbound driver)
// onto world coordinates.
Polygon arm_rect(Arm arm, double along0, double along1, double lat0, double lat1) {
  switch (arm) {
    // Inbound on the south arm heads +y; its right is +x.
    case Arm::South: return Polygon::rectangle(lat0, -along0, lat1, -along1);
    // Inbound on the north arm heads -y; its right is -x.
    case Arm::North: return Polygon::rectangle(-lat0, along0, -lat1, along1);
    // Inbound on the east arm heads -x; its right is +y.
    case Arm::East: return Polygon::rectangle(along0, lat0, along1, lat1);
    // Inbound on the west arm heads +x; its right is -y.
    case Arm::West: return Polygon::rectangle(-along0, -lat0, -along1, -lat1);
  }
  throw ContractError("bad arm");
}

// Lateral offset interval of outbound lanes on an arm, in the arm's inbound
// frame (outbound traffic is on the inbound driver's left).
std::pair<double, double> outbound_lanes(double hw) { return {-hw, 0.0}; }

// Square [-ch,ch]^2 with depth-e notches of span [-hw,hw] cut into the listed sides.
Polygon notched_square(double ch, double hw, double e, const std::vector<Arm>& notches) {
  auto has = [&](Arm a) { return std::find(notches.begin(), notches.end(), a) != notches.end(); };
  std::vector<Vec2> v;
  v.push_back({-ch, -ch});
  if (has(Arm::South)) {
    v.insert(v.end(), {{-hw, -ch}, {-hw, -ch + e}, {hw, -ch + e}, {hw, -ch}});
  }
  v.push_back({ch, -ch});
  if (has(Arm::East)) {
    v.insert(v.end(), {{ch, -hw}, {ch - e, -hw}, {ch - e, hw}, {ch, hw}});
  }
  v.push_back({ch, ch});
  if (has(Arm::North)) {
    v.insert(v.end(), {{hw, ch}, {hw, ch - e}, {-hw, ch - e}, {-hw, ch}});
  }
  v.push_back({-ch, ch});
  if (has(Arm::West)) {
    v.insert(v.end(), {{-ch, hw}, {-ch + e, hw}, {-ch + e, -hw}, {-ch, -hw}});
  }
  return Polygon(std::move(v));
}

Arm exit_arm(AffordedAction a) {
  switch (a) {
    case AffordedAction::LeftTurn: return Arm::West;
    case AffordedAction::RightTurn: return Arm::East;
    default: return Arm::North;
  }
}

void add_markings(RoadTopology& t, Arm arm, double along0, double along1) {
  const double lw = t.params.lane_width;
  const int lanes = t.params.lanes_per_direction;
  t.markings.push_back(arm_rect(arm, along0, along1, -0.15, 0.15));
  for (int k = 1; k < lanes; ++k) {
    const double off = k * lw;
    t.markings.push_back(arm_rect(arm, along0, along1, off - 0.1, off + 0.1));
    t.markings.push_back(arm_rect(arm, along0, along1, -off - 0.1, -off + 0.1));
  }
}

void build_intersection(RoadTopology& t) {
  const auto& p = t.params;
  const double hw = t.half_road_width();
  const double ch = t.core_half();
  const double cw = p.crosswalk_width;
  const double end = t.arm_end();
  const double e = p.ego_half_length;
  const double sw = p.sidewalk_width;
  const bool has_cw = cw > 0.0;

  switch (t.kind) {
    case TopologyKind::FourWay:
      t.arms = {Arm::South, Arm::East, Arm::North, Arm::West};
      t.afforded = {AffordedAction::LeftTurn, AffordedAction::Straight, AffordedAction::RightTurn};
      break;
    case TopologyKind::ThreeWayLeftStraight:
      t.arms = {Arm::South, Arm::North, Arm::West};
      t.afforded = {AffordedAction::LeftTurn, AffordedAction::Straight};
      break;
    case TopologyKind::ThreeWayLeftRight:
      t.arms = {Arm::South, Arm::East, Arm::West};
      t.afforded = {AffordedAction::LeftTurn, AffordedAction::RightTurn};
      break;
    default: break;
  }

  const Polygon core = Polygon::rectangle(-ch, -ch, ch, ch);
  t.drivable.push_back(core);
  t.intersection_core = core;
  for (Arm arm : t.arms) {
    t.drivable.push_back(arm_rect(arm, ch, end, -hw, hw));
    if (has_cw) {
      t.crosswalks.push_back(arm_rect(arm, ch, ch + cw, -hw, hw));
      t.crosswalk_arms.push_back(arm);
    }
    add_markings(t, arm, ch + cw, end);
    if (sw > 0.0) {
      // East/west strips yield the corner square to the north/south strips.
      const bool ew = arm == Arm::East || arm == Arm::West;
      const double start = (ew && ch < hw + sw) ? hw + sw : ch;
      t.sidewalks.push_back(arm_rect(arm, start, end, hw, hw + sw));
      t.sidewalks.push_back(arm_rect(arm, start, end, -hw - sw, -hw));
    }
  }
  if (sw > 0.0) {
    for (Arm arm : {Arm::East, Arm::North, Arm::West}) {
      if (!t.has_arm(arm)) t.sidewalks.push_back(arm_rect(arm, ch, ch + sw, -ch, ch));
    }
  }

  for (AffordedAction a : t.afforded) {
    const int i = action_index(a);
    const Arm out = exit_arm(a);
    const auto [olat0, olat1] = outbound_lanes(hw);
    std::vector<RegionPolygon> parts;
    if (has_cw) {
      parts.push_back({SemanticRegion::S, arm_rect(Arm::South, ch + cw + e, end, 0.0, hw)});
      parts.push_back({turn_region(i, 0), arm_rect(Arm::South, ch - e, ch + cw + e, -hw, hw)});
      parts.push_back({turn_region(i, 1), notched_square(ch, hw, e, {Arm::South, out})});
      parts.push_back({turn_region(i, 2), arm_rect(out, ch - e, ch + cw + e, -hw, hw)});
      parts.push_back({turn_region(i, 3), arm_rect(out, ch + cw + e, end, olat0, olat1)});
    } else {
      parts.push_back({SemanticRegion::S, arm_rect(Arm::South, ch, end, 0.0, hw)});
      parts.push_back({turn_region(i, 1), core});
      parts.push_back({turn_region(i, 3), arm_rect(out, ch, end, olat0, olat1)});
    }
    t.region_partition.emplace(a, std::move(parts));
  }
}

void build_straight(RoadTopology& t) {
  const auto& p = t.params;
  const double hw = t.half_road_width();
  const double end = t.arm_end();
  const double lw = p.lane_width;
  const double w = p.ego_half_width;
  const int lanes = p.lanes_per_direction;
  t.arms = {Arm::South};
  t.drivable.push_back(Polygon::rectangle(-hw, -end, hw, end));
  t.markings.push_back(Polygon::rectangle(-0.15, -end, 0.15, end));
  for (int k = 1; k < lanes; ++k) {
    const double off = k * lw;
    t.markings.push_back(Polygon::rectangle(off - 0.1, -end, off + 0.1, end));
    t.markings.push_back(Polygon::rectangle(-off - 0.1, -end, -off + 0.1, end));
  }
  if (p.sidewalk_width > 0.0) {
    t.sidewalks.push_back(Polygon::rectangle(hw, -end, hw + p.sidewalk_width, end));
    t.sidewalks.push_back(Polygon::rectangle(-hw - p.sidewalk_width, -end, -hw, end));
  }

  t.afforded = {AffordedAction::Straight};
  if (lanes >= 2) {
    t.afforded.push_back(AffordedAction::LeftLaneChange);
    t.afforded.push_back(AffordedAction::RightLaneChange);
  }
  auto strip = [&](double x0, double x1) { return Polygon::rectangle(x0, -end, x1, end); };

  const int straight_lane = std::min(1, lanes - 1);
  t.region_partition.emplace(AffordedAction::Straight,
                             std::vector<RegionPolygon>{{SemanticRegion::NS, strip(straight_lane * lw, (straight_lane + 1) * lw)}});
  if (lanes >= 2) {
    // Left change: lane 1 -> lane 0 across the divider at x = lw.
    const double ml = lw;
    t.region_partition.emplace(AffordedAction::LeftLaneChange,
                               std::vector<RegionPolygon>{{SemanticRegion::NS, strip(ml + w, 2 * lw)},
                                                          {SemanticRegion::NCL, strip(ml - w, ml + w)},
                                                          {SemanticRegion::NTL, strip(0.0, ml - w)}});
    // Right change: lane L-2 -> lane L-1 across the divider at x = (L-1) lw.
    const double mr = (lanes - 1) * lw;
    t.region_partition.emplace(AffordedAction::RightLaneChange,
                               std::vector<RegionPolygon>{{SemanticRegion::NS, strip(mr - lw, mr - w)},
                                                          {SemanticRegion::NCR, strip(mr - w, mr + w)},
                                                          {SemanticRegion::NTR, strip(mr + w, mr + lw)}});
  }
}

}  // namespace

RoadTopology build_topology(TopologyKind kind, const TopologyParams& params) {
  params.validate();
  RoadTopology t;
  t.kind = kind;
  t.params = params;
  if (is_intersection(kind)) {
    build_intersection(t);
  } else {
    build_straight(t);
  }
  return t;
}

std::vector<AffordedAction> afforded_actions(const RoadTopology& t) {
  std::vector<AffordedAction> out = t.afforded;
  std::sort(out.begin(), out.end());
  return out;
}

SemanticRegion ground_truth_region(const RoadTopology& t, AffordedAction action, Vec2 p) {
  for (const auto& rp : t.partition(action)) {
    if (point_in_polygon(p, rp.polygon)) return rp.region;
  }
  return SemanticRegion::None;
}

int entry_lane(const RoadTopology& t, AffordedAction a) {
  const int lanes = t.params.lanes_per_direction;
  switch (a) {
    case AffordedAction::LeftTurn: return 0;
    case AffordedAction::RightTurn: return lanes - 1;
    case AffordedAction::Straight: return std::min(1, lanes - 1);
    case AffordedAction::LeftLaneChange: return 1;
    case AffordedAction::RightLaneChange: return lanes - 2;
  }
  return 0;
}

int exit_lane(const RoadTopology& t, AffordedAction a) {
  const int lanes = t.params.lanes_per_direction;
  switch (a) {
    case AffordedAction::LeftTurn: return 0;
    case AffordedAction::RightTurn: return lanes - 1;
    case AffordedAction::Straight: return std::min(1, lanes - 1);
    case AffordedAction::LeftLaneChange: return 0;
    case AffordedAction::RightLaneChange: return lanes - 1;
  }
  return 0;
}

}  // namespace roadsr
