#include <doctest.h>

#include <random>
#include <set>

#include "roadsr/scene_sim.hpp"
#include "roadsr/topology.hpp"

using namespace roadsr;

namespace {

std::vector<SemanticRegion> labels(const RoadTopology& t, AffordedAction a) {
  std::vector<SemanticRegion> out;
  for (const auto& rp : t.partition(a)) out.push_back(rp.region);
  return out;
}

TopologyParams no_crosswalks() {
  TopologyParams p;
  p.crosswalk_width = 0.0;
  return p;
}

/// Uniform sample inside a polygon by rejection from its bounding box.
Vec2 sample_in(const Polygon& poly, std::mt19937_64& rng) {
  const Box b = poly.bounds();
  std::uniform_real_distribution<double> ux(b.min.x, b.max.x), uy(b.min.y, b.max.y);
  for (;;) {
    const Vec2 p{ux(rng), uy(rng)};
    if (point_in_polygon(p, poly)) return p;
  }
}

bool near_boundary(const Polygon& poly, Vec2 p, double eps) {
  const auto& v = poly.vertices();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 a = v[i], ab = v[(i + 1) % v.size()] - v[i];
    const double t = std::clamp((p - a).dot(ab) / ab.dot(ab), 0.0, 1.0);
    if ((p - (a + ab * t)).norm() < eps) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("afforded actions per topology kind") {
  using A = AffordedAction;
  TopologyParams p;
  CHECK(afforded_actions(build_topology(TopologyKind::FourWay, p)) == std::vector<A>{A::LeftTurn, A::Straight, A::RightTurn});
  CHECK(afforded_actions(build_topology(TopologyKind::ThreeWayLeftStraight, p)) == std::vector<A>{A::LeftTurn, A::Straight});
  CHECK(afforded_actions(build_topology(TopologyKind::ThreeWayLeftRight, p)) == std::vector<A>{A::LeftTurn, A::RightTurn});
  CHECK(afforded_actions(build_topology(TopologyKind::StraightMultiLane, p)) ==
        std::vector<A>{A::Straight, A::LeftLaneChange, A::RightLaneChange});
  p.lanes_per_direction = 1;
  const RoadTopology single = build_topology(TopologyKind::StraightMultiLane, p);
  CHECK(afforded_actions(single) == std::vector<A>{A::Straight});
  CHECK_THROWS_AS(single.partition(A::LeftLaneChange), UnaffordableActionError);
  CHECK_THROWS_AS(build_topology(TopologyKind::ThreeWayLeftRight, TopologyParams{}).partition(A::Straight),
                  UnaffordableActionError);
}

TEST_CASE("four-way with crosswalks") {
  const RoadTopology t = build_topology(TopologyKind::FourWay, TopologyParams{});
  CHECK(t.crosswalks.size() == 4);
  using R = SemanticRegion;
  CHECK(labels(t, AffordedAction::LeftTurn) == std::vector<R>{R::S, R::A1, R::B1, R::C1, R::T1});
  CHECK(labels(t, AffordedAction::Straight) == std::vector<R>{R::S, R::A2, R::B2, R::C2, R::T2});
  CHECK(labels(t, AffordedAction::RightTurn) == std::vector<R>{R::S, R::A3, R::B3, R::C3, R::T3});
  std::set<R> distinct;
  for (auto a : t.afforded) {
    for (auto r : labels(t, a)) distinct.insert(r);
  }
  CHECK(distinct.size() == kIntersectionRegionCount);
}

TEST_CASE("no-crosswalk partition drops A and C") {
  using R = SemanticRegion;
  const RoadTopology t = build_topology(TopologyKind::FourWay, no_crosswalks());
  CHECK(t.crosswalks.empty());
  CHECK(labels(t, AffordedAction::LeftTurn) == std::vector<R>{R::S, R::B1, R::T1});
  CHECK(labels(t, AffordedAction::Straight) == std::vector<R>{R::S, R::B2, R::T2});
}

TEST_CASE("three-way kinds keep global region indices") {
  using R = SemanticRegion;
  const RoadTopology lr = build_topology(TopologyKind::ThreeWayLeftRight, TopologyParams{});
  CHECK(labels(lr, AffordedAction::RightTurn) == std::vector<R>{R::S, R::A3, R::B3, R::C3, R::T3});
  CHECK(lr.crosswalks.size() == 3);
  const RoadTopology ls = build_topology(TopologyKind::ThreeWayLeftStraight, TopologyParams{});
  CHECK(labels(ls, AffordedAction::Straight) == std::vector<R>{R::S, R::A2, R::B2, R::C2, R::T2});
}

TEST_CASE("lane-change partitions") {
  using R = SemanticRegion;
  const RoadTopology t = build_topology(TopologyKind::StraightMultiLane, TopologyParams{});
  CHECK(labels(t, AffordedAction::LeftLaneChange) == std::vector<R>{R::NS, R::NCL, R::NTL});
  CHECK(labels(t, AffordedAction::RightLaneChange) == std::vector<R>{R::NS, R::NCR, R::NTR});
  CHECK(labels(t, AffordedAction::Straight) == std::vector<R>{R::NS});
  CHECK(!t.intersection_core.has_value());
  CHECK(t.crosswalks.empty());
}

TEST_CASE("region vocabularies") {
  int inter = 0, non = 0;
  for (int r = 1; r <= 18; ++r) {
    const auto reg = static_cast<SemanticRegion>(r);
    CHECK(is_intersection_region(reg) != is_non_intersection_region(reg));
    inter += is_intersection_region(reg);
    non += is_non_intersection_region(reg);
    const int cls = is_intersection_region(reg) ? 1 : 0;
    CHECK(region_from_vocab(cls, vocab_index(reg)) == reg);
    CHECK(region_from_string(to_string(reg)) == reg);
  }
  CHECK(inter == 13);
  CHECK(non == 5);
  CHECK(vocab_index(SemanticRegion::None) == -1);
  CHECK_FALSE(is_intersection_region(SemanticRegion::None));
  CHECK_FALSE(is_non_intersection_region(SemanticRegion::None));
}

TEST_CASE("every sampled region point maps back to its region") {
  std::mt19937_64 rng(8);
  const std::vector<std::pair<TopologyKind, TopologyParams>> cases = {
      {TopologyKind::FourWay, TopologyParams{}},
      {TopologyKind::FourWay, no_crosswalks()},
      {TopologyKind::ThreeWayLeftStraight, TopologyParams{}},
      {TopologyKind::ThreeWayLeftRight, TopologyParams{}},
      {TopologyKind::StraightMultiLane, TopologyParams{}}};
  for (const auto& [kind, params] : cases) {
    const RoadTopology t = build_topology(kind, params);
    for (auto a : t.afforded) {
      const auto& parts = t.partition(a);
      for (std::size_t i = 0; i < parts.size(); ++i) {
        int ok = 0;
        for (int k = 0; k < 1000; ++k) {
          const Vec2 p = sample_in(parts[i].polygon, rng);
          bool earlier_boundary = false;
          for (std::size_t j = 0; j < i; ++j) earlier_boundary |= near_boundary(parts[j].polygon, p, 1e-9);
          if (earlier_boundary) continue;
          ok += ground_truth_region(t, a, p) == parts[i].region;
          const SemanticClass c = t.surface_class(p);
          CHECK((c == SemanticClass::Road || c == SemanticClass::Crosswalk || c == SemanticClass::LaneMarking));
        }
        CHECK(ok >= 999);
      }
    }
  }
}

TEST_CASE("region polygons are interior-disjoint") {
  for (auto kind : kAllTopologyKinds) {
    for (double cw : {0.0, 3.0}) {
      TopologyParams p;
      p.crosswalk_width = cw;
      const RoadTopology t = build_topology(kind, p);
      for (auto a : t.afforded) {
        const auto& parts = t.partition(a);
        for (std::size_t i = 0; i < parts.size(); ++i) {
          for (std::size_t j = i + 1; j < parts.size(); ++j) {
            CHECK(intersection_area(parts[i].polygon, parts[j].polygon) < 1e-9);
          }
        }
      }
    }
  }
}

TEST_CASE("named example points") {
  const RoadTopology t = build_topology(TopologyKind::FourWay, TopologyParams{});
  const Polygon& a1 = t.partition(AffordedAction::LeftTurn)[1].polygon;
  CHECK(ground_truth_region(t, AffordedAction::LeftTurn, a1.centroid()) == SemanticRegion::A1);
  const double lane_x = t.params.lane_width * 0.5;
  CHECK(ground_truth_region(t, AffordedAction::LeftTurn, {lane_x, -t.core_half() - 30.0}) == SemanticRegion::S);
  CHECK(ground_truth_region(t, AffordedAction::LeftTurn, {500.0, 500.0}) == SemanticRegion::None);
}

TEST_CASE("centerline visits regions in stored order without revisits") {
  SimConfig cfg;
  for (auto kind : kAllTopologyKinds) {
    for (double cw : {0.0, 3.0}) {
      TopologyParams p;
      p.crosswalk_width = cw;
      const RoadTopology t = build_topology(kind, p);
      for (auto a : t.afforded) {
        const CenterlinePath path = action_centerline(t, a, cfg);
        std::vector<SemanticRegion> runs;
        for (double s = 0.0; s <= path.length(); s += 0.05) {
          const SemanticRegion r = ground_truth_region(t, a, path.at(s).position);
          if (r == SemanticRegion::None) continue;
          if (runs.empty() || runs.back() != r) runs.push_back(r);
        }
        CHECK_MESSAGE(runs == labels(t, a), to_string(kind), " ", to_string(a), " cw=", cw);
      }
    }
  }
}

TEST_CASE("parameter validation") {
  TopologyParams p;
  p.lane_width = 0.0;
  CHECK_THROWS_AS(build_topology(TopologyKind::FourWay, p), ContractError);
  p = TopologyParams{};
  p.lanes_per_direction = 0;
  CHECK_THROWS_AS(build_topology(TopologyKind::FourWay, p), ContractError);
  p = TopologyParams{};
  p.crosswalk_width = -1.0;
  CHECK_THROWS_AS(build_topology(TopologyKind::FourWay, p), ContractError);
}
