#include <doctest.h>

#include <cmath>
#include <set>

#include "roadsr/scene_sim.hpp"

using namespace roadsr;

namespace {

TopologyParams no_crosswalks() {
  TopologyParams p;
  p.crosswalk_width = 0.0;
  return p;
}

/// P(at least `need` of n independent votes are correct).
double binomial_tail(int n, int need, double p_correct) {
  double total = 0.0;
  for (int k = need; k <= n; ++k) {
    double c = 1.0;
    for (int i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
    total += c * std::pow(p_correct, k) * std::pow(1.0 - p_correct, n - k);
  }
  return total;
}

std::vector<SemanticRegion> runs_of(const std::vector<SemanticRegion>& r) {
  std::vector<SemanticRegion> out;
  for (auto x : r) {
    if (out.empty() || out.back() != x) out.push_back(x);
  }
  return out;
}

}  // namespace

TEST_CASE("zero-noise left turn walks S A1 B1 C1 T1") {
  const RoadTopology t = build_topology(TopologyKind::FourWay, TopologyParams{});
  const Episode ep = make_episode(t, AffordedAction::LeftTurn, SimConfig{}.noiseless());
  using R = SemanticRegion;
  CHECK(runs_of(ep.gt_regions) == std::vector<R>{R::S, R::A1, R::B1, R::C1, R::T1});
  for (std::size_t i = 0; i < ep.size(); ++i) {
    CHECK(ep.gt_regions[i] == ground_truth_region(t, AffordedAction::LeftTurn, ep.ideal_poses[i].position));
  }
}

TEST_CASE("zero-noise runs follow partition order for every afforded action") {
  for (auto kind : kAllTopologyKinds) {
    for (double cw : {0.0, 3.0}) {
      TopologyParams p;
      p.crosswalk_width = cw;
      const RoadTopology t = build_topology(kind, p);
      for (auto a : t.afforded) {
        std::vector<SemanticRegion> expected;
        for (const auto& rp : t.partition(a)) expected.push_back(rp.region);
        const Episode ep = make_episode(t, a, SimConfig{}.noiseless());
        CHECK(runs_of(ep.gt_regions) == expected);
      }
    }
  }
}

TEST_CASE("straight road straight driving stays in NS") {
  const RoadTopology t = build_topology(TopologyKind::StraightMultiLane, TopologyParams{});
  const Episode ep = make_episode(t, AffordedAction::Straight, SimConfig{}.noiseless());
  for (auto r : ep.gt_regions) CHECK(r == SemanticRegion::NS);
  CHECK(ep.gt_topology_class == 0);
}

TEST_CASE("no-crosswalk episodes never label A or C") {
  const RoadTopology t = build_topology(TopologyKind::FourWay, no_crosswalks());
  for (auto a : t.afforded) {
    SimConfig cfg;
    cfg.seed = 4;
    const Episode ep = make_episode(t, a, cfg);
    for (auto r : ep.gt_regions) {
      CHECK(r != SemanticRegion::A1);
      CHECK(r != SemanticRegion::C1);
      CHECK(r != SemanticRegion::A2);
      CHECK(r != SemanticRegion::C2);
      CHECK(r != SemanticRegion::A3);
      CHECK(r != SemanticRegion::C3);
    }
  }
}

TEST_CASE("episode structure") {
  const RoadTopology t = build_topology(TopologyKind::ThreeWayLeftRight, TopologyParams{});
  SimConfig cfg;
  cfg.seed = 77;
  const Episode ep = make_episode(t, AffordedAction::RightTurn, cfg);
  CHECK(ep.features.size() == ep.poses.size());
  CHECK(ep.gt_regions.size() == ep.poses.size());
  CHECK(ep.ideal_poses.size() == ep.poses.size());
  CHECK(ep.size() >= 8);
  CHECK(ep.gt_topology_class == 1);
  CHECK(ep.gt_intention == AffordedAction::RightTurn);
  for (const auto& f : ep.features) {
    CHECK(f.flatten().size() == FanGeometry::kFeatureDim);
    for (double v : f.occupancy) CHECK((v == 0.0 || v == 1.0));
  }
  for (std::size_t i = 0; i < ep.size(); ++i) CHECK(ep.poses[i].frame_index == static_cast<std::int64_t>(i));
}

TEST_CASE("same seed gives identical episodes, different seeds differ") {
  const RoadTopology t = build_topology(TopologyKind::FourWay, TopologyParams{});
  SimConfig cfg;
  cfg.seed = 123;
  const Episode a = make_episode(t, AffordedAction::Straight, cfg);
  const Episode b = make_episode(t, AffordedAction::Straight, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.poses[i].position == b.poses[i].position);
    CHECK(a.poses[i].heading == b.poses[i].heading);
    CHECK(a.poses[i].localized == b.poses[i].localized);
    CHECK(a.features[i].flatten() == b.features[i].flatten());
  }
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].position == b.points[i].position);
    CHECK(a.points[i].votes == b.points[i].votes);
  }
  cfg.seed = 124;
  const Episode c = make_episode(t, AffordedAction::Straight, cfg);
  bool differs = c.points.size() != a.points.size();
  for (std::size_t i = 0; !differs && i < a.points.size(); ++i) differs = a.points[i].votes != c.points[i].votes;
  CHECK(differs);
}

TEST_CASE("noiseless point cloud resolves to the true class") {
  const RoadTopology t = build_topology(TopologyKind::FourWay, TopologyParams{});
  auto pts = sample_point_cloud(t, SimConfig{}.noiseless());
  resolve_points(pts);
  REQUIRE(!pts.empty());
  for (const auto& p : pts) {
    CHECK(p.position.z == 0.0);
    CHECK(*p.resolved == t.surface_class(project_to_ground(p.position)));
  }
}

TEST_CASE("majority vote accuracy meets the binomial bound") {
  const RoadTopology t = build_topology(TopologyKind::FourWay, TopologyParams{});
  SimConfig cfg;
  cfg.label_flip_rate = 0.2;
  cfg.votes_per_point = 7;
  std::size_t n = 0, correct = 0;
  for (std::uint64_t seed = 0; n < 100000; ++seed) {
    cfg.seed = seed;
    auto pts = sample_point_cloud(t, cfg);
    resolve_points(pts);
    for (const auto& p : pts) {
      ++n;
      correct += *p.resolved == t.surface_class(project_to_ground(p.position));
    }
  }
  const double bound = binomial_tail(7, 4, 0.8);
  CHECK(bound == doctest::Approx(0.966656).epsilon(1e-5));
  CHECK(static_cast<double>(correct) / static_cast<double>(n) >= bound - 0.003);
}

TEST_CASE("point density tracks the configured rate") {
  const RoadTopology t = build_topology(TopologyKind::StraightMultiLane, TopologyParams{});
  SimConfig cfg;
  cfg.point_density = 4.0;
  const auto a = sample_point_cloud(t, cfg);
  cfg.point_density = 8.0;
  const auto b = sample_point_cloud(t, cfg);
  const double ratio = static_cast<double>(b.size()) / static_cast<double>(a.size());
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("ideal steps follow the speed profile") {
  const RoadTopology t = build_topology(TopologyKind::FourWay, TopologyParams{});
  for (auto a : t.afforded) {
    SimConfig cfg;
    cfg.seed = 9;
    const double cruise = episode_cruise_speed(cfg);
    CHECK(cruise >= cfg.speed_mps * (1.0 - cfg.cruise_speed_jitter));
    CHECK(cruise <= cfg.speed_mps * (1.0 + cfg.cruise_speed_jitter));
    const auto poses = ideal_trajectory(t, a, cfg);
    for (std::size_t i = 1; i < poses.size(); ++i) {
      const double d = (poses[i].position - poses[i - 1].position).norm();
      CHECK(d <= cruise / cfg.frame_hz + 1e-9);
      CHECK(d >= 0.9 * cfg.turn_speed_mps / cfg.frame_hz);
    }
  }
}

TEST_CASE("speed profile shape") {
  SimConfig cfg;
  CHECK(speed_profile(5.0, 9.0, std::nullopt, cfg) == 9.0);
  CHECK(speed_profile(0.0, 9.0, 30.0, cfg) == 9.0);
  CHECK(speed_profile(30.0 - cfg.brake_distance_m / 2, 9.0, 30.0, cfg) ==
        doctest::Approx((9.0 + cfg.turn_speed_mps) / 2));
  CHECK(speed_profile(31.0, 9.0, 30.0, cfg) == cfg.turn_speed_mps);
  CHECK(speed_profile(31.0, 3.0, 30.0, cfg) == 3.0);
}

TEST_CASE("noisy localized poses stay near the ideal step") {
  const RoadTopology t = build_topology(TopologyKind::StraightMultiLane, TopologyParams{});
  SimConfig cfg;
  cfg.seed = 31;
  std::size_t pairs = 0, within = 0, dropped = 0, frames = 0;
  for (auto a : t.afforded) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      cfg.seed = s;
      const auto noisy = synthesize_trajectory(t, a, cfg);
      const auto ideal = ideal_trajectory(t, a, cfg);
      REQUIRE(noisy.size() == ideal.size());
      for (std::size_t i = 0; i < noisy.size(); ++i) {
        ++frames;
        dropped += !noisy[i].localized;
        if (i == 0 || !noisy[i].localized || !noisy[i - 1].localized) continue;
        const double d = (noisy[i].position - noisy[i - 1].position).norm();
        const double ideal_d = (ideal[i].position - ideal[i - 1].position).norm();
        ++pairs;
        within += std::abs(d - ideal_d) <= 3.0 * cfg.position_noise_std * std::sqrt(2.0);
      }
    }
  }
  // The displacement error is Rayleigh with scale sqrt(2) sigma; P(> 3 sqrt(2) sigma) = exp(-4.5).
  CHECK(static_cast<double>(within) / static_cast<double>(pairs) >= 1.0 - std::exp(-4.5) - 0.01);
  CHECK(static_cast<double>(dropped) / static_cast<double>(frames) == doctest::Approx(cfg.pose_dropout_rate).epsilon(0.4));
}

TEST_CASE("interactive episodes pause before the junction") {
  const RoadTopology t = build_topology(TopologyKind::FourWay, TopologyParams{});
  SimConfig cfg = SimConfig{}.noiseless();
  cfg.yield_frames = 15;
  const auto poses = ideal_trajectory(t, AffordedAction::Straight, cfg);
  int still = 0;
  for (std::size_t i = 1; i < poses.size(); ++i) still += poses[i].position == poses[i - 1].position;
  CHECK(still == 15);
  cfg.yield_frames = 0;
  CHECK(ideal_trajectory(t, AffordedAction::Straight, cfg).size() + 15 == poses.size());
}

TEST_CASE("unaffordable actions and bad configs throw") {
  const RoadTopology t = build_topology(TopologyKind::FourWay, TopologyParams{});
  CHECK_THROWS_AS(make_episode(t, AffordedAction::LeftLaneChange, SimConfig{}), UnaffordableActionError);
  SimConfig bad;
  bad.frame_hz = 0.0;
  CHECK_THROWS_AS(make_episode(t, AffordedAction::Straight, bad), ContractError);
  bad = SimConfig{};
  bad.label_flip_rate = 1.5;
  CHECK_THROWS_AS(sample_point_cloud(t, bad), ContractError);
}

TEST_CASE("feature vector round trip") {
  FrameFeature f;
  f.occupancy.assign(FanGeometry::kSamples * kSemanticClassCount, 0.0);
  f.occupancy[7] = 1.0;
  f.ego_speed = 3.5;
  f.ego_yaw_rate = -0.25;
  const FrameFeature g = FrameFeature::unflatten(f.flatten());
  CHECK(g.occupancy == f.occupancy);
  CHECK(g.ego_speed == 3.5);
  CHECK(g.ego_yaw_rate == -0.25);
  CHECK_THROWS_AS(FrameFeature::unflatten({1.0}), ContractError);
}
