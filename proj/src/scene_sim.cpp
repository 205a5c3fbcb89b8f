#include "roadsr/scene_sim.hpp"

#include <algorithm>

namespace roadsr {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ull)));
}

void SimConfig::validate() const {
  if (!(speed_mps > 0.0)) throw ContractError("speed_mps must be positive");
  if (!(frame_hz > 0.0)) throw ContractError("frame_hz must be positive");
  if (!(heading_noise_std >= 0.0) || !(position_noise_std >= 0.0)) throw ContractError("noise std must be >= 0");
  if (!(pose_dropout_rate >= 0.0 && pose_dropout_rate <= 1.0)) throw ContractError("pose_dropout_rate not in [0,1]");
  if (!(point_density >= 0.0)) throw ContractError("point_density must be >= 0");
  if (!(label_flip_rate >= 0.0 && label_flip_rate <= 1.0)) throw ContractError("label_flip_rate not in [0,1]");
  if (votes_per_point < 1) throw ContractError("votes_per_point must be positive");
  if (!(lead_in_m >= 0.0) || !(lead_out_m >= 0.0)) throw ContractError("lead distances must be >= 0");
  if (!(lane_change_scale_m > 0.0)) throw ContractError("lane_change_scale_m must be positive");
  if (yield_frames < 0) throw ContractError("yield_frames must be >= 0");
  if (!(bev_resolution > 0.0)) throw ContractError("bev_resolution must be positive");
  if (!(cruise_speed_jitter >= 0.0 && cruise_speed_jitter < 1.0)) {
    throw ContractError("cruise_speed_jitter not in [0,1)");
  }
  if (!(turn_speed_mps > 0.0) || !(brake_distance_m >= 0.0)) {
    throw ContractError("turn_speed_mps must be positive and brake_distance_m >= 0");
  }
}

SimConfig SimConfig::noiseless() const {
  SimConfig c = *this;
  c.heading_noise_std = 0.0;
  c.position_noise_std = 0.0;
  c.pose_dropout_rate = 0.0;
  c.label_flip_rate = 0.0;
  return c;
}

std::vector<double> FrameFeature::flatten() const {
  std::vector<double> v = occupancy;
  v.push_back(ego_speed);
  v.push_back(ego_yaw_rate);
  return v;
}

FrameFeature FrameFeature::unflatten(const std::vector<double>& v) {
  if (v.size() < 2) throw ContractError("feature vector too short");
  FrameFeature f;
  f.occupancy.assign(v.begin(), v.end() - 2);
  f.ego_speed = v[v.size() - 2];
  f.ego_yaw_rate = v.back();
  return f;
}

FrameFeature sample_frame_feature(const BevGrid& g, const Pose& pose, double speed, double yaw_rate,
                                  const FanGeometry& fan) {
  FrameFeature f;
  f.occupancy.assign(FanGeometry::kSamples * kSemanticClassCount, 0.0);
  std::size_t k = 0;
  for (double r : fan.ranges_m) {
    for (double b : fan.bearings_deg) {
      const double a = pose.heading + b * kPi / 180.0;
      const Vec2 p = pose.position + Vec2{std::cos(a), std::sin(a)} * r;
      f.occupancy[k * kSemanticClassCount + class_id(g.class_at(p))] = 1.0;
      ++k;
    }
  }
  f.ego_speed = speed;
  f.ego_yaw_rate = yaw_rate;
  return f;
}

// ---- centerline ----

double CenterlinePath::Shift::x_at(double y) const {
  auto sig = [&](double yy) { return 1.0 / (1.0 + std::exp(-(yy - 0.5 * (y0 + y1)) / scale)); };
  const double s0 = sig(y0), s1 = sig(y1);
  return x0 + (x1 - x0) * (sig(y) - s0) / (s1 - s0);
}

double CenterlinePath::Shift::slope_at(double y) const {
  auto sig = [&](double yy) { return 1.0 / (1.0 + std::exp(-(yy - 0.5 * (y0 + y1)) / scale)); };
  const double s = sig(y);
  return (x1 - x0) * s * (1.0 - s) / scale / (sig(y1) - sig(y0));
}

void CenterlinePath::add_line(Vec2 from, Vec2 to) {
  const Vec2 d = to - from;
  const double len = d.norm();
  if (!(len > 0.0)) throw ContractError("degenerate path line");
  starts_.push_back(length());
  segments_.push_back(Line{from, d * (1.0 / len), len});
}

void CenterlinePath::add_arc(Vec2 center, double radius, double start_angle, double sweep) {
  if (!(radius > 0.0) || sweep == 0.0) throw ContractError("degenerate path arc");
  starts_.push_back(length());
  segments_.push_back(Arc{center, radius, start_angle, sweep});
}

void CenterlinePath::add_lane_shift(double x0, double x1, double y0, double y1, double scale) {
  if (!(y1 > y0) || !(scale > 0.0)) throw ContractError("degenerate lane shift");
  Shift sh{x0, x1, y0, y1, scale, {}, 0.0};
  const int n = static_cast<int>(std::ceil((y1 - y0) / 0.05));
  sh.dy = (y1 - y0) / n;
  sh.cum.resize(n + 1, 0.0);
  if (x0 != x1) {
    for (int i = 1; i <= n; ++i) {
      const double ya = y0 + (i - 1) * sh.dy, yb = y0 + i * sh.dy;
      const double fa = std::sqrt(1.0 + sh.slope_at(ya) * sh.slope_at(ya));
      const double fb = std::sqrt(1.0 + sh.slope_at(yb) * sh.slope_at(yb));
      sh.cum[i] = sh.cum[i - 1] + 0.5 * (fa + fb) * sh.dy;
    }
  } else {
    for (int i = 1; i <= n; ++i) sh.cum[i] = i * sh.dy;
  }
  starts_.push_back(length());
  segments_.push_back(std::move(sh));
}

double CenterlinePath::segment_length(const Segment& seg) {
  if (const auto* l = std::get_if<Line>(&seg)) return l->len;
  if (const auto* a = std::get_if<Arc>(&seg)) return a->radius * std::abs(a->sweep);
  return std::get<Shift>(seg).cum.back();
}

double CenterlinePath::length() const {
  return segments_.empty() ? 0.0 : starts_.back() + segment_length(segments_.back());
}

PathSample CenterlinePath::segment_at(const Segment& seg, double s) {
  if (const auto* l = std::get_if<Line>(&seg)) {
    return {l->from + l->dir * s, std::atan2(l->dir.y, l->dir.x)};
  }
  if (const auto* a = std::get_if<Arc>(&seg)) {
    const double dir = a->sweep > 0 ? 1.0 : -1.0;
    const double theta = a->start_angle + dir * s / a->radius;
    const Vec2 p = a->center + Vec2{std::cos(theta), std::sin(theta)} * a->radius;
    return {p, wrap_angle(theta + dir * kPi / 2)};
  }
  const auto& sh = std::get<Shift>(seg);
  const auto it = std::upper_bound(sh.cum.begin(), sh.cum.end(), s);
  std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - sh.cum.begin()));
  i = std::min(i, sh.cum.size() - 1);
  const double frac = (s - sh.cum[i - 1]) / (sh.cum[i] - sh.cum[i - 1]);
  const double y = sh.y0 + (static_cast<double>(i - 1) + frac) * sh.dy;
  return {{sh.x_at(y), y}, std::atan2(1.0, sh.slope_at(y))};
}

std::optional<double> CenterlinePath::first_arc_start() const {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (std::holds_alternative<Arc>(segments_[i])) return starts_[i];
  }
  return std::nullopt;
}

PathSample CenterlinePath::at(double s) const {
  if (segments_.empty()) throw ContractError("empty path");
  s = std::clamp(s, 0.0, length());
  auto it = std::upper_bound(starts_.begin(), starts_.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - starts_.begin()) - 1;
  return segment_at(segments_[i], std::min(s - starts_[i], segment_length(segments_[i])));
}

CenterlinePath action_centerline(const RoadTopology& t, AffordedAction action, const SimConfig& cfg) {
  t.partition(action);  // throws when unaffordable
  const double lw = t.params.lane_width;
  const double lane_in = (entry_lane(t, action) + 0.5) * lw;
  const double lane_out = (exit_lane(t, action) + 0.5) * lw;
  CenterlinePath path;
  if (!is_intersection(t.kind)) {
    const double end = t.arm_end();
    path.add_lane_shift(lane_in, lane_out, -end + 1.0, end - 26.0, cfg.lane_change_scale_m);
    return path;
  }
  const double zone = t.core_half() + t.params.crosswalk_width + t.params.ego_half_length;
  const double y0 = -zone - cfg.lead_in_m;
  const double far = zone + cfg.lead_out_m;
  switch (action) {
    case AffordedAction::Straight:
      path.add_line({lane_in, y0}, {lane_in, far});
      break;
    case AffordedAction::LeftTurn: {
      const double r = 2.5 * lw;
      const Vec2 c{lane_in - r, lane_out - r};
      path.add_line({lane_in, y0}, {lane_in, c.y});
      path.add_arc(c, r, 0.0, kPi / 2);
      path.add_line({c.x, lane_out}, {std::min(-far, c.x - cfg.lead_out_m), lane_out});
      break;
    }
    case AffordedAction::RightTurn: {
      const double r = 1.5 * lw;
      const Vec2 c{lane_in + r, -lane_out - r};
      path.add_line({lane_in, y0}, {lane_in, c.y});
      path.add_arc(c, r, kPi, -kPi / 2);
      path.add_line({c.x, -lane_out}, {std::max(far, c.x + cfg.lead_out_m), -lane_out});
      break;
    }
    default: throw UnaffordableActionError("lane change at an intersection");
  }
  return path;
}

double episode_cruise_speed(const SimConfig& cfg) {
  auto rng = make_rng(cfg.seed, 3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return cfg.speed_mps * (1.0 + cfg.cruise_speed_jitter * u(rng));
}

double speed_profile(double s, double cruise, std::optional<double> turn_start, const SimConfig& cfg) {
  if (!turn_start || cfg.turn_speed_mps >= cruise) return cruise;
  if (s >= *turn_start) return cfg.turn_speed_mps;
  const double brake_from = *turn_start - cfg.brake_distance_m;
  if (s <= brake_from) return cruise;
  const double f = (s - brake_from) / cfg.brake_distance_m;
  return cruise + (cfg.turn_speed_mps - cruise) * f;
}

std::vector<Pose> ideal_trajectory(const RoadTopology& t, AffordedAction action, const SimConfig& cfg) {
  cfg.validate();
  const CenterlinePath path = action_centerline(t, action, cfg);
  const double cruise = episode_cruise_speed(cfg);
  const std::optional<double> turn_start = path.first_arc_start();
  // Yield just before the first crosswalk zone (or at the same distance on straight roads).
  const double s_yield = std::max(0.0, cfg.lead_in_m - 1.0);
  std::vector<Pose> poses;
  std::int64_t frame = 0;
  bool yielded = false;
  // The 0.37 offset keeps frames off region boundaries at whole-step distances.
  for (double s = 0.37 * cruise / cfg.frame_hz; s <= path.length();) {
    const double step = speed_profile(s, cruise, turn_start, cfg) / cfg.frame_hz;
    const PathSample ps = path.at(s);
    poses.push_back({ps.position, wrap_angle(ps.heading), frame++, true});
    if (!yielded && cfg.yield_frames > 0 && s + step > s_yield) {
      for (int y = 0; y < cfg.yield_frames; ++y) {
        poses.push_back({ps.position, wrap_angle(ps.heading), frame++, true});
      }
      yielded = true;
    }
    s += step;
  }
  return poses;
}

namespace {

std::vector<Pose> apply_pose_noise(std::vector<Pose> poses, const SimConfig& cfg) {
  auto rng = make_rng(cfg.seed, 1);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (auto& p : poses) {
    const double nx = unit(rng), ny = unit(rng), nh = unit(rng), drop = u01(rng);
    p.position = p.position + Vec2{nx, ny} * cfg.position_noise_std;
    p.heading = wrap_angle(p.heading + nh * cfg.heading_noise_std);
    p.localized = !(drop < cfg.pose_dropout_rate);
  }
  return poses;
}

}  // namespace

std::vector<Pose> synthesize_trajectory(const RoadTopology& t, AffordedAction action, const SimConfig& cfg) {
  return apply_pose_noise(ideal_trajectory(t, action, cfg), cfg);
}

std::vector<SemanticPoint> sample_point_cloud(const RoadTopology& t, const SimConfig& cfg) {
  cfg.validate();
  auto rng = make_rng(cfg.seed, 2);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> wrong(0, static_cast<int>(kSemanticClassCount) - 2);
  std::vector<SemanticPoint> points;
  auto sample_surface = [&](const Polygon& poly) {
    const Box b = poly.bounds();
    std::poisson_distribution<long> count(cfg.point_density * b.area());
    const long n = count(rng);
    for (long i = 0; i < n; ++i) {
      const Vec2 p{b.min.x + u01(rng) * b.width(), b.min.y + u01(rng) * b.height()};
      if (!point_in_polygon(p, poly)) continue;
      const int truth = class_id(t.surface_class(p));
      SemanticPoint sp{{p.x, p.y, 0.0}, {}, std::nullopt};
      for (int v = 0; v < cfg.votes_per_point; ++v) {
        int cls = truth;
        if (u01(rng) < cfg.label_flip_rate) {
          cls = wrong(rng);
          if (cls >= truth) ++cls;
        }
        sp.votes[cls] += 1;
      }
      points.push_back(sp);
    }
  };
  for (const auto& d : t.drivable) sample_surface(d);
  for (const auto& s : t.sidewalks) sample_surface(s);
  return points;
}

Episode make_episode(const RoadTopology& t, AffordedAction action, const SimConfig& cfg) {
  cfg.validate();
  Episode ep;
  ep.topology = t;
  ep.action = action;
  ep.gt_intention = action;
  ep.gt_topology_class = is_intersection(t.kind) ? 1 : 0;
  ep.interactive = cfg.yield_frames > 0;

  ep.ideal_poses = ideal_trajectory(t, action, cfg);
  ep.poses = apply_pose_noise(ep.ideal_poses, cfg);

  ep.points = sample_point_cloud(t, cfg);
  resolve_points(ep.points);
  ep.grid = rasterize(ep.points, cfg.bev_resolution, t.bounds(), 2.0);

  const std::size_t n = ep.ideal_poses.size();
  ep.features.reserve(n);
  ep.gt_regions.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t a = k == 0 ? 0 : k - 1;
    const std::size_t b = k == 0 ? std::min<std::size_t>(1, n - 1) : k;
    const double speed = (ep.ideal_poses[b].position - ep.ideal_poses[a].position).norm() * cfg.frame_hz;
    const double yaw_rate = angle_diff(ep.ideal_poses[b].heading, ep.ideal_poses[a].heading) * cfg.frame_hz;
    ep.features.push_back(sample_frame_feature(ep.grid, ep.ideal_poses[k], speed, yaw_rate));
    ep.gt_regions.push_back(ground_truth_region(t, action, ep.ideal_poses[k].position));
  }
  return ep;
}

}  // namespace roadsr
