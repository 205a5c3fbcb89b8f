#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "roadsr/bev.hpp"
#include "roadsr/geometry.hpp"
#include "roadsr/topology.hpp"

namespace roadsr {

struct SimConfig {
  double speed_mps = 8.0;
  double frame_hz = 10.0;
  double heading_noise_std = 0.02;
  double position_noise_std = 0.15;
  double pose_dropout_rate = 0.05;
  double point_density = 16.0;  // points per square meter
  double label_flip_rate = 0.2;
  int votes_per_point = 7;
  std::uint64_t seed = 0;

  double lead_in_m = 20.0;   // approach driven before the first crosswalk zone
  double lead_out_m = 1.5;   // distance driven past the last crosswalk zone
  double lane_change_scale_m = 6.0;
  double cruise_speed_jitter = 0.2;  // per-episode cruise speed spread, fraction of speed_mps
  double turn_speed_mps = 4.0;       // speed held from the start of a turn arc
  double brake_distance_m = 12.0;    // linear slow-down run before a turn arc
  int yield_frames = 0;      // stationary frames before the junction; > 0 marks an interactive episode
  double bev_resolution = kDefaultBevResolution;

  void validate() const;
  /// Same settings with every noise source switched off.
  SimConfig noiseless() const;
};

/// Ego-frame sampling fan: 3 ranges x 8 bearings.
struct FanGeometry {
  std::array<double, 3> ranges_m{5.0, 12.0, 25.0};
  std::array<double, 8> bearings_deg{-90.0, -60.0, -36.0, -12.0, 12.0, 36.0, 60.0, 90.0};

  static constexpr std::size_t kSamples = 24;
  static constexpr std::size_t kFeatureDim = kSamples * kSemanticClassCount + 2;
};

inline const FanGeometry kDefaultFan{};

struct FrameFeature {
  std::vector<double> occupancy;  // kSamples x kSemanticClassCount one-hot, range-major
  double ego_speed = 0.0;
  double ego_yaw_rate = 0.0;

  /// occupancy followed by speed and yaw rate.
  std::vector<double> flatten() const;
  static FrameFeature unflatten(const std::vector<double>& v);
};

FrameFeature sample_frame_feature(const BevGrid& g, const Pose& pose, double speed, double yaw_rate,
                                  const FanGeometry& fan = kDefaultFan);

struct PathSample {
  Vec2 position;
  double heading = 0.0;
};

/// Arc-length parametrized centerline made of lines, circular arcs and
/// sigmoid lane shifts.
class CenterlinePath {
 public:
  void add_line(Vec2 from, Vec2 to);
  /// sweep > 0 turns counter-clockwise.
  void add_arc(Vec2 center, double radius, double start_angle, double sweep);
  /// Northbound lateral shift from x0 to x1 while y runs y0 -> y1.
  void add_lane_shift(double x0, double x1, double y0, double y1, double scale);

  double length() const;
  PathSample at(double s) const;
  /// Arc length at which the first circular arc begins.
  std::optional<double> first_arc_start() const;

 private:
  struct Line {
    Vec2 from;
    Vec2 dir;
    double len;
  };
  struct Arc {
    Vec2 center;
    double radius;
    double start_angle;
    double sweep;
  };
  struct Shift {
    double x0, x1, y0, y1, scale;
    std::vector<double> cum;  // arc length at uniform y steps
    double dy;
    double x_at(double y) const;
    double slope_at(double y) const;
  };
  using Segment = std::variant<Line, Arc, Shift>;

  static double segment_length(const Segment& seg);
  static PathSample segment_at(const Segment& seg, double s);

  std::vector<Segment> segments_;
  std::vector<double> starts_;
};

/// Ideal centerline for an afforded action.
CenterlinePath action_centerline(const RoadTopology& t, AffordedAction action, const SimConfig& cfg);

/// Cruise speed of the episode drawn from the seed.
double episode_cruise_speed(const SimConfig& cfg);

/// Speed at arc length s: cruise, then a linear slow-down to turn_speed over
/// brake_distance before turn_start, then turn_speed.
double speed_profile(double s, double cruise, std::optional<double> turn_start, const SimConfig& cfg);

/// Noise-free poses along the centerline, including any yield pause.
std::vector<Pose> ideal_trajectory(const RoadTopology& t, AffordedAction action, const SimConfig& cfg);

/// Ideal poses with position/heading jitter and dropout applied.
std::vector<Pose> synthesize_trajectory(const RoadTopology& t, AffordedAction action, const SimConfig& cfg);

std::vector<SemanticPoint> sample_point_cloud(const RoadTopology& t, const SimConfig& cfg);

struct Episode {
  RoadTopology topology;
  AffordedAction action = AffordedAction::Straight;
  std::vector<Pose> poses;        // observed (noisy, with dropout)
  std::vector<Pose> ideal_poses;  // ground truth motion
  std::vector<FrameFeature> features;
  std::vector<SemanticRegion> gt_regions;
  int gt_topology_class = 0;
  AffordedAction gt_intention = AffordedAction::Straight;
  std::vector<SemanticPoint> points;
  BevGrid grid;
  bool interactive = false;

  std::size_t size() const { return poses.size(); }
};

Episode make_episode(const RoadTopology& t, AffordedAction action, const SimConfig& cfg);

/// Deterministic 64-bit mixer used to derive independent random streams.
std::uint64_t splitmix64(std::uint64_t x);
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

}  // namespace roadsr
