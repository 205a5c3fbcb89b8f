#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "roadsr/errors.hpp"

namespace roadsr {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;

  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool operator==(const Vec3&) const = default;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

/// Shortest signed difference a - b, in (-pi, pi].
double angle_diff(double a, double b);

struct Pose {
  Vec2 position;
  double heading = 0.0;  // radians, (-pi, pi]
  std::int64_t frame_index = 0;
  bool localized = true;
};

struct Box {
  Vec2 min;
  Vec2 max;

  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  double area() const { return width() * height(); }
  Vec2 center() const { return {(min.x + max.x) / 2, (min.y + max.y) / 2}; }
};

/// Simple counter-clockwise polygon. Validated on construction.
class Polygon {
 public:
  explicit Polygon(std::vector<Vec2> vertices);

  /// Axis-aligned rectangle; corners may be given in any order.
  static Polygon rectangle(double x0, double y0, double x1, double y1);
  static Polygon from_box(const Box& b) { return rectangle(b.min.x, b.min.y, b.max.x, b.max.y); }

  const std::vector<Vec2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  double area() const;
  Box bounds() const;
  Vec2 centroid() const;

 private:
  std::vector<Vec2> vertices_;
};

double signed_area(const std::vector<Vec2>& ring);
bool is_simple(const std::vector<Vec2>& ring);

/// Boundary-inclusive containment test.
bool point_in_polygon(Vec2 p, const Polygon& poly);

/// Area of the intersection of two simple polygons (convex or not).
double intersection_area(const Polygon& a, const Polygon& b);

/// Clips a convex CCW subject against a convex CCW clip ring.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip);

enum class SemanticClass : std::uint8_t {
  Road = 0,
  Crosswalk = 1,
  LaneMarking = 2,
  Sidewalk = 3,
  Obstacle = 4,
  Unknown = 5,
};

inline constexpr std::size_t kSemanticClassCount = 6;
inline constexpr std::array<SemanticClass, kSemanticClassCount> kAllSemanticClasses = {
    SemanticClass::Road,     SemanticClass::Crosswalk, SemanticClass::LaneMarking,
    SemanticClass::Sidewalk, SemanticClass::Obstacle,  SemanticClass::Unknown};

constexpr int class_id(SemanticClass c) { return static_cast<int>(c); }
SemanticClass class_from_id(int id);
std::string_view to_string(SemanticClass c);
SemanticClass semantic_class_from_string(std::string_view name);

using VoteCounts = std::array<std::uint32_t, kSemanticClassCount>;

inline std::uint64_t total_votes(const VoteCounts& v) {
  std::uint64_t n = 0;
  for (auto c : v) n += c;
  return n;
}

struct SemanticPoint {
  Vec3 position;
  VoteCounts votes{};
  std::optional<SemanticClass> resolved;
};

/// Class with the most votes; ties go to the lowest class id.
SemanticClass winner_take_all(const VoteCounts& votes);
SemanticClass winner_take_all(const std::map<SemanticClass, std::uint32_t>& votes);

/// Resolves every point in place.
void resolve_points(std::vector<SemanticPoint>& points);

inline Vec2 project_to_ground(const Vec3& p) { return {p.x, p.y}; }

}  // namespace roadsr
