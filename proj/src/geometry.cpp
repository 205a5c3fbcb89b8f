#include "roadsr/geometry.hpp"

#include <algorithm>

namespace roadsr {

double wrap_angle(double radians) {
  double a = std::fmod(radians, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

double angle_diff(double a, double b) { return wrap_angle(a - b); }

double signed_area(const std::vector<Vec2>& ring) {
  double acc = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    acc += ring[i].cross(ring[(i + 1) % n]);
  }
  return acc / 2.0;
}

namespace {

double orient(Vec2 a, Vec2 b, Vec2 c) { return (b - a).cross(c - a); }

bool on_segment(Vec2 p, Vec2 a, Vec2 b) {
  const double scale = std::max({1.0, std::abs(a.x), std::abs(a.y), std::abs(b.x), std::abs(b.y)});
  const double eps = 1e-12 * scale * scale;
  if (std::abs(orient(a, b, p)) > eps) return false;
  return p.x >= std::min(a.x, b.x) - 1e-12 * scale && p.x <= std::max(a.x, b.x) + 1e-12 * scale &&
         p.y >= std::min(a.y, b.y) - 1e-12 * scale && p.y <= std::max(a.y, b.y) + 1e-12 * scale;
}

bool segments_cross(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = orient(c, d, a);
  const double d2 = orient(c, d, b);
  const double d3 = orient(a, b, c);
  const double d4 = orient(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  return on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b);
}

}  // namespace

bool is_simple(const std::vector<Vec2>& ring) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = ring[i];
    const Vec2 b = ring[(i + 1) % n];
    if (a == b) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      // Adjacent edges share a vertex by construction.
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_cross(a, b, ring[j], ring[(j + 1) % n])) return false;
    }
  }
  return true;
}

Polygon::Polygon(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3) throw ContractError("polygon needs at least 3 vertices");
  for (const auto& v : vertices_) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw ContractError("polygon vertex not finite");
  }
  if (!(signed_area(vertices_) > 0.0)) throw ContractError("polygon must be counter-clockwise with positive area");
  if (!is_simple(vertices_)) throw ContractError("polygon is self-intersecting");
}

Polygon Polygon::rectangle(double x0, double y0, double x1, double y1) {
  const double lx = std::min(x0, x1), hx = std::max(x0, x1);
  const double ly = std::min(y0, y1), hy = std::max(y0, y1);
  return Polygon({{lx, ly}, {hx, ly}, {hx, hy}, {lx, hy}});
}

double Polygon::area() const { return signed_area(vertices_); }

Box Polygon::bounds() const {
  Box b{vertices_.front(), vertices_.front()};
  for (const auto& v : vertices_) {
    b.min.x = std::min(b.min.x, v.x);
    b.min.y = std::min(b.min.y, v.y);
    b.max.x = std::max(b.max.x, v.x);
    b.max.y = std::max(b.max.y, v.y);
  }
  return b;
}

Vec2 Polygon::centroid() const {
  double cx = 0.0, cy = 0.0;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = vertices_[i];
    const Vec2 b = vertices_[(i + 1) % n];
    const double w = a.cross(b);
    cx += (a.x + b.x) * w;
    cy += (a.y + b.y) * w;
  }
  const double a6 = 6.0 * area();
  return {cx / a6, cy / a6};
}

bool point_in_polygon(Vec2 p, const Polygon& poly) {
  const auto& v = poly.vertices();
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (on_segment(p, v[i], v[(i + 1) % n])) return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if ((v[i].y > p.y) != (v[j].y > p.y)) {
      const double x_at = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
      if (p.x < x_at) inside = !inside;
    }
  }
  return inside;
}

std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip) {
  std::vector<Vec2> out = subject;
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const Vec2 a = clip[e];
    const Vec2 b = clip[(e + 1) % m];
    std::vector<Vec2> in = std::move(out);
    out.clear();
    const std::size_t k = in.size();
    for (std::size_t i = 0; i < k; ++i) {
      const Vec2 cur = in[i];
      const Vec2 prev = in[(i + k - 1) % k];
      const double dc = orient(a, b, cur);
      const double dp = orient(a, b, prev);
      if (dc >= 0) {
        if (dp < 0) out.push_back(prev + (cur - prev) * (dp / (dp - dc)));
        out.push_back(cur);
      } else if (dp >= 0) {
        out.push_back(prev + (cur - prev) * (dp / (dp - dc)));
      }
    }
  }
  return out;
}

namespace {

struct SignedTriangle {
  std::vector<Vec2> ccw;
  double sign;
};

// Fan decomposition: the winding number of the ring equals the signed sum of
// the fan triangles' indicators almost everywhere.
std::vector<SignedTriangle> fan(const std::vector<Vec2>& ring) {
  std::vector<SignedTriangle> tris;
  for (std::size_t i = 1; i + 1 < ring.size(); ++i) {
    std::vector<Vec2> t{ring[0], ring[i], ring[i + 1]};
    const double a = signed_area(t);
    if (a == 0.0) continue;
    if (a < 0) std::swap(t[1], t[2]);
    tris.push_back({std::move(t), a > 0 ? 1.0 : -1.0});
  }
  return tris;
}

}  // namespace

double intersection_area(const Polygon& a, const Polygon& b) {
  const auto ta = fan(a.vertices());
  const auto tb = fan(b.vertices());
  double acc = 0.0;
  for (const auto& x : ta) {
    for (const auto& y : tb) {
      const auto piece = clip_convex(x.ccw, y.ccw);
      if (piece.size() >= 3) acc += x.sign * y.sign * signed_area(piece);
    }
  }
  return std::max(acc, 0.0);
}

SemanticClass class_from_id(int id) {
  if (id < 0 || id >= static_cast<int>(kSemanticClassCount)) {
    throw ContractError("semantic class id out of range: " + std::to_string(id));
  }
  return static_cast<SemanticClass>(id);
}

std::string_view to_string(SemanticClass c) {
  switch (c) {
    case SemanticClass::Road: return "Road";
    case SemanticClass::Crosswalk: return "Crosswalk";
    case SemanticClass::LaneMarking: return "LaneMarking";
    case SemanticClass::Sidewalk: return "Sidewalk";
    case SemanticClass::Obstacle: return "Obstacle";
    case SemanticClass::Unknown: return "Unknown";
  }
  return "Unknown";
}

SemanticClass semantic_class_from_string(std::string_view name) {
  for (auto c : kAllSemanticClasses) {
    if (to_string(c) == name) return c;
  }
  throw ContractError("unknown semantic class: " + std::string(name));
}

SemanticClass winner_take_all(const VoteCounts& votes) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < votes.size(); ++i) {
    if (votes[i] > votes[best]) best = i;
  }
  if (votes[best] == 0) throw UnobservedPointError("winner_take_all: no votes (unobserved point)");
  return static_cast<SemanticClass>(best);
}

SemanticClass winner_take_all(const std::map<SemanticClass, std::uint32_t>& votes) {
  VoteCounts arr{};
  for (const auto& [cls, n] : votes) arr[class_id(cls)] += n;
  return winner_take_all(arr);
}

void resolve_points(std::vector<SemanticPoint>& points) {
  for (auto& p : points) p.resolved = winner_take_all(p.votes);
}

}  // namespace roadsr
