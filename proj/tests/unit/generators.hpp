#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "roadsr/geometry.hpp"

namespace roadsr::testgen {

/// Star-shaped CCW ring around (cx, cy): sorted angles, random radii.
/// Concave whenever the radii vary enough.
inline std::vector<Vec2> star_ring(std::mt19937_64& rng, int n, double cx, double cy, double rmin, double rmax) {
  std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> rad(rmin, rmax);
  std::vector<double> angles(static_cast<std::size_t>(n));
  for (auto& a : angles) a = ang(rng);
  std::sort(angles.begin(), angles.end());
  std::vector<Vec2> ring;
  for (double a : angles) {
    const double r = rad(rng);
    ring.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
  }
  return ring;
}

/// Convex CCW ring: points on a circle at sorted random angles.
inline std::vector<Vec2> convex_ring(std::mt19937_64& rng, int n, double cx, double cy, double r) {
  return star_ring(rng, n, cx, cy, r, r);
}

/// Winding number of ring about p, from summed signed angles.
inline int winding_number(Vec2 p, const std::vector<Vec2>& ring) {
  double total = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Vec2 a = ring[i] - p;
    const Vec2 b = ring[(i + 1) % ring.size()] - p;
    total += std::atan2(a.cross(b), a.dot(b));
  }
  return static_cast<int>(std::lround(total / (2.0 * kPi)));
}

/// Distance from p to the closest edge of ring.
inline double boundary_distance(Vec2 p, const std::vector<Vec2>& ring) {
  double best = 1e300;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Vec2 a = ring[i];
    const Vec2 b = ring[(i + 1) % ring.size()];
    const Vec2 ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.dot(ab), 0.0, 1.0);
    best = std::min(best, (p - (a + ab * t)).norm());
  }
  return best;
}

}  // namespace roadsr::testgen
