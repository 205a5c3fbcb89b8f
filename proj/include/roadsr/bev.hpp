#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "roadsr/geometry.hpp"

namespace roadsr {

struct CellIndex {
  int row = 0;
  int col = 0;
  bool operator==(const CellIndex&) const = default;
  auto operator<=>(const CellIndex&) const = default;
};

struct BevCell {
  SemanticClass cls = SemanticClass::Unknown;
  VoteCounts votes{};
};

/// Ground-plane semantic raster. Row 0 is the southern-most row (min y).
class BevGrid {
 public:
  BevGrid() = default;
  BevGrid(Vec2 origin, double resolution, int width, int height);

  /// Grid aligned to multiples of the resolution covering the box plus a margin.
  static BevGrid covering(const Box& extent, double resolution, double margin);

  Vec2 origin() const { return origin_; }
  double resolution() const { return resolution_; }
  int width() const { return width_; }
  int height() const { return height_; }

  bool contains(CellIndex c) const { return c.row >= 0 && c.col >= 0 && c.row < height_ && c.col < width_; }
  std::optional<CellIndex> cell_of(Vec2 p) const;
  Box cell_box(CellIndex c) const;
  Vec2 cell_center(CellIndex c) const { return cell_box(c).center(); }

  const BevCell& at(CellIndex c) const { return cells_[index(c)]; }
  BevCell& at(CellIndex c) { return cells_[index(c)]; }
  /// Class at a world point; Unknown outside the grid.
  SemanticClass class_at(Vec2 p) const;

  /// Recomputes every cell's class from its votes.
  void resolve();
  std::uint64_t total_votes() const;

  bool operator==(const BevGrid& o) const;

 private:
  std::size_t index(CellIndex c) const { return static_cast<std::size_t>(c.row) * width_ + c.col; }

  Vec2 origin_;
  double resolution_ = 0.5;
  int width_ = 0;
  int height_ = 0;
  std::vector<BevCell> cells_;
};

inline constexpr double kDefaultBevResolution = 0.5;

/// Adds one vote per resolved point to its cell, then resolves cells.
/// Without an extent the grid is the resolution-aligned bounding box of the points.
BevGrid rasterize(std::span<const SemanticPoint> points, double resolution);
BevGrid rasterize(std::span<const SemanticPoint> points, double resolution, const Box& extent, double margin);

struct CrosswalkComponent {
  std::vector<CellIndex> cells;  // sorted
  Polygon footprint;             // axis-aligned hull of the cells
  int order_index = -1;

  Box box() const { return footprint.bounds(); }
};

/// ceil(0.5 * crosswalk_area / cell_area)
int min_component_cells_for(double crosswalk_area, double resolution);

/// 4-connected Crosswalk components of at least min_component_cells cells,
/// ordered by their smallest cell index.
std::vector<CrosswalkComponent> extract_crosswalks(const BevGrid& g, int min_component_cells);

inline constexpr int kDefaultMinComponentCells = 20;

/// Junction box bounded by the crosswalk inner edges when at least two
/// components exist; otherwise the cross-kernel road-run test.
std::optional<Polygon> detect_intersection_core(const BevGrid& g,
                                                int min_component_cells = kDefaultMinComponentCells);

/// Road-run kernel alone (exposed for tests). road_width <= 0 estimates it from the grid.
std::optional<Polygon> detect_core_by_kernel(const BevGrid& g, double road_width = 0.0);
std::optional<Polygon> core_from_crosswalks(const std::vector<CrosswalkComponent>& comps);

double polygon_iou(const Polygon& a, const Polygon& b);

/// Binary PGM (P5): north up, value = class id * 42.
void write_pgm(const BevGrid& g, std::ostream& out);
/// CSV with header `row,col,class_id,total_votes`, row-major from row 0.
void write_csv(const BevGrid& g, std::ostream& out);

}  // namespace roadsr
