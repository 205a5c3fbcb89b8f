#include "roadsr/bev.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <ostream>

namespace roadsr {

BevGrid::BevGrid(Vec2 origin, double resolution, int width, int height)
    : origin_(origin), resolution_(resolution), width_(width), height_(height) {
  if (!(resolution > 0.0)) throw ContractError("BEV resolution must be positive");
  if (width < 0 || height < 0) throw ContractError("BEV dimensions must be non-negative");
  cells_.assign(static_cast<std::size_t>(width) * height, BevCell{});
}

BevGrid BevGrid::covering(const Box& extent, double resolution, double margin) {
  if (!(resolution > 0.0)) throw ContractError("BEV resolution must be positive");
  const double x0 = std::floor((extent.min.x - margin) / resolution) * resolution;
  const double y0 = std::floor((extent.min.y - margin) / resolution) * resolution;
  const int w = static_cast<int>(std::floor((extent.max.x + margin - x0) / resolution)) + 1;
  const int h = static_cast<int>(std::floor((extent.max.y + margin - y0) / resolution)) + 1;
  return BevGrid({x0, y0}, resolution, w, h);
}

std::optional<CellIndex> BevGrid::cell_of(Vec2 p) const {
  const double fc = std::floor((p.x - origin_.x) / resolution_);
  const double fr = std::floor((p.y - origin_.y) / resolution_);
  if (!(fc >= 0.0) || !(fr >= 0.0) || fc >= width_ || fr >= height_) return std::nullopt;
  return CellIndex{static_cast<int>(fr), static_cast<int>(fc)};
}

Box BevGrid::cell_box(CellIndex c) const {
  const Vec2 lo{origin_.x + c.col * resolution_, origin_.y + c.row * resolution_};
  return {lo, {lo.x + resolution_, lo.y + resolution_}};
}

SemanticClass BevGrid::class_at(Vec2 p) const {
  const auto c = cell_of(p);
  return c ? at(*c).cls : SemanticClass::Unknown;
}

void BevGrid::resolve() {
  for (auto& cell : cells_) {
    cell.cls = roadsr::total_votes(cell.votes) == 0 ? SemanticClass::Unknown : winner_take_all(cell.votes);
  }
}

std::uint64_t BevGrid::total_votes() const {
  std::uint64_t n = 0;
  for (const auto& cell : cells_) n += roadsr::total_votes(cell.votes);
  return n;
}

bool BevGrid::operator==(const BevGrid& o) const {
  if (!(origin_ == o.origin_) || resolution_ != o.resolution_ || width_ != o.width_ || height_ != o.height_) {
    return false;
  }
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (cells_[i].cls != o.cells_[i].cls || cells_[i].votes != o.cells_[i].votes) return false;
  }
  return true;
}

namespace {

void accumulate(BevGrid& g, std::span<const SemanticPoint> points) {
  for (const auto& p : points) {
    if (!p.resolved) throw ContractError("rasterize: point not resolved");
    const auto c = g.cell_of(project_to_ground(p.position));
    if (!c) continue;
    g.at(*c).votes[class_id(*p.resolved)] += 1;
  }
  g.resolve();
}

}  // namespace

BevGrid rasterize(std::span<const SemanticPoint> points, double resolution) {
  if (points.empty()) return BevGrid({0.0, 0.0}, resolution, 0, 0);
  Box b{project_to_ground(points.front().position), project_to_ground(points.front().position)};
  for (const auto& p : points) {
    b.min.x = std::min(b.min.x, p.position.x);
    b.min.y = std::min(b.min.y, p.position.y);
    b.max.x = std::max(b.max.x, p.position.x);
    b.max.y = std::max(b.max.y, p.position.y);
  }
  BevGrid g = BevGrid::covering(b, resolution, 0.0);
  accumulate(g, points);
  return g;
}

BevGrid rasterize(std::span<const SemanticPoint> points, double resolution, const Box& extent, double margin) {
  BevGrid g = BevGrid::covering(extent, resolution, margin);
  accumulate(g, points);
  return g;
}

int min_component_cells_for(double crosswalk_area, double resolution) {
  return static_cast<int>(std::ceil(0.5 * crosswalk_area / (resolution * resolution)));
}

std::vector<CrosswalkComponent> extract_crosswalks(const BevGrid& g, int min_component_cells) {
  std::vector<char> seen(static_cast<std::size_t>(g.width()) * g.height(), 0);
  auto flat = [&](CellIndex c) { return static_cast<std::size_t>(c.row) * g.width() + c.col; };
  std::vector<CrosswalkComponent> out;
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) {
      const CellIndex start{r, c};
      if (seen[flat(start)] || g.at(start).cls != SemanticClass::Crosswalk) continue;
      std::vector<CellIndex> cells;
      std::deque<CellIndex> queue{start};
      seen[flat(start)] = 1;
      while (!queue.empty()) {
        const CellIndex cur = queue.front();
        queue.pop_front();
        cells.push_back(cur);
        constexpr int dr[4] = {1, -1, 0, 0};
        constexpr int dc[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const CellIndex nb{cur.row + dr[k], cur.col + dc[k]};
          if (!g.contains(nb) || seen[flat(nb)] || g.at(nb).cls != SemanticClass::Crosswalk) continue;
          seen[flat(nb)] = 1;
          queue.push_back(nb);
        }
      }
      if (static_cast<int>(cells.size()) < min_component_cells) continue;
      std::sort(cells.begin(), cells.end());
      int rmin = cells.front().row, rmax = cells.front().row;
      int cmin = cells.front().col, cmax = cells.front().col;
      for (const auto& x : cells) {
        rmin = std::min(rmin, x.row);
        rmax = std::max(rmax, x.row);
        cmin = std::min(cmin, x.col);
        cmax = std::max(cmax, x.col);
      }
      const Box lo = g.cell_box({rmin, cmin});
      const Box hi = g.cell_box({rmax, cmax});
      out.push_back({std::move(cells), Polygon::rectangle(lo.min.x, lo.min.y, hi.max.x, hi.max.y), -1});
    }
  }
  return out;
}

std::optional<Polygon> core_from_crosswalks(const std::vector<CrosswalkComponent>& comps) {
  if (comps.size() < 2) return std::nullopt;
  // Components wider than tall span a north/south arm, the others an east/west arm.
  std::vector<Box> across_ns, across_ew;
  for (const auto& c : comps) {
    const Box b = c.box();
    (b.width() >= b.height() ? across_ns : across_ew).push_back(b);
  }
  auto mean_center = [](const std::vector<Box>& boxes, bool x_axis) {
    double acc = 0.0;
    for (const auto& b : boxes) acc += x_axis ? b.center().x : b.center().y;
    return acc / static_cast<double>(boxes.size());
  };
  std::vector<Box> all;
  for (const auto& c : comps) all.push_back(c.box());
  const double cx = mean_center(across_ns.empty() ? all : across_ns, true);
  const double cy = mean_center(across_ew.empty() ? all : across_ew, false);

  constexpr double kNone = std::numeric_limits<double>::quiet_NaN();
  double ymin = kNone, ymax = kNone, xmin = kNone, xmax = kNone;
  for (const auto& b : across_ns) {
    if (b.center().y < cy) {
      ymin = std::isnan(ymin) ? b.max.y : std::max(ymin, b.max.y);
    } else {
      ymax = std::isnan(ymax) ? b.min.y : std::min(ymax, b.min.y);
    }
  }
  for (const auto& b : across_ew) {
    if (b.center().x < cx) {
      xmin = std::isnan(xmin) ? b.max.x : std::max(xmin, b.max.x);
    } else {
      xmax = std::isnan(xmax) ? b.min.x : std::min(xmax, b.min.x);
    }
  }
  // Missing sides mirror the opposite side about the junction centre.
  if (std::isnan(ymin) && !std::isnan(ymax)) ymin = 2 * cy - ymax;
  if (std::isnan(ymax) && !std::isnan(ymin)) ymax = 2 * cy - ymin;
  if (std::isnan(xmin) && !std::isnan(xmax)) xmin = 2 * cx - xmax;
  if (std::isnan(xmax) && !std::isnan(xmin)) xmax = 2 * cx - xmin;
  if (std::isnan(xmin) && !std::isnan(ymin)) {
    const double half = (ymax - ymin) / 2;
    xmin = cx - half;
    xmax = cx + half;
  }
  if (std::isnan(ymin) && !std::isnan(xmin)) {
    const double half = (xmax - xmin) / 2;
    ymin = cy - half;
    ymax = cy + half;
  }
  if (std::isnan(xmin) || std::isnan(ymin) || !(xmax > xmin) || !(ymax > ymin)) return std::nullopt;
  return Polygon::rectangle(xmin, ymin, xmax, ymax);
}

namespace {

bool road_like(SemanticClass c) {
  return c == SemanticClass::Road || c == SemanticClass::LaneMarking || c == SemanticClass::Crosswalk;
}

// Length (in cells) of the road run through every cell along one axis.
// A single non-road cell between road cells does not break a run.
std::vector<int> run_lengths(const BevGrid& g, bool horizontal) {
  const int outer = horizontal ? g.height() : g.width();
  const int inner = horizontal ? g.width() : g.height();
  std::vector<int> out(static_cast<std::size_t>(g.width()) * g.height(), 0);
  auto cell = [&](int o, int i) { return horizontal ? CellIndex{o, i} : CellIndex{i, o}; };
  auto flat = [&](CellIndex c) { return static_cast<std::size_t>(c.row) * g.width() + c.col; };
  for (int o = 0; o < outer; ++o) {
    int i = 0;
    while (i < inner) {
      if (!road_like(g.at(cell(o, i)).cls)) {
        ++i;
        continue;
      }
      int j = i;
      while (true) {
        if (j + 1 < inner && road_like(g.at(cell(o, j + 1)).cls)) {
          ++j;
        } else if (j + 2 < inner && road_like(g.at(cell(o, j + 2)).cls)) {
          j += 2;
        } else {
          break;
        }
      }
      const int len = j - i + 1;
      for (int k = i; k <= j; ++k) {
        if (road_like(g.at(cell(o, k)).cls)) out[flat(cell(o, k))] = len;
      }
      i = j + 1;
    }
  }
  return out;
}

}  // namespace

std::optional<Polygon> detect_core_by_kernel(const BevGrid& g, double road_width) {
  if (g.width() == 0 || g.height() == 0) return std::nullopt;
  const auto h = run_lengths(g, true);
  const auto v = run_lengths(g, false);
  const double res = g.resolution();
  if (road_width <= 0.0) {
    std::vector<int> widths;
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (h[i] > 0 && v[i] > 0) widths.push_back(std::min(h[i], v[i]));
    }
    if (widths.empty()) return std::nullopt;
    std::nth_element(widths.begin(), widths.begin() + widths.size() / 2, widths.end());
    road_width = widths[widths.size() / 2] * res;
  }
  const double threshold = 1.5 * road_width;
  std::vector<char> pass(h.size(), 0);
  for (std::size_t i = 0; i < h.size(); ++i) {
    pass[i] = h[i] * res > threshold && v[i] * res > threshold;
  }
  // Keep the largest 4-connected blob of passing cells.
  std::vector<char> seen(h.size(), 0);
  std::vector<CellIndex> best;
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) {
      const std::size_t f = static_cast<std::size_t>(r) * g.width() + c;
      if (!pass[f] || seen[f]) continue;
      std::vector<CellIndex> blob;
      std::deque<CellIndex> q{{r, c}};
      seen[f] = 1;
      while (!q.empty()) {
        const CellIndex cur = q.front();
        q.pop_front();
        blob.push_back(cur);
        constexpr int dr[4] = {1, -1, 0, 0};
        constexpr int dc[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const CellIndex nb{cur.row + dr[k], cur.col + dc[k]};
          if (!g.contains(nb)) continue;
          const std::size_t nf = static_cast<std::size_t>(nb.row) * g.width() + nb.col;
          if (!pass[nf] || seen[nf]) continue;
          seen[nf] = 1;
          q.push_back(nb);
        }
      }
      if (blob.size() > best.size()) best = std::move(blob);
    }
  }
  if (best.empty()) return std::nullopt;
  int rmin = best[0].row, rmax = best[0].row, cmin = best[0].col, cmax = best[0].col;
  for (const auto& x : best) {
    rmin = std::min(rmin, x.row);
    rmax = std::max(rmax, x.row);
    cmin = std::min(cmin, x.col);
    cmax = std::max(cmax, x.col);
  }
  const Box lo = g.cell_box({rmin, cmin});
  const Box hi = g.cell_box({rmax, cmax});
  return Polygon::rectangle(lo.min.x, lo.min.y, hi.max.x, hi.max.y);
}

std::optional<Polygon> detect_intersection_core(const BevGrid& g, int min_component_cells) {
  const auto comps = extract_crosswalks(g, min_component_cells);
  if (comps.size() >= 2) return core_from_crosswalks(comps);
  return detect_core_by_kernel(g);
}

double polygon_iou(const Polygon& a, const Polygon& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

void write_pgm(const BevGrid& g, std::ostream& out) {
  out << "P5\n" << g.width() << ' ' << g.height() << "\n255\n";
  std::vector<char> row(static_cast<std::size_t>(g.width()));
  for (int r = g.height() - 1; r >= 0; --r) {
    for (int c = 0; c < g.width(); ++c) {
      row[c] = static_cast<char>(static_cast<unsigned char>(class_id(g.at({r, c}).cls) * 42));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

void write_csv(const BevGrid& g, std::ostream& out) {
  out << "row,col,class_id,total_votes\n";
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) {
      const auto& cell = g.at({r, c});
      out << r << ',' << c << ',' << class_id(cell.cls) << ',' << roadsr::total_votes(cell.votes) << '\n';
    }
  }
}

}  // namespace roadsr
