#pragma once

// Robot-centred rolling occupancy grid. Cell (row, col) covers
// x in [(col-64)*res, (col-63)*res), y in [(row-64)*res, (row-63)*res), with
// +x forward and +y to the left.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

namespace sentinel::sim {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct EgoMotion {
  double dx = 0.0;      // translation in the previous robot frame
  double dy = 0.0;
  double dtheta = 0.0;
};

struct Footprint {
  double length = 1.10;
  double width = 0.80;
};

struct IngestFilter {
  double zMin = 0.1;
  double zMax = 1.0;
  Footprint selfMask;
};

class CostmapGrid {
 public:
  static constexpr int kSize = 128;
  static constexpr int kCenter = kSize / 2;

  explicit CostmapGrid(double resolution = 0.05, double decay = 0.9)
      : resolution_(resolution), decay_(decay), cells_(kSize * kSize, 0.0) {}

  double resolution() const { return resolution_; }
  double decay_factor() const { return decay_; }

  double& at(int row, int col) { return cells_[static_cast<std::size_t>(row * kSize + col)]; }
  double at(int row, int col) const { return cells_[static_cast<std::size_t>(row * kSize + col)]; }

  static bool in_bounds(int row, int col) { return row >= 0 && row < kSize && col >= 0 && col < kSize; }

  std::optional<std::pair<int, int>> cell_of(double x, double y) const {
    const int col = static_cast<int>(std::floor(x / resolution_)) + kCenter;
    const int row = static_cast<int>(std::floor(y / resolution_)) + kCenter;
    if (!in_bounds(row, col)) return std::nullopt;
    return std::pair{row, col};
  }

  double center_x(int col) const { return (col - kCenter + 0.5) * resolution_; }
  double center_y(int row) const { return (row - kCenter + 0.5) * resolution_; }

  std::span<double> cells() { return cells_; }
  std::span<const double> cells() const { return cells_; }

  void clear() { std::fill(cells_.begin(), cells_.end(), 0.0); }

  bool operator==(const CostmapGrid&) const = default;

 private:
  double resolution_;
  double decay_;
  std::vector<double> cells_;
};

inline void ingest_in_place(CostmapGrid& grid, std::span<const Point3> points, const IngestFilter& f = {}) {
  const double hx = f.selfMask.length / 2.0;
  const double hy = f.selfMask.width / 2.0;
  for (const auto& p : points) {
    if (!(p.z >= f.zMin && p.z <= f.zMax)) continue;
    if (std::abs(p.x) <= hx && std::abs(p.y) <= hy) continue;
    if (auto c = grid.cell_of(p.x, p.y)) grid.at(c->first, c->second) = 1.0;
  }
}

inline CostmapGrid costmap_ingest(CostmapGrid grid, std::span<const Point3> points, const IngestFilter& f = {}) {
  ingest_in_place(grid, points, f);
  return grid;
}

// Bilinear read at fractional cell coordinates (u along columns, v along rows,
// integers at cell centres). Samples outside the grid read as zero.
inline double sample_bilinear(const CostmapGrid& g, double u, double v) {
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  if (fu < -1.0 || fv < -1.0 || fu >= CostmapGrid::kSize || fv >= CostmapGrid::kSize) return 0.0;
  const int c0 = static_cast<int>(fu);
  const int r0 = static_cast<int>(fv);
  const double a = u - fu;
  const double b = v - fv;
  auto cell = [&](int r, int c) { return CostmapGrid::in_bounds(r, c) ? g.at(r, c) : 0.0; };
  return (1.0 - b) * ((1.0 - a) * cell(r0, c0) + a * cell(r0, c0 + 1)) +
         b * ((1.0 - a) * cell(r0 + 1, c0) + a * cell(r0 + 1, c0 + 1));
}

// Re-expresses `src` in the robot frame after the ego-motion: the new cell
// centred at p samples the old grid at R(dtheta) p + (dx, dy).
inline void warp_into(const CostmapGrid& src, CostmapGrid& dst, const EgoMotion& m) {
  const double res = src.resolution();
  const double c = std::cos(m.dtheta);
  const double s = std::sin(m.dtheta);
  const double half = CostmapGrid::kCenter - 0.5;
  for (int row = 0; row < CostmapGrid::kSize; ++row) {
    const double py = src.center_y(row);
    for (int col = 0; col < CostmapGrid::kSize; ++col) {
      const double px = src.center_x(col);
      const double ox = c * px - s * py + m.dx;
      const double oy = s * px + c * py + m.dy;
      dst.at(row, col) = sample_bilinear(src, ox / res + half, oy / res + half);
    }
  }
}

inline CostmapGrid costmap_warp(const CostmapGrid& grid, const EgoMotion& m) {
  CostmapGrid out(grid.resolution(), grid.decay_factor());
  warp_into(grid, out, m);
  return out;
}

inline void decay_in_place(CostmapGrid& grid) {
  for (auto& v : grid.cells()) v *= grid.decay_factor();
}

inline CostmapGrid costmap_decay(CostmapGrid grid) {
  decay_in_place(grid);
  return grid;
}

// 3x3 window maximum; border cells use only their in-bounds neighbours.
// Done as a row pass then a column pass, which yields the same maximum.
inline void inflate_into(const CostmapGrid& src, CostmapGrid& dst) {
  constexpr int n = CostmapGrid::kSize;
  std::array<double, n * n> tmp{};
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double m = src.at(r, c);
      if (c > 0) m = std::max(m, src.at(r, c - 1));
      if (c + 1 < n) m = std::max(m, src.at(r, c + 1));
      tmp[static_cast<std::size_t>(r * n + c)] = m;
    }
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double m = tmp[static_cast<std::size_t>(r * n + c)];
      if (r > 0) m = std::max(m, tmp[static_cast<std::size_t>((r - 1) * n + c)]);
      if (r + 1 < n) m = std::max(m, tmp[static_cast<std::size_t>((r + 1) * n + c)]);
      dst.at(r, c) = m;
    }
  }
}

inline CostmapGrid costmap_inflate(const CostmapGrid& grid) {
  CostmapGrid out(grid.resolution(), grid.decay_factor());
  inflate_into(grid, out);
  return out;
}

// Binary PGM, row 0 at the bottom so +y points up in viewers.
inline void write_pgm(std::ostream& out, const CostmapGrid& grid) {
  constexpr int n = CostmapGrid::kSize;
  out << "P5\n" << n << ' ' << n << "\n255\n";
  std::vector<char> line(n);
  for (int r = n - 1; r >= 0; --r) {
    for (int c = 0; c < n; ++c) {
      const double v = std::clamp(grid.at(r, c), 0.0, 1.0);
      line[static_cast<std::size_t>(c)] = static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
    out.write(line.data(), n);
  }
}

}  // namespace sentinel::sim
