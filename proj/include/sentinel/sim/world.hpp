#pragma once

// Planar obstacle worlds: circles and axis-aligned boxes inside rectangular
// bounds that act as walls. Provides range synthesis, footprint collision and
// a seeded generator for recovery scenarios.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "sentinel/errors.hpp"
#include "sentinel/sim/costmap.hpp"
#include "sentinel/sim/kinematics.hpp"

namespace sentinel::sim {

struct Circle {
  double x = 0.0;
  double y = 0.0;
  double r = 0.0;
};

struct Box {
  double minX = 0.0;
  double minY = 0.0;
  double maxX = 0.0;
  double maxY = 0.0;
};

struct Bounds {
  double minX = -10.0;
  double minY = -10.0;
  double maxX = 10.0;
  double maxY = 10.0;

  bool contains(double x, double y) const { return x >= minX && x <= maxX && y >= minY && y <= maxY; }
};

struct World {
  std::vector<Circle> circles;
  std::vector<Box> boxes;
  Bounds bounds;
  double minClearance = 2.0;
};

// Robot body used for collision tests (base frame at the centre).
struct RobotBody {
  double length = 1.06;
  double width = 0.90;
};

struct RangeSensor {
  int rays = 360;
  double height = 0.63;
  double maxRange = 10.0;
};

namespace world_detail {

inline double ray_circle(double ox, double oy, double dx, double dy, const Circle& c) {
  const double fx = ox - c.x;
  const double fy = oy - c.y;
  const double b = fx * dx + fy * dy;
  const double cc = fx * fx + fy * fy - c.r * c.r;
  const double disc = b * b - cc;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double sq = std::sqrt(disc);
  const double t0 = -b - sq;
  if (t0 >= 0.0) return t0;
  if (-b + sq >= 0.0) return 0.0;  // origin inside
  return std::numeric_limits<double>::infinity();
}

// Slab test; returns entry distance (0 when starting inside).
inline double ray_box(double ox, double oy, double dx, double dy, const Box& b) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  const double o[2] = {ox, oy};
  const double d[2] = {dx, dy};
  const double lo[2] = {b.minX, b.minY};
  const double hi[2] = {b.maxX, b.maxY};
  for (int a = 0; a < 2; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t1 = (lo[a] - o[a]) / d[a];
    double t2 = (hi[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
  }
  if (tmax < tmin || tmax < 0.0) return std::numeric_limits<double>::infinity();
  return std::max(tmin, 0.0);
}

// Exit distance from inside the bounds rectangle.
inline double ray_bounds(double ox, double oy, double dx, double dy, const Bounds& b) {
  double t = std::numeric_limits<double>::infinity();
  if (dx > 1e-15) t = std::min(t, (b.maxX - ox) / dx);
  if (dx < -1e-15) t = std::min(t, (b.minX - ox) / dx);
  if (dy > 1e-15) t = std::min(t, (b.maxY - oy) / dy);
  if (dy < -1e-15) t = std::min(t, (b.minY - oy) / dy);
  return std::max(t, 0.0);
}

inline double point_box_distance(double x, double y, const Box& b) {
  const double dx = std::max({b.minX - x, 0.0, x - b.maxX});
  const double dy = std::max({b.minY - y, 0.0, y - b.maxY});
  return std::hypot(dx, dy);
}

inline double box_box_gap(const Box& a, const Box& b) {
  const double dx = std::max({a.minX - b.maxX, 0.0, b.minX - a.maxX});
  const double dy = std::max({a.minY - b.maxY, 0.0, b.minY - a.maxY});
  return std::hypot(dx, dy);
}

}  // namespace world_detail

inline double ray_cast(const World& w, double x, double y, double angle, double maxRange) {
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  double t = world_detail::ray_bounds(x, y, dx, dy, w.bounds);
  for (const auto& c : w.circles) t = std::min(t, world_detail::ray_circle(x, y, dx, dy, c));
  for (const auto& b : w.boxes) t = std::min(t, world_detail::ray_box(x, y, dx, dy, b));
  return std::min(t, maxRange);
}

// Range returns in the robot frame. Rays that reach maxRange report nothing.
inline void synthesize_scan(const World& w, const RobotState& s, const RangeSensor& sensor,
                            std::vector<Point3>& out) {
  out.clear();
  const double step = 2.0 * std::numbers::pi / sensor.rays;
  for (int i = 0; i < sensor.rays; ++i) {
    const double local = i * step;
    const double d = ray_cast(w, s.x, s.y, s.theta + local, sensor.maxRange);
    if (d >= sensor.maxRange) continue;
    out.push_back({d * std::cos(local), d * std::sin(local), sensor.height});
  }
}

// Distance from a point to the nearest obstacle surface or bound wall.
inline double clearance_at(const World& w, double x, double y) {
  double d = std::min({x - w.bounds.minX, w.bounds.maxX - x, y - w.bounds.minY, w.bounds.maxY - y});
  for (const auto& c : w.circles) d = std::min(d, std::hypot(x - c.x, y - c.y) - c.r);
  for (const auto& b : w.boxes) d = std::min(d, world_detail::point_box_distance(x, y, b));
  return d;
}

inline bool point_in_obstacle(const World& w, double x, double y) {
  for (const auto& c : w.circles) {
    if (std::hypot(x - c.x, y - c.y) <= c.r) return true;
  }
  for (const auto& b : w.boxes) {
    if (x >= b.minX && x <= b.maxX && y >= b.minY && y <= b.maxY) return true;
  }
  return false;
}

// Oriented robot rectangle against every obstacle and the bounds.
inline bool robot_collides(const World& w, const RobotState& s, const RobotBody& body = {}) {
  const double hx = body.length / 2.0;
  const double hy = body.width / 2.0;
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  const double corners[4][2] = {{hx, hy}, {hx, -hy}, {-hx, -hy}, {-hx, hy}};
  double wx[4];
  double wy[4];
  for (int i = 0; i < 4; ++i) {
    wx[i] = s.x + c * corners[i][0] - sn * corners[i][1];
    wy[i] = s.y + sn * corners[i][0] + c * corners[i][1];
    if (!w.bounds.contains(wx[i], wy[i])) return true;
  }
  for (const auto& o : w.circles) {
    const double lx = c * (o.x - s.x) + sn * (o.y - s.y);
    const double ly = -sn * (o.x - s.x) + c * (o.y - s.y);
    const double qx = std::clamp(lx, -hx, hx);
    const double qy = std::clamp(ly, -hy, hy);
    if (std::hypot(lx - qx, ly - qy) <= o.r) return true;
  }
  // Separating axes: the box's two world axes and the robot's two axes.
  for (const auto& b : w.boxes) {
    const double rminX = *std::min_element(wx, wx + 4);
    const double rmaxX = *std::max_element(wx, wx + 4);
    const double rminY = *std::min_element(wy, wy + 4);
    const double rmaxY = *std::max_element(wy, wy + 4);
    if (rmaxX < b.minX || rminX > b.maxX || rmaxY < b.minY || rminY > b.maxY) continue;
    const double bx[4] = {b.minX, b.maxX, b.maxX, b.minX};
    const double by[4] = {b.minY, b.minY, b.maxY, b.maxY};
    bool separated = false;
    const double axes[2][2] = {{c, sn}, {-sn, c}};
    const double half[2] = {hx, hy};
    for (int a = 0; a < 2 && !separated; ++a) {
      const double centre = axes[a][0] * s.x + axes[a][1] * s.y;
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (int i = 0; i < 4; ++i) {
        const double p = axes[a][0] * bx[i] + axes[a][1] * by[i];
        lo = std::min(lo, p);
        hi = std::max(hi, p);
      }
      if (hi < centre - half[a] || lo > centre + half[a]) separated = true;
    }
    if (!separated) return true;
  }
  return false;
}

struct WorldGenConfig {
  double size = 16.0;           // square arena side
  int cylinders = 10;
  int walls = 6;
  double cylinderRadius = 0.25;
  double wallLength = 1.5;
  double wallThickness = 0.75;
  double minClearance = 2.0;    // gap between obstacle surfaces
  double spawnClearance = 1.5;  // free radius around start and checkpoint
  double minGoalDistance = 2.0;
  double maxGoalDistance = 5.0;
  int maxAttempts = 2000;
};

struct Scenario {
  World world;
  RobotState start;
  double goalX = 0.0;
  double goalY = 0.0;
};

// Reproducible from the seed alone: only the engine's raw output is used.
inline Scenario random_scenario(std::uint64_t seed, const WorldGenConfig& cfg = {}) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  Scenario sc;
  sc.world.bounds = {0.0, 0.0, cfg.size, cfg.size};
  sc.world.minClearance = cfg.minClearance;

  auto gap_ok_circle = [&](const Circle& c) {
    for (const auto& o : sc.world.circles) {
      if (std::hypot(c.x - o.x, c.y - o.y) - c.r - o.r < cfg.minClearance) return false;
    }
    for (const auto& b : sc.world.boxes) {
      if (world_detail::point_box_distance(c.x, c.y, b) - c.r < cfg.minClearance) return false;
    }
    return true;
  };
  auto gap_ok_box = [&](const Box& b) {
    for (const auto& o : sc.world.circles) {
      if (world_detail::point_box_distance(o.x, o.y, b) - o.r < cfg.minClearance) return false;
    }
    for (const auto& o : sc.world.boxes) {
      if (world_detail::box_box_gap(o, b) < cfg.minClearance) return false;
    }
    return true;
  };

  const double margin = 1.0;
  for (int i = 0, tries = 0; i < cfg.cylinders && tries < cfg.maxAttempts; ++tries) {
    Circle c{uni(margin, cfg.size - margin), uni(margin, cfg.size - margin), cfg.cylinderRadius};
    if (gap_ok_circle(c)) {
      sc.world.circles.push_back(c);
      ++i;
    }
  }
  for (int i = 0, tries = 0; i < cfg.walls && tries < cfg.maxAttempts; ++tries) {
    const bool alongX = (rng() & 1U) != 0;
    const double w = alongX ? cfg.wallLength : cfg.wallThickness;
    const double h = alongX ? cfg.wallThickness : cfg.wallLength;
    const double x = uni(margin, cfg.size - margin - w);
    const double y = uni(margin, cfg.size - margin - h);
    Box b{x, y, x + w, y + h};
    if (gap_ok_box(b)) {
      sc.world.boxes.push_back(b);
      ++i;
    }
  }

  for (int tries = 0;; ++tries) {
    if (tries >= cfg.maxAttempts) throw ConfigError("could not place start and checkpoint in generated world");
    const double sx = uni(0.0, cfg.size);
    const double sy = uni(0.0, cfg.size);
    if (clearance_at(sc.world, sx, sy) < cfg.spawnClearance) continue;
    const double dist = uni(cfg.minGoalDistance, cfg.maxGoalDistance);
    const double dir = uni(-std::numbers::pi, std::numbers::pi);
    const double gx = sx + dist * std::cos(dir);
    const double gy = sy + dist * std::sin(dir);
    if (!sc.world.bounds.contains(gx, gy) || clearance_at(sc.world, gx, gy) < cfg.spawnClearance) continue;
    sc.start = {sx, sy, normalize_angle(uni(-std::numbers::pi, std::numbers::pi)), 0.0, 0.0};
    sc.goalX = gx;
    sc.goalY = gy;
    return sc;
  }
}

}  // namespace sentinel::sim
