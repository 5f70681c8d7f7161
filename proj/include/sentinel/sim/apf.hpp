#pragma once

// Artificial potential field controller over the robot-centred costmap.

#include <algorithm>
#include <cmath>

#include "sentinel/sim/costmap.hpp"
#include "sentinel/sim/kinematics.hpp"
#include "sentinel/sim/smoother.hpp"

namespace sentinel::sim {

struct ApfConfig {
  double attractiveGain = 1.0;
  double repulsiveGain = 0.5;
  double influenceRadius = 1.5;   // measured from the robot's side
  double bodyRadius = 0.45;       // subtracted from cell distance
  double minDistance = 0.05;
  double cellThreshold = 0.05;    // decayed ghosts below this are ignored
  double headingGain = 1.5;
  double stallForce = 0.02;       // net force below this is a local minimum
  SmootherConfig limits;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  double norm() const { return std::hypot(x, y); }
};

struct ApfForces {
  Vec2 attractive;
  Vec2 repulsive;
  Vec2 net() const { return {attractive.x + repulsive.x, attractive.y + repulsive.y}; }
};

struct ApfCommand {
  Twist twist;
  bool stalled = false;
};

// goal is given in the robot frame. Attraction is linear in distance up to
// 1 m and constant-magnitude beyond. Each occupied cell pushes away with the
// classic (1/d - 1/d0)/d^2 profile, weighted by its value and the cell size so
// the total does not depend on resolution.
inline ApfForces apf_forces(double goalX, double goalY, const CostmapGrid& grid, const ApfConfig& cfg = {}) {
  ApfForces f;
  const double gd = std::hypot(goalX, goalY);
  const double scale = gd > 1.0 ? cfg.attractiveGain / gd : cfg.attractiveGain;
  f.attractive = {goalX * scale, goalY * scale};

  const double reach = cfg.influenceRadius + cfg.bodyRadius;
  const double res = grid.resolution();
  const int span = static_cast<int>(std::ceil(reach / res)) + 1;
  const int lo = std::max(0, CostmapGrid::kCenter - span);
  const int hi = std::min(CostmapGrid::kSize - 1, CostmapGrid::kCenter + span);
  for (int row = lo; row <= hi; ++row) {
    const double y = grid.center_y(row);
    for (int col = lo; col <= hi; ++col) {
      const double w = grid.at(row, col);
      if (w < cfg.cellThreshold) continue;
      const double x = grid.center_x(col);
      const double d = std::hypot(x, y);
      const double clear = std::max(d - cfg.bodyRadius, cfg.minDistance);
      if (clear >= cfg.influenceRadius || d <= 0.0) continue;
      const double mag = cfg.repulsiveGain * w * res * (1.0 / clear - 1.0 / cfg.influenceRadius) / (clear * clear);
      f.repulsive.x -= mag * x / d;
      f.repulsive.y -= mag * y / d;
    }
  }
  return f;
}

// Steers toward the net force direction: angular rate proportional to the
// bearing, forward speed fading to zero as the bearing approaches pi.
inline ApfCommand apf_command(const RobotState& s, double goalX, double goalY, const CostmapGrid& grid,
                              const ApfConfig& cfg = {}) {
  const double dx = goalX - s.x;
  const double dy = goalY - s.y;
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  const ApfForces f = apf_forces(c * dx + sn * dy, -sn * dx + c * dy, grid, cfg);
  const Vec2 net = f.net();
  ApfCommand out;
  if (net.norm() < cfg.stallForce) {
    out.stalled = true;
    return out;
  }
  const double bearing = std::atan2(net.y, net.x);
  out.twist.omega = std::clamp(cfg.headingGain * bearing, -cfg.limits.wMax, cfg.limits.wMax);
  out.twist.v = cfg.limits.vMax * (1.0 + std::cos(bearing)) / 2.0;
  return out;
}

}  // namespace sentinel::sim
