#pragma once

// Dense reward terms for a recovery step, plus the costmap probes that feed
// the corridor and tightness inputs.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sentinel/sim/costmap.hpp"

namespace sentinel::sim {

struct RewardContext {
  double goalDistance = 0.0;      // d_t
  double headingError = 0.0;      // psi_err, radians
  double vx = 0.0;
  double omega = 0.0;
  double corridorDistance = 3.13; // d_corridor
  double tauLeft = 0.0;
  double tauRight = 0.0;
  double displacement = 0.0;      // path length covered this step
  double stallTime = 0.0;         // seconds without leaving the stall radius
  bool collision = false;

  double tau_side() const { return std::max(tauLeft, tauRight); }
  bool blocked() const { return corridorDistance < 0.8; }
};

struct RewardBreakdown {
  double goal = 0.0;
  double success = 0.0;
  double time = 0.0;
  double velocity = 0.0;
  double heading = 0.0;
  double yaw = 0.0;
  double move = 0.0;
  double collision = 0.0;
  double danger = 0.0;
  double angular = 0.0;
  double centering = 0.0;
  double stall = 0.0;

  double total() const {
    return goal + success + time + velocity + heading + yaw + move + collision + danger + angular + centering +
           stall;
  }
};

inline RewardBreakdown reward_components(const RewardContext& prev, const RewardContext& next) {
  RewardBreakdown r;
  const double blk = next.blocked() ? 1.0 : 0.0;
  const double tau = next.tau_side();
  const double speed = std::clamp(next.corridorDistance / 2.0, 0.0, 1.0);

  r.goal = 100.0 * (std::exp(-0.25 * next.goalDistance) - std::exp(-0.25 * prev.goalDistance));
  r.success = next.goalDistance < 0.5 ? 20.0 : 0.0;
  r.time = -0.05;
  r.velocity = 3.0 * next.vx * std::cos(next.headingError) * (1.0 - 0.85 * tau) * speed * (1.0 - blk);
  r.heading = (1.0 - std::abs(next.headingError) / std::numbers::pi) * (std::abs(next.vx) > 0.1 ? 1.0 : 0.0) *
              (1.0 - blk);
  r.yaw = 2.0 * (std::abs(prev.headingError) - std::abs(next.headingError));
  r.move = 0.2 * std::tanh(next.displacement / 0.03);
  r.collision = next.collision ? -30.0 : 0.0;
  const double closeness = 1.0 - std::clamp(next.corridorDistance / 3.13, 0.0, 1.0);
  r.danger = -3.0 * closeness * closeness;
  r.angular = -0.3 * std::abs(next.omega) * (1.0 - tau) * (1.0 - blk);
  r.centering = 2.5 * (next.tauRight - next.tauLeft) * next.omega;
  const double over = std::max(next.stallTime - 1.0, 0.0);
  r.stall = std::max(-0.5 * over * over, -2.0);
  return r;
}

struct ProbeConfig {
  double corridorWidth = 0.90;  // robot width
  double corridorDepth = 3.13;
  double bodyHalfLength = 0.53;
  double lateralReach = 1.0;
  double occupied = 0.5;
};

struct ProbeReading {
  double corridorDistance = 3.13;
  double tauLeft = 0.0;
  double tauRight = 0.0;
};

// Forward corridor: cells ahead of the robot centre within half the robot
// width laterally. Lateral probes: beside the body, out to lateralReach past
// the robot's side; tightness falls linearly from 1 at contact to 0.
inline ProbeReading probe_costmap(const CostmapGrid& inflated, const ProbeConfig& cfg = {}) {
  ProbeReading out;
  out.corridorDistance = cfg.corridorDepth;
  const double halfW = cfg.corridorWidth / 2.0;
  double leftGap = cfg.lateralReach;
  double rightGap = cfg.lateralReach;
  for (int row = 0; row < CostmapGrid::kSize; ++row) {
    const double y = inflated.center_y(row);
    for (int col = 0; col < CostmapGrid::kSize; ++col) {
      if (inflated.at(row, col) < cfg.occupied) continue;
      const double x = inflated.center_x(col);
      if (std::abs(y) <= halfW && x >= 0.0 && x <= cfg.corridorDepth) {
        out.corridorDistance = std::min(out.corridorDistance, x);
      }
      if (std::abs(x) <= cfg.bodyHalfLength && std::abs(y) > halfW && std::abs(y) <= halfW + cfg.lateralReach) {
        double& gap = y > 0.0 ? leftGap : rightGap;
        gap = std::min(gap, std::abs(y) - halfW);
      }
    }
  }
  out.tauLeft = 1.0 - std::clamp(leftGap / cfg.lateralReach, 0.0, 1.0);
  out.tauRight = 1.0 - std::clamp(rightGap / cfg.lateralReach, 0.0, 1.0);
  return out;
}

}  // namespace sentinel::sim
