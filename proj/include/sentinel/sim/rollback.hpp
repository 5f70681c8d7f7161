#pragma once

// Closed-loop return to a safe checkpoint in a synthetic world.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sentinel/deviation_detector.hpp"
#include "sentinel/errors.hpp"
#include "sentinel/sim/apf.hpp"
#include "sentinel/sim/costmap.hpp"
#include "sentinel/sim/kinematics.hpp"
#include "sentinel/sim/rewards.hpp"
#include "sentinel/sim/smoother.hpp"
#include "sentinel/sim/world.hpp"

namespace sentinel::sim {

enum class RecoveryStatus { Success, Collision, Stall, Timeout };

inline std::string to_string(RecoveryStatus s) {
  switch (s) {
    case RecoveryStatus::Success: return "success";
    case RecoveryStatus::Collision: return "collision";
    case RecoveryStatus::Stall: return "stall";
    case RecoveryStatus::Timeout: return "timeout";
  }
  return "unknown";
}

struct TrajectoryPoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
  double omega = 0.0;
};

struct RollbackConfig {
  KinematicParams kinematics;
  SmootherConfig smoother;
  ApfConfig apf;
  RangeSensor sensor;
  IngestFilter filter;
  RobotBody body;
  ProbeConfig probes;
  Integration integration = Integration::ExactArc;
  double goalTolerance = 0.5;
  double stallRadius = 0.2;
  double stallTime = 3.0;
};

struct RecoveryOutcome {
  RecoveryStatus status = RecoveryStatus::Timeout;
  std::vector<TrajectoryPoint> trajectory;
  double elapsed = 0.0;
  double pathLength = 0.0;
  double finalDistance = 0.0;
  double finalHeadingError = 0.0;  // robot heading minus checkpoint heading
  double totalReward = 0.0;
  std::size_t stalledCommands = 0;
  CostmapGrid finalCostmap;
};

// Drives from `start` back to within goalTolerance of the checkpoint position.
// Each 0.1 s cycle: warp the previous costmap by the ego-motion, decay it,
// ingest a fresh scan, inflate, then command, smooth and integrate. Collision
// is checked before success so touching an obstacle never counts as arrival.
inline RecoveryOutcome run_rollback(double goalX, double goalY, double goalTheta, RobotState start,
                                    const World& world, double budget, const RollbackConfig& cfg = {}) {
  if (!std::isfinite(goalX) || !std::isfinite(goalY)) throw InputError("goal pose is not finite");
  if (!world.bounds.contains(goalX, goalY)) throw InputError("goal pose lies outside the world bounds");

  RecoveryOutcome out;
  const double dt = cfg.kinematics.dt;
  RobotState s = start;
  RobotState prevState = s;
  CostmapGrid base;
  CostmapGrid scratch;
  CostmapGrid inflated;
  std::vector<Point3> scan;
  scan.reserve(static_cast<std::size_t>(cfg.sensor.rays));
  Twist cmd{s.v, s.omega};

  double anchorX = s.x;
  double anchorY = s.y;
  double anchorT = 0.0;
  double t = 0.0;

  auto context = [&](double displacement, double stall, bool collided) {
    const ProbeReading probe = probe_costmap(inflated, cfg.probes);
    RewardContext c;
    c.goalDistance = std::hypot(goalX - s.x, goalY - s.y);
    c.headingError = normalize_angle(std::atan2(goalY - s.y, goalX - s.x) - s.theta);
    c.vx = s.v;
    c.omega = s.omega;
    c.corridorDistance = probe.corridorDistance;
    c.tauLeft = probe.tauLeft;
    c.tauRight = probe.tauRight;
    c.displacement = displacement;
    c.stallTime = stall;
    c.collision = collided;
    return c;
  };

  out.trajectory.push_back({t, s.x, s.y, s.theta, s.v, s.omega});
  RewardContext prevCtx = context(0.0, 0.0, false);
  bool first = true;

  for (;;) {
    if (robot_collides(world, s, cfg.body)) {
      out.status = RecoveryStatus::Collision;
      break;
    }
    if (std::hypot(goalX - s.x, goalY - s.y) < cfg.goalTolerance) {
      out.status = RecoveryStatus::Success;
      break;
    }
    if (t - anchorT > cfg.stallTime) {
      out.status = RecoveryStatus::Stall;
      break;
    }
    if (t >= budget - 1e-9) {
      out.status = RecoveryStatus::Timeout;
      break;
    }

    if (!first) {
      const double c = std::cos(prevState.theta);
      const double sn = std::sin(prevState.theta);
      const double wx = s.x - prevState.x;
      const double wy = s.y - prevState.y;
      warp_into(base, scratch, {c * wx + sn * wy, -sn * wx + c * wy, normalize_angle(s.theta - prevState.theta)});
      std::swap(base, scratch);
      decay_in_place(base);
    }
    first = false;
    synthesize_scan(world, s, cfg.sensor, scan);
    ingest_in_place(base, scan, cfg.filter);
    inflate_into(base, inflated);

    const ApfCommand target = apf_command(s, goalX, goalY, inflated, cfg.apf);
    if (target.stalled) ++out.stalledCommands;
    cmd = smooth_action(cmd, target.twist, cfg.smoother, dt);

    prevState = s;
    s = integrate_kinematics(s, cmd.v, cmd.omega, dt, cfg.integration);
    t += dt;
    const double step = std::hypot(s.x - prevState.x, s.y - prevState.y);
    out.pathLength += step;
    if (std::hypot(s.x - anchorX, s.y - anchorY) >= cfg.stallRadius) {
      anchorX = s.x;
      anchorY = s.y;
      anchorT = t;
    }
    out.trajectory.push_back({t, s.x, s.y, s.theta, s.v, s.omega});

    const RewardContext ctx = context(step, t - anchorT, robot_collides(world, s, cfg.body));
    out.totalReward += reward_components(prevCtx, ctx).total();
    prevCtx = ctx;
  }

  out.elapsed = t;
  out.finalDistance = std::hypot(goalX - s.x, goalY - s.y);
  out.finalHeadingError = normalize_angle(s.theta - goalTheta);
  out.finalCostmap = base;
  return out;
}

inline RecoveryOutcome run_rollback(const SafeCheckpoint& checkpoint, RobotState start, const World& world,
                                    double budget, const RollbackConfig& cfg = {}) {
  return run_rollback(checkpoint.pose.x, checkpoint.pose.y, checkpoint.pose.theta, start, world, budget, cfg);
}

inline void write_trajectory_csv(std::ostream& out, const RecoveryOutcome& r) {
  out << "t,x,y,theta,v,omega,outcome\n";
  char buf[160];
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
    const auto& p = r.trajectory[i];
    std::snprintf(buf, sizeof buf, "%.2f,%.6f,%.6f,%.6f,%.6f,%.6f,", p.t, p.x, p.y, p.theta, p.v, p.omega);
    out << buf << (i + 1 == r.trajectory.size() ? to_string(r.status) : std::string()) << '\n';
  }
}

}  // namespace sentinel::sim
