#pragma once

#include <algorithm>
#include <cmath>

#include "sentinel/sim/kinematics.hpp"

namespace sentinel::sim {

struct SmootherConfig {
  double vMax = 0.5;      // m/s
  double wMax = 0.5;      // rad/s
  double aMax = 1.0;      // m/s^2
  double aMaxW = 5.0;     // rad/s^2
  double deadzone = 0.02;
};

namespace detail {

inline double smooth_axis(double prev, double target, double limit, double accel, double deadzone,
                          double dt) {
  const double saturated = std::clamp(target, -limit, limit);
  const double a = std::clamp((saturated - prev) / dt, -accel, accel);
  const double out = prev + a * dt;
  // Zeroing a sub-threshold output must not itself break the acceleration
  // bound, so it only applies when the stop is reachable this period.
  if (std::abs(out) < deadzone && std::abs(prev) <= accel * dt + 1e-12) return 0.0;
  return out;
}

}  // namespace detail

// Saturation, symmetric acceleration clamping, then deadzone suppression.
inline Twist smooth_action(const Twist& prev, const Twist& target, const SmootherConfig& cfg = {},
                           double dt = 0.1) {
  return {detail::smooth_axis(prev.v, target.v, cfg.vMax, cfg.aMax, cfg.deadzone, dt),
          detail::smooth_axis(prev.omega, target.omega, cfg.wMax, cfg.aMaxW, cfg.deadzone, dt)};
}

}  // namespace sentinel::sim
