#pragma once

#include <cmath>

#include "sentinel/trace.hpp"

namespace sentinel::sim {

struct Twist {
  double v = 0.0;      // m/s
  double omega = 0.0;  // rad/s

  bool operator==(const Twist&) const = default;
};

struct RobotState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
  double omega = 0.0;
};

// Skid-steer chassis: wheel radius, wheelbase and control period.
struct KinematicParams {
  double wheelRadius = 0.165;
  double wheelbase = 0.582;
  double dt = 0.1;
};

struct WheelSpeeds {
  double left = 0.0;   // rad/s
  double right = 0.0;  // rad/s
};

inline WheelSpeeds wheel_speeds(double v, double omega, const KinematicParams& p = {}) {
  const double half = omega * p.wheelbase / 2.0;
  return {(v - half) / p.wheelRadius, (v + half) / p.wheelRadius};
}

inline Twist body_twist(const WheelSpeeds& w, const KinematicParams& p = {}) {
  return {p.wheelRadius * (w.left + w.right) / 2.0, p.wheelRadius * (w.right - w.left) / p.wheelbase};
}

enum class Integration { Euler, ExactArc };

// Advances the unicycle model by one period under a constant twist.
inline RobotState integrate_kinematics(RobotState s, double v, double omega, double dt,
                                       Integration mode = Integration::Euler) {
  if (mode == Integration::ExactArc && std::abs(omega) > 1e-9) {
    const double th1 = s.theta + omega * dt;
    s.x += v / omega * (std::sin(th1) - std::sin(s.theta));
    s.y -= v / omega * (std::cos(th1) - std::cos(s.theta));
  } else {
    s.x += v * std::cos(s.theta) * dt;
    s.y += v * std::sin(s.theta) * dt;
  }
  s.theta = normalize_angle(s.theta + omega * dt);
  s.v = v;
  s.omega = omega;
  return s;
}

}  // namespace sentinel::sim
