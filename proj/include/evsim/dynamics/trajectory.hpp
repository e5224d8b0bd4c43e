#pragma once

#include <array>
#include <variant>
#include <vector>

#include "evsim/dynamics/vehicle.hpp"

namespace evsim::dynamics {

struct HoverTrajectory {
    Vec3 position = Vec3::Zero();
    double yaw = 0.0;
};

// Rest-to-rest move from start to end with a quintic time scaling over `duration` seconds.
struct LineTrajectory {
    Vec3 start = Vec3::Zero();
    Vec3 end = Vec3::Zero();
    double duration = 1.0;
    double yaw = 0.0;
};

// Horizontal circle at the center's height; angle = omega * t + phase.
struct CircleTrajectory {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
    double omega = 1.0;
    double phase = 0.0;
    double yaw = 0.0;
};

// pos_i = center_i + amplitude_i * sin(omega_i * t + phase_i)
struct LissajousTrajectory {
    Vec3 center = Vec3::Zero();
    Vec3 amplitude = Vec3::Zero();
    Vec3 omega = Vec3::Zero();
    Vec3 phase = Vec3::Zero();
    double yaw = 0.0;
};

// Coefficients in ascending powers of the segment-local time for x, y, z and yaw.
struct PolynomialSegment {
    double duration = 1.0;
    std::array<std::vector<double>, 4> coeffs;
};

struct PolynomialTrajectory {
    std::vector<PolynomialSegment> segments;
};

using Trajectory =
    std::variant<HoverTrajectory, LineTrajectory, CircleTrajectory, LissajousTrajectory, PolynomialTrajectory>;

void validate_trajectory(const Trajectory& traj);

// Finite-domain trajectories clamp t to their endpoints and report zero velocity there.
TrajectoryRef eval_trajectory(const Trajectory& traj, double t);

}  // namespace evsim::dynamics
