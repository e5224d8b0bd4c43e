#pragma once

// Rigid-body quadrotor in a z-up world frame with body-frame angular velocity.
//
// Rotor layout (X configuration, d = arm_length / sqrt(2)):
//   rotor 0 at (+d, -d) spins CCW, rotor 1 at (-d, +d) spins CCW,
//   rotor 2 at (+d, +d) spins CW,  rotor 3 at (-d, -d) spins CW.
// A CCW rotor exerts -k_m * w^2 of yaw torque on the body, a CW rotor +k_m * w^2.

#include <array>
#include <cstdint>
#include <random>

#include "evsim/common/geometry.hpp"

namespace evsim::dynamics {

using Timestamp = std::uint64_t;  // microseconds

constexpr double kStandardGravity = 9.81;

struct VehicleParams {
    double mass = 0.5;
    Vec3 inertia = Vec3(2.5e-3, 2.5e-3, 4.5e-3);
    double arm_length = 0.17;
    double k_f = 1e-6;
    double k_m = 1.6e-8;
    double drag = 0.0;
    double g = kStandardGravity;

    void validate() const;
};

struct VehicleState {
    Vec3 p = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    Quat q = Quat::Identity();
    Vec3 w = Vec3::Zero();
    Timestamp t = 0;

    void validate() const;
};

enum class CommandMode : std::uint8_t { rotor_speeds = 0, wrench = 1 };

struct ControlCommand {
    CommandMode mode = CommandMode::wrench;
    std::array<double, 4> rotor_speeds{};
    double thrust = 0.0;
    Vec3 torque = Vec3::Zero();
    std::uint64_t step_id = 0;
    Timestamp t_cmd = 0;

    static ControlCommand hover(const VehicleParams& params);
};

struct Wrench {
    double thrust = 0.0;
    Vec3 torque = Vec3::Zero();
};

Wrench rotor_to_wrench(const std::array<double, 4>& rotor_speeds, const VehicleParams& params);

// Thrust and torque a command applies, converting rotor speeds when needed.
Wrench command_wrench(const ControlCommand& cmd, const VehicleParams& params);

// World-frame acceleration (g * e_down + R * (0, 0, thrust) / m - drag * v / m).
Vec3 linear_acceleration(const VehicleState& state, const Wrench& wrench, const VehicleParams& params);

// Semi-implicit Euler step of dt seconds; t advances by dt rounded to whole microseconds.
VehicleState step_dynamics(const VehicleState& state, const ControlCommand& cmd, double dt,
                           const VehicleParams& params);
VehicleState step_dynamics(const VehicleState& state, const Wrench& wrench, double dt, const VehicleParams& params);

struct ControllerGains {
    Vec3 kp = Vec3::Constant(16.0);
    Vec3 kv = Vec3::Constant(8.0);
    Vec3 kR = Vec3(0.25, 0.25, 0.15);
    Vec3 kw = Vec3(0.05, 0.05, 0.04);
};

struct TrajectoryRef {
    Vec3 pos = Vec3::Zero();
    Vec3 vel = Vec3::Zero();
    Vec3 acc = Vec3::Zero();
    double yaw = 0.0;
    double yaw_rate = 0.0;
};

// Geometric tracking controller; returns a wrench-mode command.
ControlCommand se3_controller(const VehicleState& state, const TrajectoryRef& ref, const ControllerGains& gains,
                              const VehicleParams& params);

// Mixer inverse: rotor speeds realizing a wrench, clamped at zero when the wrench is infeasible.
std::array<double, 4> wrench_to_rotor_speeds(const Wrench& wrench, const VehicleParams& params);

struct ImuNoise {
    double std_accel = 0.0;
    double std_gyro = 0.0;
    double bias_std_accel = 0.0;
    double bias_std_gyro = 0.0;
    std::uint64_t bias_seed = 0;
};

struct ImuSample {
    Vec3 accel = Vec3::Zero();
    Vec3 gyro = Vec3::Zero();
    Timestamp t = 0;
};

// Specific-force IMU with constant biases drawn once from bias_seed and white noise from seed.
class ImuSampler {
public:
    ImuSampler(const ImuNoise& noise, std::uint64_t seed, double g = kStandardGravity);

    ImuSample sample(const VehicleState& state, const Vec3& accel_world);

    const Vec3& accel_bias() const { return accel_bias_; }
    const Vec3& gyro_bias() const { return gyro_bias_; }

private:
    ImuNoise noise_;
    double g_;
    Vec3 accel_bias_ = Vec3::Zero();
    Vec3 gyro_bias_ = Vec3::Zero();
    std::mt19937_64 rng_;
};

ImuSample sample_imu(const VehicleState& state, const Vec3& accel_world, const ImuNoise& noise, std::uint64_t seed,
                     double g = kStandardGravity);

}  // namespace evsim::dynamics
