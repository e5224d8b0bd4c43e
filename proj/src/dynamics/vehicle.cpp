#include "evsim/dynamics/vehicle.hpp"

#include <cmath>
#include <string>

#include <Eigen/LU>

#include "evsim/common/error.hpp"

namespace evsim::dynamics {

namespace {

bool finite(double v) { return std::isfinite(v); }

Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

// Quaternion exponential of a pure rotation vector phi (rotation angle 2 * |phi|).
Quat exp_quat(const Vec3& phi) {
    const double angle = phi.norm();
    if (angle < 1e-12) {
        return Quat(1.0, phi.x(), phi.y(), phi.z()).normalized();
    }
    const Vec3 axis = phi / angle * std::sin(angle);
    return Quat(std::cos(angle), axis.x(), axis.y(), axis.z());
}

// Rows: thrust, roll torque, pitch torque, yaw torque; columns: rotor forces.
Eigen::Matrix4d mixer(const VehicleParams& params) {
    const double d = params.arm_length / std::sqrt(2.0);
    const double r = params.k_m / params.k_f;
    Eigen::Matrix4d m;
    m << 1.0, 1.0, 1.0, 1.0,
         -d, d, d, -d,
         -d, d, -d, d,
         -r, -r, r, r;
    return m;
}

}  // namespace

void VehicleParams::validate() const {
    if (!(mass > 0.0) || !(arm_length > 0.0) || !(k_f > 0.0)) {
        throw ValidationError("vehicle mass, arm length and k_f must be positive");
    }
    if (!(inertia.array() > 0.0).all()) {
        throw ValidationError("vehicle inertia components must be positive");
    }
    if (!(drag >= 0.0) || !(k_m >= 0.0)) {
        throw ValidationError("vehicle drag and k_m must be non-negative");
    }
    if (!finite(g)) {
        throw ValidationError("gravity must be finite");
    }
}

void VehicleState::validate() const {
    if (!p.allFinite() || !v.allFinite() || !w.allFinite() || !q.coeffs().allFinite()) {
        throw ValidationError("vehicle state has non-finite fields");
    }
    check_unit_quaternion(q, "vehicle state");
}

ControlCommand ControlCommand::hover(const VehicleParams& params) {
    ControlCommand c;
    c.mode = CommandMode::wrench;
    c.thrust = params.mass * params.g;
    return c;
}

Wrench rotor_to_wrench(const std::array<double, 4>& rotor_speeds, const VehicleParams& params) {
    Eigen::Vector4d f;
    for (int i = 0; i < 4; ++i) {
        const double w = rotor_speeds[static_cast<std::size_t>(i)];
        if (!(w >= 0.0) || !finite(w)) {
            throw ValidationError("rotor " + std::to_string(i) + " speed " + std::to_string(w) +
                                  " must be finite and non-negative");
        }
        f[i] = params.k_f * w * w;
    }
    const Eigen::Vector4d out = mixer(params) * f;
    // Yaw torque in the mixer is scaled by k_m / k_f; recompute from k_m directly for exactness.
    const double yaw = params.k_m * (-rotor_speeds[0] * rotor_speeds[0] - rotor_speeds[1] * rotor_speeds[1] +
                                     rotor_speeds[2] * rotor_speeds[2] + rotor_speeds[3] * rotor_speeds[3]);
    return Wrench{f.sum(), Vec3(out[1], out[2], yaw)};
}

std::array<double, 4> wrench_to_rotor_speeds(const Wrench& wrench, const VehicleParams& params) {
    const Eigen::Vector4d target(wrench.thrust, wrench.torque.x(), wrench.torque.y(), wrench.torque.z());
    const Eigen::Vector4d f = mixer(params).inverse() * target;
    std::array<double, 4> speeds{};
    for (int i = 0; i < 4; ++i) {
        speeds[static_cast<std::size_t>(i)] = f[i] > 0.0 ? std::sqrt(f[i] / params.k_f) : 0.0;
    }
    return speeds;
}

Wrench command_wrench(const ControlCommand& cmd, const VehicleParams& params) {
    if (cmd.mode == CommandMode::rotor_speeds) {
        return rotor_to_wrench(cmd.rotor_speeds, params);
    }
    if (!finite(cmd.thrust) || !cmd.torque.allFinite()) {
        throw ValidationError("wrench command must be finite");
    }
    return Wrench{cmd.thrust, cmd.torque};
}

Vec3 linear_acceleration(const VehicleState& state, const Wrench& wrench, const VehicleParams& params) {
    const Vec3 thrust_world = state.q.toRotationMatrix() * Vec3(0.0, 0.0, wrench.thrust);
    return (thrust_world + Vec3(0.0, 0.0, -params.mass * params.g) - params.drag * state.v) / params.mass;
}

VehicleState step_dynamics(const VehicleState& state, const Wrench& wrench, double dt, const VehicleParams& params) {
    if (!(dt > 0.0) || !finite(dt)) {
        throw ValidationError("dynamics step dt must be positive, got " + std::to_string(dt));
    }
    VehicleState next = state;
    const Vec3 a = linear_acceleration(state, wrench, params);
    next.v = state.v + a * dt;
    next.p = state.p + next.v * dt;

    const Vec3& I = params.inertia;
    const Vec3 wdot = (wrench.torque - state.w.cross(I.cwiseProduct(state.w))).cwiseQuotient(I);
    next.w = state.w + wdot * dt;
    next.q = (state.q * exp_quat(next.w * (dt / 2.0))).normalized();
    next.t = state.t + static_cast<Timestamp>(std::llround(dt * 1e6));

    if (!next.p.allFinite() || !next.v.allFinite() || !next.w.allFinite() || !next.q.coeffs().allFinite()) {
        throw IntegrationError("vehicle state became non-finite at t = " + std::to_string(state.t) + " us");
    }
    return next;
}

VehicleState step_dynamics(const VehicleState& state, const ControlCommand& cmd, double dt,
                           const VehicleParams& params) {
    return step_dynamics(state, command_wrench(cmd, params), dt, params);
}

ControlCommand se3_controller(const VehicleState& state, const TrajectoryRef& ref, const ControllerGains& gains,
                              const VehicleParams& params) {
    const Vec3 ep = ref.pos - state.p;
    const Vec3 ev = ref.vel - state.v;
    const Vec3 f_des = params.mass * (Vec3(0.0, 0.0, params.g) + ref.acc + gains.kp.cwiseProduct(ep) +
                                      gains.kv.cwiseProduct(ev));
    if (!(f_des.z() > 0.0)) {
        throw DomainError("desired force has non-positive vertical component; attitude is undefined");
    }
    const Mat3 R = state.q.toRotationMatrix();

    const Vec3 b3 = f_des.normalized();
    const Vec3 b1c(std::cos(ref.yaw), std::sin(ref.yaw), 0.0);
    const Vec3 b2 = b3.cross(b1c).normalized();
    const Vec3 b1 = b2.cross(b3);
    Mat3 Rd;
    Rd.col(0) = b1;
    Rd.col(1) = b2;
    Rd.col(2) = b3;

    const Vec3 e_R = 0.5 * vee(Rd.transpose() * R - R.transpose() * Rd);
    const Vec3 w_des(0.0, 0.0, ref.yaw_rate);
    const Vec3 e_w = state.w - R.transpose() * Rd * w_des;

    ControlCommand cmd;
    cmd.mode = CommandMode::wrench;
    cmd.thrust = f_des.dot(R.col(2));
    cmd.torque = -gains.kR.cwiseProduct(e_R) - gains.kw.cwiseProduct(e_w);
    cmd.t_cmd = state.t;
    return cmd;
}

ImuSampler::ImuSampler(const ImuNoise& noise, std::uint64_t seed, double g) : noise_(noise), g_(g), rng_(seed) {
    if (noise.std_accel < 0.0 || noise.std_gyro < 0.0 || noise.bias_std_accel < 0.0 || noise.bias_std_gyro < 0.0) {
        throw ValidationError("IMU noise standard deviations must be non-negative");
    }
    std::mt19937_64 bias_rng(noise.bias_seed);
    auto draw = [&](double sd) {
        Vec3 b = Vec3::Zero();
        if (sd > 0.0) {
            std::normal_distribution<double> n(0.0, sd);
            for (int i = 0; i < 3; ++i) b[i] = n(bias_rng);
        }
        return b;
    };
    accel_bias_ = draw(noise.bias_std_accel);
    gyro_bias_ = draw(noise.bias_std_gyro);
}

ImuSample ImuSampler::sample(const VehicleState& state, const Vec3& accel_world) {
    const Vec3 g_world(0.0, 0.0, -g_);
    ImuSample s;
    s.t = state.t;
    s.accel = state.q.toRotationMatrix().transpose() * (accel_world - g_world) + accel_bias_;
    s.gyro = state.w + gyro_bias_;
    if (noise_.std_accel > 0.0) {
        std::normal_distribution<double> n(0.0, noise_.std_accel);
        for (int i = 0; i < 3; ++i) s.accel[i] += n(rng_);
    }
    if (noise_.std_gyro > 0.0) {
        std::normal_distribution<double> n(0.0, noise_.std_gyro);
        for (int i = 0; i < 3; ++i) s.gyro[i] += n(rng_);
    }
    return s;
}

ImuSample sample_imu(const VehicleState& state, const Vec3& accel_world, const ImuNoise& noise, std::uint64_t seed,
                     double g) {
    ImuSampler sampler(noise, seed, g);
    return sampler.sample(state, accel_world);
}

}  // namespace evsim::dynamics
