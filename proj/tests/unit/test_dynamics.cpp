#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "evsim/common/error.hpp"
#include "evsim/dynamics/trajectory.hpp"
#include "evsim/dynamics/vehicle.hpp"

using namespace evsim;
using namespace evsim::dynamics;

namespace {

VehicleParams unit_params() {
    VehicleParams p;
    p.k_f = 1e-6;
    p.k_m = 1e-8;
    return p;
}

ControlCommand wrench_cmd(double thrust, const Vec3& torque = Vec3::Zero()) {
    ControlCommand c;
    c.mode = CommandMode::wrench;
    c.thrust = thrust;
    c.torque = torque;
    return c;
}

}  // namespace

TEST_CASE("rotor_to_wrench examples") {
    const VehicleParams p = unit_params();
    const Wrench all = rotor_to_wrench({1000, 1000, 1000, 1000}, p);
    CHECK(all.thrust == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(all.torque == Vec3::Zero());

    const Wrench none = rotor_to_wrench({0, 0, 0, 0}, p);
    CHECK(none.thrust == 0.0);
    CHECK(none.torque == Vec3::Zero());

    // Rotors 0 and 1 are a diagonal CCW pair, 2 and 3 a diagonal CW pair.
    const Wrench ccw = rotor_to_wrench({1000, 1000, 0, 0}, p);
    CHECK(ccw.torque.x() == 0.0);
    CHECK(ccw.torque.y() == 0.0);
    CHECK(ccw.torque.z() == doctest::Approx(-2e-2).epsilon(1e-12));
    const Wrench cw = rotor_to_wrench({0, 0, 1000, 1000}, p);
    CHECK(cw.torque.x() == 0.0);
    CHECK(cw.torque.y() == 0.0);
    CHECK(cw.torque.z() == doctest::Approx(2e-2).epsilon(1e-12));

    CHECK_THROWS_AS(rotor_to_wrench({1000, -1, 0, 0}, p), ValidationError);
}

TEST_CASE("rotor lever arms follow the X layout") {
    const VehicleParams p = unit_params();
    const double d = p.arm_length / std::sqrt(2.0);
    // Rotor 2 at (+d, +d): force f gives roll torque +d f and pitch torque -d f.
    const Wrench w = rotor_to_wrench({0, 0, 1000, 0}, p);
    CHECK(w.torque.x() == doctest::Approx(d * 1.0));
    CHECK(w.torque.y() == doctest::Approx(-d * 1.0));
}

TEST_CASE("mixer inverse reproduces a feasible wrench") {
    const VehicleParams p = unit_params();
    const Wrench target{5.0, Vec3(0.01, -0.02, 0.003)};
    const Wrench back = rotor_to_wrench(wrench_to_rotor_speeds(target, p), p);
    CHECK(back.thrust == doctest::Approx(target.thrust).epsilon(1e-9));
    CHECK((back.torque - target.torque).norm() < 1e-9);
}

TEST_CASE("hover is an exact equilibrium") {
    const VehicleParams p;
    VehicleState s;
    s.p = Vec3(1.25, -2.0, 3.5);
    s.t = 40;
    const VehicleState next = step_dynamics(s, ControlCommand::hover(p), 1e-3, p);
    CHECK(next.p == s.p);
    CHECK(next.v == s.v);
    CHECK(next.w == s.w);
    CHECK(next.q.coeffs() == s.q.coeffs());
    CHECK(next.t == 1040);

    VehicleParams odd = p;
    odd.mass = 0.731;
    odd.drag = 0.3;
    VehicleState t = s;
    for (int i = 0; i < 1000; ++i) t = step_dynamics(t, ControlCommand::hover(odd), 1e-3, odd);
    CHECK(t.p == s.p);
    CHECK(t.v == s.v);
}

TEST_CASE("free fall single step uses the updated velocity") {
    VehicleParams p;
    p.drag = 0.0;
    const VehicleState next = step_dynamics(VehicleState{}, wrench_cmd(0.0), 0.01, p);
    CHECK(next.v.z() == doctest::Approx(-0.0981).epsilon(1e-14));
    CHECK(next.p.z() == doctest::Approx(-0.000981).epsilon(1e-14));
    CHECK(next.p.x() == 0.0);
    CHECK(next.t == 10000);
}

TEST_CASE("pure spin with spherical inertia rotates about z") {
    VehicleParams p;
    p.inertia = Vec3::Constant(3e-3);
    VehicleState s;
    s.w = Vec3(0, 0, 1);
    const VehicleState next = step_dynamics(s, ControlCommand::hover(p), 0.01, p);
    CHECK(next.w == s.w);
    const Eigen::AngleAxisd aa(next.q);
    CHECK(aa.angle() == doctest::Approx(0.01).epsilon(1e-12));
    CHECK((aa.axis() - Vec3::UnitZ()).norm() < 1e-12);
}

TEST_CASE("torque-free spin about a principal axis conserves the rate") {
    const VehicleParams p;
    VehicleState s;
    s.w = Vec3(0, 0, 3.0);
    const double initial = s.w.norm();
    for (int i = 0; i < 10000; ++i) {
        const VehicleState next = step_dynamics(s, ControlCommand::hover(p), 1e-3, p);
        CHECK(std::abs(next.w.norm() - s.w.norm()) < 1e-9);
        s = next;
    }
    CHECK(std::abs(s.w.norm() - initial) < 1e-9);
}

TEST_CASE("quaternion norm stays within 1e-6 of one over 1e6 tumbling steps") {
    VehicleParams p;
    VehicleState s;
    s.w = Vec3(0.7, -1.3, 2.1);
    double worst = 0.0;
    for (int i = 0; i < 1000000; ++i) {
        s = step_dynamics(s, wrench_cmd(p.mass * p.g, Vec3(1e-5, -2e-5, 3e-6)), 1e-3, p);
        worst = std::max(worst, std::abs(s.q.norm() - 1.0));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("energy drift without thrust or drag is first-order small") {
    VehicleParams p;
    p.drag = 0.0;
    VehicleState s;
    s.p = Vec3(0, 0, 100.0);
    auto energy = [&](const VehicleState& st) { return 0.5 * p.mass * st.v.squaredNorm() + p.mass * p.g * st.p.z(); };
    const double e0 = energy(s);
    for (int i = 0; i < 1000; ++i) s = step_dynamics(s, wrench_cmd(0.0), 1e-3, p);
    const double drift = std::abs(energy(s) - e0) / std::abs(e0);
    CHECK(drift < 1e-4);
    // Semi-implicit Euler loses exactly g^2 dt t / 2 per unit mass in free fall.
    CHECK(std::abs(energy(s) - e0) == doctest::Approx(p.mass * p.g * p.g * 1e-3 * 0.5).epsilon(1e-6));
}

TEST_CASE("rotor-speed mode equals wrench mode after rotor_to_wrench") {
    const VehicleParams p;
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> omega(800.0, 1400.0);
    VehicleState a;
    a.w = Vec3(0.1, 0.2, -0.3);
    VehicleState b = a;
    for (int i = 0; i < 200; ++i) {
        ControlCommand rotor;
        rotor.mode = CommandMode::rotor_speeds;
        rotor.rotor_speeds = {omega(rng), omega(rng), omega(rng), omega(rng)};
        const Wrench w = rotor_to_wrench(rotor.rotor_speeds, p);
        a = step_dynamics(a, rotor, 1e-3, p);
        b = step_dynamics(b, wrench_cmd(w.thrust, w.torque), 1e-3, p);
        CHECK(a.p == b.p);
        CHECK(a.q.coeffs() == b.q.coeffs());
    }
}

TEST_CASE("step validation and blow-up detection") {
    const VehicleParams p;
    CHECK_THROWS_AS(step_dynamics(VehicleState{}, ControlCommand::hover(p), 0.0, p), ValidationError);
    CHECK_THROWS_AS(step_dynamics(VehicleState{}, wrench_cmd(1.0, Vec3(1e308, 0, 0)), 1e3, p), IntegrationError);
    VehicleParams bad = p;
    bad.mass = 0.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = p;
    bad.inertia.y() = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    VehicleState st;
    st.q.coeffs() *= 1.1;
    CHECK_THROWS_AS(st.validate(), ValidationError);
}

TEST_CASE("se3_controller at zero error outputs exactly the hover wrench") {
    const VehicleParams p;
    VehicleState s;
    s.p = Vec3(0.5, -1.0, 2.0);
    TrajectoryRef ref;
    ref.pos = s.p;
    const ControlCommand c = se3_controller(s, ref, ControllerGains{}, p);
    CHECK(c.mode == CommandMode::wrench);
    CHECK(c.thrust == p.mass * p.g);
    CHECK(c.torque == Vec3::Zero());
}

TEST_CASE("se3_controller vertical error") {
    const VehicleParams p;
    ControllerGains g;
    g.kp = Vec3::Constant(10.0);
    VehicleState s;
    TrajectoryRef ref;
    ref.pos = Vec3(0, 0, 0.1);
    const ControlCommand c = se3_controller(s, ref, g, p);
    CHECK(c.thrust == doctest::Approx(p.mass * (p.g + 1.0)).epsilon(1e-12));
    CHECK(c.torque == Vec3::Zero());

    ref.pos = Vec3::Zero();
    ref.acc = Vec3(0, 0, -20.0);
    CHECK_THROWS_AS(se3_controller(s, ref, g, p), DomainError);
}

TEST_CASE("closed loop converges from a 0.5 m offset within 3 s at 1 kHz") {
    const VehicleParams p;
    const Trajectory hover = HoverTrajectory{Vec3(0, 0, 1), 0.0};
    const Vec3 offsets[] = {Vec3(0.5, 0, 0), Vec3(0, -0.5, 0), Vec3(0, 0, 0.5), Vec3(0.3, 0.3, -0.3) * (0.5 / std::sqrt(0.27))};
    for (const Vec3& off : offsets) {
        VehicleState s;
        s.p = Vec3(0, 0, 1) + off;
        for (int i = 0; i < 3000; ++i) {
            const TrajectoryRef ref = eval_trajectory(hover, i * 1e-3);
            s = step_dynamics(s, se3_controller(s, ref, ControllerGains{}, p), 1e-3, p);
        }
        CHECK((s.p - Vec3(0, 0, 1)).norm() < 0.05);
    }
}

TEST_CASE("closed loop tracks a circle with yaw") {
    const VehicleParams p;
    const Trajectory circle = CircleTrajectory{Vec3(0, 0, 1), 1.0, 1.0, 0.0, 0.4};
    VehicleState s;
    s.p = Vec3(1, 0, 1);
    s.v = Vec3(0, 1, 0);
    for (int i = 0; i < 5000; ++i) {
        const TrajectoryRef ref = eval_trajectory(circle, i * 1e-3);
        s = step_dynamics(s, se3_controller(s, ref, ControllerGains{}, p), 1e-3, p);
    }
    CHECK((s.p - eval_trajectory(circle, 5.0).pos).norm() < 0.05);
    const double yaw = std::atan2(s.q.toRotationMatrix()(1, 0), s.q.toRotationMatrix()(0, 0));
    CHECK(yaw == doctest::Approx(0.4).epsilon(1e-2));
}

TEST_CASE("trajectory examples") {
    const TrajectoryRef c = eval_trajectory(CircleTrajectory{Vec3(0, 0, 2.5), 1.0, 1.0}, 0.0);
    CHECK((c.pos - Vec3(1, 0, 2.5)).norm() < 1e-15);
    CHECK((c.vel - Vec3(0, 1, 0)).norm() < 1e-15);
    CHECK((c.acc - Vec3(-1, 0, 0)).norm() < 1e-15);

    const Vec3 P(1, 2, 3);
    for (double t : {-5.0, 0.0, 17.3}) {
        const TrajectoryRef h = eval_trajectory(HoverTrajectory{P, 0.2}, t);
        CHECK(h.pos == P);
        CHECK(h.vel == Vec3::Zero());
        CHECK(h.acc == Vec3::Zero());
        CHECK(h.yaw == 0.2);
    }
}

TEST_CASE("finite-domain trajectories clamp to their endpoints") {
    const LineTrajectory line{Vec3(0, 0, 1), Vec3(2, -1, 1.5), 4.0, 0.0};
    CHECK(eval_trajectory(line, -1.0).pos == line.start);
    CHECK(eval_trajectory(line, 10.0).pos == line.end);
    CHECK(eval_trajectory(line, 10.0).vel == Vec3::Zero());

    PolynomialTrajectory poly;
    poly.segments.push_back({2.0, {std::vector<double>{0, 1}, {1}, {0, 0, 1}, {0.5, 0.1}}});
    poly.segments.push_back({1.0, {std::vector<double>{2, 1}, {1}, {4, 4, -1}, {0.7}}});
    const TrajectoryRef end = eval_trajectory(poly, 99.0);
    CHECK((end.pos - Vec3(3, 1, 7)).norm() < 1e-12);
    CHECK(end.vel == Vec3::Zero());
    CHECK(end.acc == Vec3::Zero());
    CHECK(end.yaw == 0.7);
    const TrajectoryRef start = eval_trajectory(poly, -1.0);
    CHECK(start.pos == Vec3(0, 1, 0));
    CHECK(start.vel == Vec3::Zero());
    const TrajectoryRef mid = eval_trajectory(poly, 1.0);
    CHECK(mid.yaw == doctest::Approx(0.6));
    CHECK(mid.yaw_rate == doctest::Approx(0.1));

    CHECK_THROWS_AS(eval_trajectory(PolynomialTrajectory{}, 0.0), ValidationError);
    CHECK_THROWS_AS(eval_trajectory(LineTrajectory{Vec3::Zero(), Vec3::Ones(), 0.0}, 0.0), ValidationError);
}

TEST_CASE("trajectory derivatives agree with centered finite differences") {
    PolynomialTrajectory poly;
    poly.segments.push_back({3.0, {std::vector<double>{0.1, -0.3, 0.2, 0.05, -0.01}, {1, 0.5, -0.25}, {2, 0, 0.1, -0.02}, {}}});
    const Trajectory trajectories[] = {
        HoverTrajectory{Vec3(1, 2, 3)},
        LineTrajectory{Vec3(0, 0, 1), Vec3(3, -2, 2), 5.0},
        CircleTrajectory{Vec3(0.5, 0, 1.5), 1.7, 0.8, 0.3},
        LissajousTrajectory{Vec3(0, 0, 1), Vec3(1, 0.5, 0.2), Vec3(0.7, 1.4, 2.1), Vec3(0, 0.5, 1)},
        poly,
    };
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> when(0.05, 2.9);
    const double h = 1e-5;
    for (const Trajectory& traj : trajectories) {
        for (int i = 0; i < 20; ++i) {
            const double t = when(rng);
            const TrajectoryRef r = eval_trajectory(traj, t);
            const TrajectoryRef plus = eval_trajectory(traj, t + h);
            const TrajectoryRef minus = eval_trajectory(traj, t - h);
            CHECK(((plus.pos - minus.pos) / (2 * h) - r.vel).norm() < 1e-5);
            CHECK(((plus.vel - minus.vel) / (2 * h) - r.acc).norm() < 1e-5);
        }
    }
}

TEST_CASE("IMU statics with noise off") {
    const VehicleState s;
    const ImuSample hover = sample_imu(s, Vec3::Zero(), ImuNoise{}, 1);
    CHECK(hover.accel == Vec3(0, 0, 9.81));
    CHECK(hover.gyro == Vec3::Zero());

    const ImuSample fall = sample_imu(s, Vec3(0, 0, -9.81), ImuNoise{}, 1);
    CHECK(fall.accel == Vec3::Zero());

    // Body rotated +90 degrees about x: world up lies along body +y.
    VehicleState rolled;
    rolled.q = Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitX()));
    const ImuSample r = sample_imu(rolled, Vec3::Zero(), ImuNoise{}, 1);
    CHECK((r.accel - Vec3(0, 9.81, 0)).norm() < 1e-12);

    VehicleState spinning;
    spinning.w = Vec3(0.1, -0.2, 0.3);
    spinning.t = 777;
    const ImuSample g = sample_imu(spinning, Vec3::Zero(), ImuNoise{}, 1);
    CHECK(g.gyro == spinning.w);
    CHECK(g.t == 777);
}

TEST_CASE("IMU noise is deterministic per seed with the configured spread") {
    const ImuNoise noise{0.05, 0.01, 0.02, 0.003, 99};
    const VehicleState s;
    const ImuSample a = sample_imu(s, Vec3::Zero(), noise, 5);
    const ImuSample b = sample_imu(s, Vec3::Zero(), noise, 5);
    const ImuSample c = sample_imu(s, Vec3::Zero(), noise, 6);
    CHECK(a.accel == b.accel);
    CHECK(a.gyro == b.gyro);
    CHECK(a.accel != c.accel);

    ImuSampler sampler(noise, 7);
    const Vec3 bias = sampler.accel_bias();
    CHECK(bias == ImuSampler(noise, 8).accel_bias());
    Vec3 mean = Vec3::Zero();
    Vec3 sq = Vec3::Zero();
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const Vec3 e = sampler.sample(s, Vec3::Zero()).accel - Vec3(0, 0, 9.81) - bias;
        mean += e;
        sq += e.cwiseProduct(e);
    }
    mean /= n;
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(mean[i]) < 0.005);
        CHECK(std::sqrt(sq[i] / n) == doctest::Approx(0.05).epsilon(0.05));
    }
    CHECK_THROWS_AS(ImuSampler(ImuNoise{-1.0}, 1), ValidationError);
}
