#include "evsim/dynamics/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evsim/common/error.hpp"

namespace evsim::dynamics {

namespace {

// Value and first two derivatives of sum c_k * tau^k.
std::array<double, 3> polyval(const std::vector<double>& c, double tau) {
    double p = 0.0;
    double dp = 0.0;
    double ddp = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) {
        ddp = ddp * tau + 2.0 * dp;
        dp = dp * tau + p;
        p = p * tau + c[k];
    }
    return {p, dp, ddp};
}

TrajectoryRef eval(const HoverTrajectory& h, double) {
    TrajectoryRef r;
    r.pos = h.position;
    r.yaw = h.yaw;
    return r;
}

TrajectoryRef eval(const LineTrajectory& l, double t) {
    const double tau = std::clamp(t / l.duration, 0.0, 1.0);
    const double s = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
    const double ds = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau) / l.duration;
    const double dds = 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau) / (l.duration * l.duration);
    const Vec3 delta = l.end - l.start;
    TrajectoryRef r;
    r.pos = l.start + s * delta;
    r.vel = ds * delta;
    r.acc = dds * delta;
    r.yaw = l.yaw;
    return r;
}

TrajectoryRef eval(const CircleTrajectory& c, double t) {
    const double a = c.omega * t + c.phase;
    const double ca = std::cos(a);
    const double sa = std::sin(a);
    TrajectoryRef r;
    r.pos = c.center + c.radius * Vec3(ca, sa, 0.0);
    r.vel = c.radius * c.omega * Vec3(-sa, ca, 0.0);
    r.acc = -c.radius * c.omega * c.omega * Vec3(ca, sa, 0.0);
    r.yaw = c.yaw;
    return r;
}

TrajectoryRef eval(const LissajousTrajectory& l, double t) {
    TrajectoryRef r;
    for (int i = 0; i < 3; ++i) {
        const double a = l.omega[i] * t + l.phase[i];
        r.pos[i] = l.center[i] + l.amplitude[i] * std::sin(a);
        r.vel[i] = l.amplitude[i] * l.omega[i] * std::cos(a);
        r.acc[i] = -l.amplitude[i] * l.omega[i] * l.omega[i] * std::sin(a);
    }
    r.yaw = l.yaw;
    return r;
}

TrajectoryRef eval(const PolynomialTrajectory& p, double t) {
    bool clamped = t < 0.0;
    double local = std::max(t, 0.0);
    std::size_t seg = 0;
    while (seg + 1 < p.segments.size() && local > p.segments[seg].duration) {
        local -= p.segments[seg].duration;
        ++seg;
    }
    if (local > p.segments[seg].duration) {
        local = p.segments[seg].duration;
        clamped = true;
    }
    TrajectoryRef r;
    for (int i = 0; i < 3; ++i) {
        const auto v = polyval(p.segments[seg].coeffs[static_cast<std::size_t>(i)], local);
        r.pos[i] = v[0];
        r.vel[i] = v[1];
        r.acc[i] = v[2];
    }
    const auto yaw = polyval(p.segments[seg].coeffs[3], local);
    r.yaw = yaw[0];
    r.yaw_rate = yaw[1];
    if (clamped) {
        r.vel.setZero();
        r.acc.setZero();
        r.yaw_rate = 0.0;
    }
    return r;
}

}  // namespace

void validate_trajectory(const Trajectory& traj) {
    if (const auto* l = std::get_if<LineTrajectory>(&traj)) {
        if (!(l->duration > 0.0)) throw ValidationError("line trajectory duration must be positive");
    } else if (const auto* c = std::get_if<CircleTrajectory>(&traj)) {
        if (!(c->radius >= 0.0)) throw ValidationError("circle trajectory radius must be non-negative");
    } else if (const auto* p = std::get_if<PolynomialTrajectory>(&traj)) {
        if (p->segments.empty()) throw ValidationError("polynomial trajectory needs at least one segment");
        for (std::size_t i = 0; i < p->segments.size(); ++i) {
            if (!(p->segments[i].duration > 0.0)) {
                throw ValidationError("polynomial segment " + std::to_string(i) + " duration must be positive");
            }
        }
    }
}

TrajectoryRef eval_trajectory(const Trajectory& traj, double t) {
    validate_trajectory(traj);
    if (!std::isfinite(t)) {
        throw ValidationError("trajectory query time must be finite");
    }
    return std::visit([&](const auto& spec) { return eval(spec, t); }, traj);
}

}  // namespace evsim::dynamics
