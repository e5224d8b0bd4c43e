#include "evsim/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "evsim/common/error.hpp"
#include "evsim/dynamics/trajectory.hpp"

namespace evsim::sim {

namespace {

constexpr std::uint64_t kImuSeedSalt = 0x1a2b3c4d5e6f7081ULL;
constexpr std::uint64_t kPixelSeedSalt = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kNoiseSeedSalt = 0xd1b54a32d192ed03ULL;

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt, std::uint64_t k = 0) {
    std::uint64_t z = seed ^ salt;
    z += 0x9e3779b97f4a7c15ULL * (k + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

dynamics::VehicleState initial_state(const SimConfig& c) {
    const dynamics::TrajectoryRef ref = dynamics::eval_trajectory(c.trajectory, 0.0);
    dynamics::VehicleState s;
    s.p = c.initial_position.value_or(ref.pos);
    if (!c.initial_position && !c.external_control) s.v = ref.vel;
    s.q = Quat(Eigen::AngleAxisd(ref.yaw, Vec3::UnitZ()));
    return s;
}

std::string describe(const dynamics::VehicleState& s) {
    std::ostringstream os;
    os << "last valid state at t=" << s.t << "us: p=(" << s.p.x() << ", " << s.p.y() << ", " << s.p.z()
       << ") v=(" << s.v.x() << ", " << s.v.y() << ", " << s.v.z() << ")";
    return os.str();
}

}  // namespace

CommandCache CommandCache::initial(const dynamics::VehicleParams& params) {
    CommandCache c;
    c.last_command = dynamics::ControlCommand::hover(params);
    return c;
}

void CommandCache::update(const dynamics::ControlCommand& command, Timestamp now) {
    last_command = command;
    t_received = now;
    received = true;
}

ZohResult apply_zoh(const CommandCache& cache, Timestamp now, const ZohPolicy& policy) {
    ZohResult r;
    r.command = cache.last_command;
    r.age_us = now >= cache.t_received ? now - cache.t_received : 0;
    if (policy.max_age) {
        r.expired = r.age_us > static_cast<Timestamp>(policy.max_age->count());
    }
    return r;
}

Quat body_to_camera_rotation(double pitch_deg) {
    Mat3 optical_to_body;
    optical_to_body.col(0) = Vec3(0, -1, 0);
    optical_to_body.col(1) = Vec3(0, 0, -1);
    optical_to_body.col(2) = Vec3(1, 0, 0);
    const double pitch = pitch_deg * M_PI / 180.0;
    const Mat3 tilt = Eigen::AngleAxisd(pitch, Vec3::UnitY()).toRotationMatrix();
    return Quat(tilt * optical_to_body).normalized();
}

Simulator::Simulator(SimConfig config)
    : config_(std::move(config)),
      body_to_camera_(body_to_camera_rotation(config_.camera_pitch_deg)),
      imu_(config_.imu, mix(config_.seed, kImuSeedSalt), config_.vehicle.g) {
    config_.validate();
    state_ = initial_state(config_);
    cache_ = CommandCache::initial(config_.vehicle);
    if (config_.event_workers > 1) {
        generator_ = std::make_unique<events::ChunkedEventGenerator>(config_.event_workers);
    }
    last_frame_ = render::render_intensity(config_.scene, camera_pose(), config_.camera, state_.t);
    pixels_ = events::init_pixel_states(last_frame_, config_.events, mix(config_.seed, kPixelSeedSalt));
}

Pose Simulator::camera_pose() const {
    Pose p;
    p.position = state_.p;
    p.orientation = (state_.q * body_to_camera_).normalized();
    return p;
}

void Simulator::set_command(const dynamics::ControlCommand& command) { cache_.update(command, state_.t); }

dynamics::ControlCommand Simulator::command_for(const dynamics::VehicleState& s) const {
    if (config_.external_control) {
        return apply_zoh(cache_, s.t).command;
    }
    const double t = static_cast<double>(s.t) * 1e-6;
    return dynamics::se3_controller(s, dynamics::eval_trajectory(config_.trajectory, t), config_.gains,
                                    config_.vehicle);
}

ObservationBundle Simulator::step_once() {
    ObservationBundle b;
    b.step_id = step_id_;
    b.t_prev = state_.t;

    const std::uint32_t substeps = config_.substeps();
    const double dt = 1.0 / static_cast<double>(config_.dynamics_rate_hz);
    b.imu.reserve(substeps);
    for (std::uint32_t i = 0; i < substeps; ++i) {
        const dynamics::ControlCommand cmd = command_for(state_);
        const Vec3 accel =
            dynamics::linear_acceleration(state_, dynamics::command_wrench(cmd, config_.vehicle), config_.vehicle);
        dynamics::VehicleState next;
        try {
            next = dynamics::step_dynamics(state_, cmd, dt, config_.vehicle);
        } catch (const IntegrationError& e) {
            throw IntegrationError(std::string(e.what()) + "; " + describe(state_));
        }
        state_ = next;
        b.imu.push_back(imu_.sample(state_, accel));
        b.applied = cmd;
    }
    b.t = state_.t;
    b.state = state_;

    render::RenderedView view = render::render_view(config_.scene, camera_pose(), config_.camera, b.t);
    events::EventBatch batch =
        generator_ ? generator_->generate(pixels_, view.intensity, b.t_prev, b.t, config_.events)
                   : events::generate_events_serial(pixels_, view.intensity, b.t_prev, b.t, config_.events);
    if (config_.events.noise_rate_hz > 0.0) {
        events::EventBatch noise =
            events::inject_noise_events(config_.camera.width, config_.camera.height, b.t_prev, b.t,
                                        config_.events.noise_rate_hz, mix(config_.seed, kNoiseSeedSalt, b.step_id));
        batch.events.insert(batch.events.end(), noise.events.begin(), noise.events.end());
    }
    b.events = events::canonical_sort(std::move(batch));
    last_frame_ = view.intensity;
    b.intensity = std::move(view.intensity);
    b.depth = std::move(view.depth);
    ++step_id_;
    return b;
}

}  // namespace evsim::sim
