#pragma once

// Tick loop coupling dynamics, IMU, rendering and the event camera.
//
// Bundle k covers the sensor interval [t_{k}, t_{k+1}) with t_k = k * sensor_period; its
// timestamp is t_{k+1}. Frame 0 is rendered at construction and seeds the pixel states.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "evsim/dynamics/vehicle.hpp"
#include "evsim/events/aggregation.hpp"
#include "evsim/events/event_model.hpp"
#include "evsim/render/scene.hpp"
#include "evsim/sim/config.hpp"

namespace evsim::sim {

using Timestamp = std::uint64_t;  // microseconds

struct CommandCache {
    dynamics::ControlCommand last_command;
    Timestamp t_received = 0;
    bool received = false;

    // Hover wrench for the given vehicle, stamped at t = 0.
    static CommandCache initial(const dynamics::VehicleParams& params);
    void update(const dynamics::ControlCommand& command, Timestamp now);
};

struct ZohPolicy {
    std::optional<std::chrono::microseconds> max_age;  // diagnostics only
};

struct ZohResult {
    dynamics::ControlCommand command;
    Timestamp age_us = 0;
    bool expired = false;  // age exceeds policy.max_age
};

// Pure hold: the cached command is returned whatever its age.
ZohResult apply_zoh(const CommandCache& cache, Timestamp now, const ZohPolicy& policy = {});

struct ObservationBundle {
    std::uint64_t step_id = 0;
    Timestamp t_prev = 0;
    Timestamp t = 0;
    events::IntensityFrame intensity;
    render::DepthFrame depth;
    events::EventBatch events;
    std::vector<dynamics::ImuSample> imu;
    dynamics::VehicleState state;
    dynamics::ControlCommand applied;  // command used in the last substep
};

// Optical frame in the body frame: optical z along body x, optical x along -body y, tilted down by pitch.
Quat body_to_camera_rotation(double pitch_deg);

class Simulator {
public:
    explicit Simulator(SimConfig config);

    ObservationBundle step_once();

    // Stores an external command; used only when external control is enabled.
    void set_command(const dynamics::ControlCommand& command);

    const SimConfig& config() const { return config_; }
    const dynamics::VehicleState& state() const { return state_; }
    const CommandCache& command_cache() const { return cache_; }
    std::uint64_t next_step_id() const { return step_id_; }
    Timestamp time() const { return state_.t; }
    Pose camera_pose() const;
    const events::IntensityFrame& last_frame() const { return last_frame_; }

private:
    dynamics::ControlCommand command_for(const dynamics::VehicleState& s) const;

    SimConfig config_;
    Quat body_to_camera_;
    dynamics::VehicleState state_;
    CommandCache cache_;
    dynamics::ImuSampler imu_;
    events::PixelStateGrid pixels_;
    std::unique_ptr<events::ChunkedEventGenerator> generator_;
    events::IntensityFrame last_frame_;
    std::uint64_t step_id_ = 0;
};

}  // namespace evsim::sim
