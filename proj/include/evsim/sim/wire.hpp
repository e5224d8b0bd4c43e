#pragma once

// Message types published by the simulator node and the command type it consumes.
//
//   Intensity{step_id:u64;t:u64;image:f32[*][*]}            image shape [height][width]
//   Depth{step_id:u64;t:u64;depth:f32[*][*]}
//   Events{step_id:u64;t_start:u64;t_end:u64;t:u64[*];x:u16[*];y:u16[*];p:i8[*];dropped:u64}
//   Imu{step_id:u64;t:u64[*];accel:f64[*][*];gyro:f64[*][*]}  accel/gyro shape [n][3]
//   Pose{step_id:u64;t:u64;position:f64[3];orientation:f64[4];velocity:f64[3];angular_velocity:f64[3]}
//   Command{step_id:u64;t_cmd:u64;mode:u8;rotor_speeds:f64[4];thrust:f64;torque:f64[3]}
//
// Orientation is (w, x, y, z). Times are simulation microseconds.

#include <cstdint>
#include <vector>

#include "evsim/dynamics/vehicle.hpp"
#include "evsim/events/event_model.hpp"
#include "evsim/msg/schema.hpp"
#include "evsim/msg/value.hpp"
#include "evsim/render/scene.hpp"
#include "evsim/sim/simulator.hpp"

namespace evsim::sim::wire {

const msg::MessageSchema& intensity_schema();
const msg::MessageSchema& depth_schema();
const msg::MessageSchema& events_schema();
const msg::MessageSchema& imu_schema();
const msg::MessageSchema& pose_schema();
const msg::MessageSchema& command_schema();

msg::Message encode_intensity(std::uint64_t step_id, const events::IntensityFrame& frame);
msg::Message encode_depth(std::uint64_t step_id, const render::DepthFrame& frame);
msg::Message encode_events(std::uint64_t step_id, Timestamp t_start, Timestamp t_end, const events::EventBatch& batch);
msg::Message encode_imu(std::uint64_t step_id, const std::vector<dynamics::ImuSample>& samples);
msg::Message encode_pose(std::uint64_t step_id, const dynamics::VehicleState& state);
msg::Message encode_command(const dynamics::ControlCommand& command);

struct PoseSample {
    std::uint64_t step_id = 0;
    dynamics::VehicleState state;
};

struct EventPacket {
    std::uint64_t step_id = 0;
    Timestamp t_start = 0;
    Timestamp t_end = 0;
    events::EventBatch batch;
};

events::IntensityFrame decode_intensity(const msg::Message& message, std::uint64_t* step_id = nullptr);
render::DepthFrame decode_depth(const msg::Message& message, std::uint64_t* step_id = nullptr);
EventPacket decode_events(const msg::Message& message);
std::vector<dynamics::ImuSample> decode_imu(const msg::Message& message, std::uint64_t* step_id = nullptr);
PoseSample decode_pose(const msg::Message& message);
dynamics::ControlCommand decode_command(const msg::Message& message);

// One message per published topic, in publication order (pose last).
struct BundleMessages {
    msg::Message intensity;
    msg::Message depth;
    msg::Message events;
    msg::Message imu;
    msg::Message pose;
};

BundleMessages encode_bundle(const ObservationBundle& bundle);

// FNV-1a over the serialized payloads of every message in the bundle, chained onto `seed`.
std::uint64_t bundle_digest(const ObservationBundle& bundle, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace evsim::sim::wire
