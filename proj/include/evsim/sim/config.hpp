#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "evsim/common/geometry.hpp"
#include "evsim/dynamics/trajectory.hpp"
#include "evsim/dynamics/vehicle.hpp"
#include "evsim/events/event_model.hpp"
#include "evsim/render/scene.hpp"

namespace evsim::sim {

enum class RunMode : std::uint8_t { streaming, lockstep };

struct TopicNames {
    std::string intensity = "/sim/intensity";
    std::string depth = "/sim/depth";
    std::string events = "/sim/events";
    std::string imu = "/sim/imu";
    std::string pose = "/sim/pose";
    std::string cmd = "/sim/cmd";
};

struct NetConfig {
    std::string daemon;            // empty: default discovery address
    std::string transport = "tcp"; // tcp | local
    std::size_t high_water_mark = 1000;
};

// Indoor box: checkerboard floor and textured walls around the origin.
render::SceneSpec default_scene();

struct SimConfig {
    std::uint32_t dynamics_rate_hz = 1000;
    std::uint32_t sensor_rate_hz = 100;
    render::CameraIntrinsics camera{50.0, 50.0, 32.0, 24.0, 64, 48};
    double camera_pitch_deg = 0.0;  // downward tilt of the optical axis from body x
    events::EventCameraConfig events;
    std::uint32_t event_workers = 1;
    render::SceneSpec scene = default_scene();
    dynamics::VehicleParams vehicle;
    dynamics::ControllerGains gains;
    dynamics::ImuNoise imu;
    dynamics::Trajectory trajectory = dynamics::HoverTrajectory{Vec3(0, 0, 1.5), 0.0};
    bool external_control = false;
    std::optional<Vec3> initial_position;  // default: trajectory start
    RunMode mode = RunMode::streaming;  // lockstep always takes commands from the cmd topic
    std::optional<std::chrono::microseconds> zoh_timeout = std::chrono::milliseconds(50);  // nullopt: wait forever
    bool paced = false;
    TopicNames topics;
    NetConfig net;
    std::uint64_t seed = 0;

    void validate() const;
    std::uint64_t sensor_period_us() const { return 1000000ULL / sensor_rate_hz; }
    std::uint32_t substeps() const { return dynamics_rate_hz / sensor_rate_hz; }
};

SimConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SimConfig& config);
SimConfig load_config(const std::string& path);

render::SceneSpec scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const render::SceneSpec& scene);
dynamics::Trajectory trajectory_from_json(const nlohmann::json& j);

}  // namespace evsim::sim
