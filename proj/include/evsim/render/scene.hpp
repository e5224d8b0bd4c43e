#pragma once

// Procedural ray-cast renderer: axis-aligned textured rectangles seen through a pinhole camera.
//
// Camera convention: the pose orientation maps optical-frame vectors (x right, y down,
// z forward) into the world. Pixel (u, v) looks along ((u - cx) / fx, (v - cy) / fy, 1).

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "evsim/common/geometry.hpp"
#include "evsim/events/event_model.hpp"

namespace evsim::render {

using events::IntensityFrame;
using events::Timestamp;

struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    std::uint32_t width = 0;
    std::uint32_t height = 0;

    void validate() const;
};

struct Checkerboard {
    double cell_size = 0.5;
    float intensity_a = 0.2F;
    float intensity_b = 0.8F;
};

// Smoothly interpolated lattice noise with one lattice cell per `scale` metres.
struct ValueNoise {
    double scale = 0.25;
    std::uint64_t seed = 0;
    float min_intensity = 0.1F;
    float max_intensity = 0.9F;
};

using Texture = std::variant<Checkerboard, ValueNoise>;

enum class Axis : std::uint8_t { x = 0, y = 1, z = 2 };

// Rectangle lying in the plane coord[normal_axis] == origin[normal_axis], spanning
// [origin[u], origin[u] + extent_u] x [origin[v], origin[v] + extent_v] with
// u = (normal_axis + 1) % 3 and v = (normal_axis + 2) % 3.
struct Plane {
    Vec3 origin = Vec3::Zero();
    Axis normal_axis = Axis::z;
    double extent_u = 1.0;
    double extent_v = 1.0;
    Texture texture = Checkerboard{};
};

struct SceneSpec {
    std::vector<Plane> planes;
    float ambient = 0.0F;

    void validate() const;
};

// Z-depth per pixel; misses are +infinity.
struct DepthFrame {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    Timestamp t = 0;
    std::vector<float> values;

    float at(std::uint32_t x, std::uint32_t y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct RenderedView {
    IntensityFrame intensity;
    DepthFrame depth;
};

struct RayHit {
    double depth = 0.0;   // along the optical axis
    double range = 0.0;   // along the ray
    std::size_t plane = 0;
    Vec3 point = Vec3::Zero();
    float intensity = 0.0F;
};

// Pixel coordinates of a camera-frame point, or nullopt when z <= 0.
std::optional<Eigen::Vector2d> pinhole_project(const Vec3& point_camera, const CameraIntrinsics& K);

float sample_texture(const Texture& texture, double s, double t);

// Nearest intersection of the ray origin + r * direction (r > 0); ties keep the earliest plane.
std::optional<RayHit> cast_ray(const SceneSpec& scene, const Vec3& origin, const Vec3& direction);

RenderedView render_view(const SceneSpec& scene, const Pose& camera_pose, const CameraIntrinsics& K, Timestamp t = 0);
IntensityFrame render_intensity(const SceneSpec& scene, const Pose& camera_pose, const CameraIntrinsics& K,
                                Timestamp t = 0);
DepthFrame render_depth(const SceneSpec& scene, const Pose& camera_pose, const CameraIntrinsics& K, Timestamp t = 0);

// Camera pose at `eye` with the optical axis pointing at `target`; `up` fixes the roll.
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

}  // namespace evsim::render
