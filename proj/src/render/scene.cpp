#include "evsim/render/scene.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "evsim/common/error.hpp"

namespace evsim::render {

namespace {

constexpr double kMinRayParam = 1e-9;

bool in_unit_range(float v) { return v >= 0.0F && v <= 1.0F; }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double lattice(std::int64_t i, std::int64_t j, std::uint64_t seed) {
    const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i) ^
                                                         splitmix64(static_cast<std::uint64_t>(j) + 0x51ed27ULL)));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smoothstep(double f) { return f * f * (3.0 - 2.0 * f); }

float sample(const Checkerboard& c, double s, double t) {
    const auto i = static_cast<std::int64_t>(std::floor(s / c.cell_size));
    const auto j = static_cast<std::int64_t>(std::floor(t / c.cell_size));
    return ((i + j) & 1) == 0 ? c.intensity_a : c.intensity_b;
}

float sample(const ValueNoise& n, double s, double t) {
    const double gx = s / n.scale;
    const double gy = t / n.scale;
    const double fx = std::floor(gx);
    const double fy = std::floor(gy);
    const auto i = static_cast<std::int64_t>(fx);
    const auto j = static_cast<std::int64_t>(fy);
    const double ux = smoothstep(gx - fx);
    const double uy = smoothstep(gy - fy);
    const double v00 = lattice(i, j, n.seed);
    const double v10 = lattice(i + 1, j, n.seed);
    const double v01 = lattice(i, j + 1, n.seed);
    const double v11 = lattice(i + 1, j + 1, n.seed);
    const double v = (v00 * (1 - ux) + v10 * ux) * (1 - uy) + (v01 * (1 - ux) + v11 * ux) * uy;
    return static_cast<float>(n.min_intensity + v * (n.max_intensity - n.min_intensity));
}

void validate_texture(const Texture& texture, std::size_t index) {
    const std::string where = "plane " + std::to_string(index) + ": ";
    if (const auto* c = std::get_if<Checkerboard>(&texture)) {
        if (!(c->cell_size > 0.0)) throw ValidationError(where + "checkerboard cell size must be positive");
        if (!in_unit_range(c->intensity_a) || !in_unit_range(c->intensity_b)) {
            throw ValidationError(where + "checkerboard intensities must lie in [0, 1]");
        }
    } else {
        const auto& n = std::get<ValueNoise>(texture);
        if (!(n.scale > 0.0)) throw ValidationError(where + "value-noise scale must be positive");
        if (!in_unit_range(n.min_intensity) || !in_unit_range(n.max_intensity) ||
            n.min_intensity > n.max_intensity) {
            throw ValidationError(where + "value-noise intensity range must satisfy 0 <= min <= max <= 1");
        }
    }
}

float clamp_unit(float v) { return v < 0.0F ? 0.0F : (v > 1.0F ? 1.0F : v); }

}  // namespace

void CameraIntrinsics::validate() const {
    if (width == 0 || height == 0) {
        throw ValidationError("camera resolution must be non-zero");
    }
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
        throw ValidationError("camera focal lengths must be positive and finite");
    }
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
        throw ValidationError("principal point (" + std::to_string(cx) + ", " + std::to_string(cy) +
                              ") lies outside the " + std::to_string(width) + "x" + std::to_string(height) + " image");
    }
}

void SceneSpec::validate() const {
    if (!in_unit_range(ambient)) {
        throw ValidationError("scene ambient intensity must lie in [0, 1]");
    }
    for (std::size_t i = 0; i < planes.size(); ++i) {
        const Plane& p = planes[i];
        if (!(p.extent_u > 0.0) || !(p.extent_v > 0.0)) {
            throw ValidationError("plane " + std::to_string(i) + ": extents must be positive");
        }
        if (!p.origin.allFinite()) {
            throw ValidationError("plane " + std::to_string(i) + ": origin must be finite");
        }
        if (static_cast<int>(p.normal_axis) > 2) {
            throw ValidationError("plane " + std::to_string(i) + ": normal axis must be x, y or z");
        }
        validate_texture(p.texture, i);
    }
}

std::optional<Eigen::Vector2d> pinhole_project(const Vec3& point_camera, const CameraIntrinsics& K) {
    const double z = point_camera.z();
    if (!(z > 0.0)) {
        return std::nullopt;
    }
    return Eigen::Vector2d(K.fx * point_camera.x() / z + K.cx, K.fy * point_camera.y() / z + K.cy);
}

float sample_texture(const Texture& texture, double s, double t) {
    return std::visit([&](const auto& tex) { return sample(tex, s, t); }, texture);
}

std::optional<RayHit> cast_ray(const SceneSpec& scene, const Vec3& origin, const Vec3& direction) {
    std::optional<RayHit> best;
    for (std::size_t i = 0; i < scene.planes.size(); ++i) {
        const Plane& plane = scene.planes[i];
        const int a = static_cast<int>(plane.normal_axis);
        const int u = (a + 1) % 3;
        const int v = (a + 2) % 3;
        if (direction[a] == 0.0) {
            continue;
        }
        const double r = (plane.origin[a] - origin[a]) / direction[a];
        if (!(r > kMinRayParam) || (best && !(r < best->range))) {
            continue;
        }
        const Vec3 hit = origin + r * direction;
        const double s = hit[u] - plane.origin[u];
        const double t = hit[v] - plane.origin[v];
        if (s < 0.0 || s > plane.extent_u || t < 0.0 || t > plane.extent_v) {
            continue;
        }
        RayHit h;
        h.range = r;
        h.plane = i;
        h.point = hit;
        h.intensity = clamp_unit(sample_texture(plane.texture, s, t));
        best = h;
    }
    return best;
}

RenderedView render_view(const SceneSpec& scene, const Pose& camera_pose, const CameraIntrinsics& K, Timestamp t) {
    K.validate();
    scene.validate();
    check_unit_quaternion(camera_pose.orientation, "camera pose");
    if (!camera_pose.position.allFinite()) {
        throw ValidationError("camera position must be finite");
    }

    RenderedView view;
    view.intensity = IntensityFrame(K.width, K.height, t, scene.ambient);
    view.depth.width = K.width;
    view.depth.height = K.height;
    view.depth.t = t;
    view.depth.values.assign(static_cast<std::size_t>(K.width) * K.height, std::numeric_limits<float>::infinity());

    const Mat3 R = camera_pose.orientation.normalized().toRotationMatrix();
    for (std::uint32_t y = 0; y < K.height; ++y) {
        for (std::uint32_t x = 0; x < K.width; ++x) {
            // The optical-frame ray has unit z, so the ray parameter is the z-depth.
            const Vec3 ray_cam((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
            const auto hit = cast_ray(scene, camera_pose.position, R * ray_cam);
            if (!hit) {
                continue;
            }
            const std::size_t idx = static_cast<std::size_t>(y) * K.width + x;
            view.intensity.values[idx] = hit->intensity;
            view.depth.values[idx] = static_cast<float>(hit->range);
        }
    }
    return view;
}

IntensityFrame render_intensity(const SceneSpec& scene, const Pose& camera_pose, const CameraIntrinsics& K,
                                Timestamp t) {
    return render_view(scene, camera_pose, K, t).intensity;
}

DepthFrame render_depth(const SceneSpec& scene, const Pose& camera_pose, const CameraIntrinsics& K, Timestamp t) {
    return render_view(scene, camera_pose, K, t).depth;
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-9) {
        throw ValidationError("look_at: up vector is parallel to the viewing direction");
    }
    right.normalize();
    const Vec3 down = forward.cross(right);
    Mat3 R;
    R.col(0) = right;
    R.col(1) = down;
    R.col(2) = forward;
    Pose pose;
    pose.position = eye;
    pose.orientation = Quat(R).normalized();
    return pose;
}

}  // namespace evsim::render
