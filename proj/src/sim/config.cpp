#include "evsim/sim/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <string_view>

#include <nlohmann/json.hpp>

#include "evsim/common/error.hpp"

namespace evsim::sim {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!j.is_object()) {
        throw ValidationError(where + ": expected an object");
    }
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (std::string_view a : allowed) known |= (key == a);
        if (!known) throw ValidationError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(where + "." + key + ": " + e.what());
    }
}

Vec3 vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ValidationError(where + ": expected [x, y, z]");
    try {
        return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
    } catch (const json::exception& e) {
        throw ValidationError(where + ": " + e.what());
    }
}

void read_vec3(const json& j, const char* key, Vec3& out, const std::string& where) {
    if (j.contains(key)) out = vec3(j.at(key), where + "." + key);
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

render::Axis axis_from(const std::string& s, const std::string& where) {
    if (s == "x") return render::Axis::x;
    if (s == "y") return render::Axis::y;
    if (s == "z") return render::Axis::z;
    throw ValidationError(where + ": normal must be x, y or z");
}

render::Texture texture_from_json(const json& j, const std::string& where) {
    std::string type;
    read(j, "type", type, where);
    if (type == "checkerboard") {
        check_keys(j, {"type", "cell", "a", "b"}, where);
        render::Checkerboard c;
        read(j, "cell", c.cell_size, where);
        read(j, "a", c.intensity_a, where);
        read(j, "b", c.intensity_b, where);
        return c;
    }
    if (type == "value_noise") {
        check_keys(j, {"type", "scale", "seed", "min", "max"}, where);
        render::ValueNoise n;
        read(j, "scale", n.scale, where);
        read(j, "seed", n.seed, where);
        read(j, "min", n.min_intensity, where);
        read(j, "max", n.max_intensity, where);
        return n;
    }
    throw ValidationError(where + ": texture type must be checkerboard or value_noise");
}

json texture_to_json(const render::Texture& t) {
    if (const auto* c = std::get_if<render::Checkerboard>(&t)) {
        return {{"type", "checkerboard"}, {"cell", c->cell_size}, {"a", c->intensity_a}, {"b", c->intensity_b}};
    }
    const auto& n = std::get<render::ValueNoise>(t);
    return {{"type", "value_noise"}, {"scale", n.scale}, {"seed", n.seed}, {"min", n.min_intensity},
            {"max", n.max_intensity}};
}

json trajectory_to_json(const dynamics::Trajectory& t) {
    using namespace dynamics;
    if (const auto* h = std::get_if<HoverTrajectory>(&t)) {
        return {{"type", "hover"}, {"position", to_json(h->position)}, {"yaw", h->yaw}};
    }
    if (const auto* l = std::get_if<LineTrajectory>(&t)) {
        return {{"type", "line"}, {"start", to_json(l->start)}, {"end", to_json(l->end)}, {"duration", l->duration},
                {"yaw", l->yaw}};
    }
    if (const auto* c = std::get_if<CircleTrajectory>(&t)) {
        return {{"type", "circle"}, {"center", to_json(c->center)}, {"radius", c->radius}, {"omega", c->omega},
                {"phase", c->phase}, {"yaw", c->yaw}};
    }
    if (const auto* s = std::get_if<LissajousTrajectory>(&t)) {
        return {{"type", "lissajous"}, {"center", to_json(s->center)}, {"amplitude", to_json(s->amplitude)},
                {"omega", to_json(s->omega)}, {"phase", to_json(s->phase)}, {"yaw", s->yaw}};
    }
    const auto& p = std::get<PolynomialTrajectory>(t);
    json segs = json::array();
    for (const auto& s : p.segments) {
        segs.push_back({{"duration", s.duration}, {"x", s.coeffs[0]}, {"y", s.coeffs[1]}, {"z", s.coeffs[2]},
                        {"yaw", s.coeffs[3]}});
    }
    return {{"type", "polynomial"}, {"segments", segs}};
}

void check_topic(const std::string& t, const char* which) {
    if (t.empty() || t.size() > 255 || t.find_first_of(" \t\r\n") != std::string::npos) {
        throw ValidationError(std::string("topic '") + which + "' must be 1-255 bytes without whitespace");
    }
}

}  // namespace

void SimConfig::validate() const {
    if (sensor_rate_hz == 0 || dynamics_rate_hz == 0) {
        throw ValidationError("dynamics and sensor rates must be positive");
    }
    if (dynamics_rate_hz > 10000) {
        throw ValidationError("dynamics_rate_hz must not exceed 10000");
    }
    if (dynamics_rate_hz < sensor_rate_hz || dynamics_rate_hz % sensor_rate_hz != 0) {
        throw ValidationError("dynamics_rate_hz (" + std::to_string(dynamics_rate_hz) +
                              ") must be a multiple of sensor_rate_hz (" + std::to_string(sensor_rate_hz) + ")");
    }
    if (1000000 % dynamics_rate_hz != 0) {
        throw ValidationError("dynamics_rate_hz must divide one second into whole microseconds");
    }
    camera.validate();
    if (!std::isfinite(camera_pitch_deg) || std::abs(camera_pitch_deg) >= 90.0) {
        throw ValidationError("camera pitch must lie strictly between -90 and 90 degrees");
    }
    events.validate();
    if (event_workers < 1) throw ValidationError("event_workers must be at least 1");
    scene.validate();
    vehicle.validate();
    dynamics::validate_trajectory(trajectory);
    if (zoh_timeout && zoh_timeout->count() < 0) throw ValidationError("zoh_timeout must be non-negative");
    if (net.transport != "tcp" && net.transport != "local") {
        throw ValidationError("net.transport must be tcp or local");
    }
    if (net.high_water_mark < 1) throw ValidationError("net.high_water_mark must be at least 1");
    check_topic(topics.intensity, "intensity");
    check_topic(topics.depth, "depth");
    check_topic(topics.events, "events");
    check_topic(topics.imu, "imu");
    check_topic(topics.pose, "pose");
    check_topic(topics.cmd, "cmd");
}

render::SceneSpec default_scene() {
    using render::Axis;
    render::SceneSpec s;
    s.ambient = 0.05F;
    auto plane = [](Vec3 origin, Axis axis, double eu, double ev, render::Texture tex) {
        render::Plane p;
        p.origin = origin;
        p.normal_axis = axis;
        p.extent_u = eu;
        p.extent_v = ev;
        p.texture = tex;
        return p;
    };
    s.planes.push_back(plane(Vec3(-20, -20, 0), Axis::z, 40, 40, render::Checkerboard{0.5, 0.15F, 0.85F}));
    s.planes.push_back(plane(Vec3(4, -20, -1), Axis::x, 40, 10, render::ValueNoise{0.3, 1, 0.1F, 0.9F}));
    s.planes.push_back(plane(Vec3(-4, -20, -1), Axis::x, 40, 10, render::Checkerboard{0.4, 0.25F, 0.75F}));
    s.planes.push_back(plane(Vec3(-20, 4, -1), Axis::y, 10, 40, render::ValueNoise{0.25, 2, 0.2F, 0.8F}));
    s.planes.push_back(plane(Vec3(-20, -4, -1), Axis::y, 10, 40, render::Checkerboard{0.6, 0.3F, 0.7F}));
    return s;
}

render::SceneSpec scene_from_json(const json& j) {
    check_keys(j, {"ambient", "planes"}, "scene");
    render::SceneSpec s;
    read(j, "ambient", s.ambient, "scene");
    if (j.contains("planes")) {
        const json& planes = j.at("planes");
        if (!planes.is_array()) throw ValidationError("scene.planes: expected an array");
        for (std::size_t i = 0; i < planes.size(); ++i) {
            const std::string where = "scene.planes[" + std::to_string(i) + "]";
            const json& pj = planes[i];
            check_keys(pj, {"origin", "normal", "extent", "texture"}, where);
            render::Plane p;
            read_vec3(pj, "origin", p.origin, where);
            std::string normal = "z";
            read(pj, "normal", normal, where);
            p.normal_axis = axis_from(normal, where);
            if (pj.contains("extent")) {
                const json& e = pj.at("extent");
                if (!e.is_array() || e.size() != 2) throw ValidationError(where + ".extent: expected [u, v]");
                p.extent_u = e[0].get<double>();
                p.extent_v = e[1].get<double>();
            }
            if (pj.contains("texture")) p.texture = texture_from_json(pj.at("texture"), where + ".texture");
            s.planes.push_back(p);
        }
    }
    s.validate();
    return s;
}

json scene_to_json(const render::SceneSpec& scene) {
    json planes = json::array();
    for (const auto& p : scene.planes) {
        const char* axis = p.normal_axis == render::Axis::x ? "x" : (p.normal_axis == render::Axis::y ? "y" : "z");
        planes.push_back({{"origin", to_json(p.origin)},
                          {"normal", axis},
                          {"extent", json::array({p.extent_u, p.extent_v})},
                          {"texture", texture_to_json(p.texture)}});
    }
    return {{"ambient", scene.ambient}, {"planes", planes}};
}

dynamics::Trajectory trajectory_from_json(const json& j) {
    using namespace dynamics;
    const std::string where = "control.trajectory";
    std::string type;
    read(j, "type", type, where);
    Trajectory out;
    if (type == "hover") {
        check_keys(j, {"type", "position", "yaw"}, where);
        HoverTrajectory h;
        read_vec3(j, "position", h.position, where);
        read(j, "yaw", h.yaw, where);
        out = h;
    } else if (type == "line") {
        check_keys(j, {"type", "start", "end", "duration", "yaw"}, where);
        LineTrajectory l;
        read_vec3(j, "start", l.start, where);
        read_vec3(j, "end", l.end, where);
        read(j, "duration", l.duration, where);
        read(j, "yaw", l.yaw, where);
        out = l;
    } else if (type == "circle") {
        check_keys(j, {"type", "center", "radius", "omega", "phase", "yaw"}, where);
        CircleTrajectory c;
        read_vec3(j, "center", c.center, where);
        read(j, "radius", c.radius, where);
        read(j, "omega", c.omega, where);
        read(j, "phase", c.phase, where);
        read(j, "yaw", c.yaw, where);
        out = c;
    } else if (type == "lissajous") {
        check_keys(j, {"type", "center", "amplitude", "omega", "phase", "yaw"}, where);
        LissajousTrajectory l;
        read_vec3(j, "center", l.center, where);
        read_vec3(j, "amplitude", l.amplitude, where);
        read_vec3(j, "omega", l.omega, where);
        read_vec3(j, "phase", l.phase, where);
        read(j, "yaw", l.yaw, where);
        out = l;
    } else if (type == "polynomial") {
        check_keys(j, {"type", "segments"}, where);
        PolynomialTrajectory p;
        if (!j.contains("segments") || !j.at("segments").is_array()) {
            throw ValidationError(where + ".segments: expected an array");
        }
        for (const json& sj : j.at("segments")) {
            check_keys(sj, {"duration", "x", "y", "z", "yaw"}, where + ".segments[]");
            PolynomialSegment s;
            read(sj, "duration", s.duration, where);
            read(sj, "x", s.coeffs[0], where);
            read(sj, "y", s.coeffs[1], where);
            read(sj, "z", s.coeffs[2], where);
            read(sj, "yaw", s.coeffs[3], where);
            p.segments.push_back(std::move(s));
        }
        out = p;
    } else {
        throw ValidationError(where + ".type must be hover, line, circle, lissajous or polynomial");
    }
    validate_trajectory(out);
    return out;
}

SimConfig config_from_json(const json& j) {
    check_keys(j, {"seed", "mode", "dynamics_rate_hz", "sensor_rate_hz", "paced", "zoh_timeout_ms", "event_workers",
                   "camera", "events", "scene", "vehicle", "controller", "imu", "control", "topics", "net"},
               "config");
    SimConfig c;
    c.scene = default_scene();
    read(j, "seed", c.seed, "config");
    read(j, "dynamics_rate_hz", c.dynamics_rate_hz, "config");
    read(j, "sensor_rate_hz", c.sensor_rate_hz, "config");
    read(j, "paced", c.paced, "config");
    read(j, "event_workers", c.event_workers, "config");
    if (j.contains("mode")) {
        const std::string mode = j.at("mode").get<std::string>();
        if (mode == "streaming") {
            c.mode = RunMode::streaming;
        } else if (mode == "lockstep") {
            c.mode = RunMode::lockstep;
        } else {
            throw ValidationError("config.mode must be streaming or lockstep");
        }
    }
    if (j.contains("zoh_timeout_ms")) {
        const json& z = j.at("zoh_timeout_ms");
        if (z.is_null() || (z.is_string() && z.get<std::string>() == "inf")) {
            c.zoh_timeout.reset();
        } else {
            c.zoh_timeout = std::chrono::microseconds(static_cast<long long>(std::llround(z.get<double>() * 1000.0)));
        }
    }
    if (j.contains("camera")) {
        const json& cj = j.at("camera");
        check_keys(cj, {"fx", "fy", "cx", "cy", "width", "height", "pitch_deg"}, "camera");
        read(cj, "fx", c.camera.fx, "camera");
        read(cj, "fy", c.camera.fy, "camera");
        read(cj, "cx", c.camera.cx, "camera");
        read(cj, "cy", c.camera.cy, "camera");
        read(cj, "width", c.camera.width, "camera");
        read(cj, "height", c.camera.height, "camera");
        read(cj, "pitch_deg", c.camera_pitch_deg, "camera");
    }
    if (j.contains("events")) {
        const json& ej = j.at("events");
        check_keys(ej, {"c_pos", "c_neg", "sigma_c", "refractory_us", "log_eps", "noise_rate_hz",
                        "max_events_per_frame"},
                   "events");
        read(ej, "c_pos", c.events.c_pos, "events");
        read(ej, "c_neg", c.events.c_neg, "events");
        read(ej, "sigma_c", c.events.sigma_c, "events");
        read(ej, "refractory_us", c.events.refractory_us, "events");
        read(ej, "log_eps", c.events.log_eps, "events");
        read(ej, "noise_rate_hz", c.events.noise_rate_hz, "events");
        if (ej.contains("max_events_per_frame")) {
            const json& m = ej.at("max_events_per_frame");
            if (m.is_null()) {
                c.events.max_events_per_frame.reset();
            } else if (m.is_string() && m.get<std::string>() == "unbounded") {
                c.events.max_events_per_frame = events::kUnboundedCapacity;
            } else {
                c.events.max_events_per_frame = m.get<std::size_t>();
            }
        }
    }
    if (j.contains("scene")) c.scene = scene_from_json(j.at("scene"));
    if (j.contains("vehicle")) {
        const json& vj = j.at("vehicle");
        check_keys(vj, {"mass", "inertia", "arm_length", "k_f", "k_m", "drag", "g"}, "vehicle");
        read(vj, "mass", c.vehicle.mass, "vehicle");
        read_vec3(vj, "inertia", c.vehicle.inertia, "vehicle");
        read(vj, "arm_length", c.vehicle.arm_length, "vehicle");
        read(vj, "k_f", c.vehicle.k_f, "vehicle");
        read(vj, "k_m", c.vehicle.k_m, "vehicle");
        read(vj, "drag", c.vehicle.drag, "vehicle");
        read(vj, "g", c.vehicle.g, "vehicle");
    }
    if (j.contains("controller")) {
        const json& gj = j.at("controller");
        check_keys(gj, {"kp", "kv", "kR", "kw"}, "controller");
        read_vec3(gj, "kp", c.gains.kp, "controller");
        read_vec3(gj, "kv", c.gains.kv, "controller");
        read_vec3(gj, "kR", c.gains.kR, "controller");
        read_vec3(gj, "kw", c.gains.kw, "controller");
    }
    if (j.contains("imu")) {
        const json& ij = j.at("imu");
        check_keys(ij, {"std_accel", "std_gyro", "bias_std_accel", "bias_std_gyro", "bias_seed"}, "imu");
        read(ij, "std_accel", c.imu.std_accel, "imu");
        read(ij, "std_gyro", c.imu.std_gyro, "imu");
        read(ij, "bias_std_accel", c.imu.bias_std_accel, "imu");
        read(ij, "bias_std_gyro", c.imu.bias_std_gyro, "imu");
        read(ij, "bias_seed", c.imu.bias_seed, "imu");
    }
    if (j.contains("control")) {
        const json& cj = j.at("control");
        check_keys(cj, {"external", "trajectory", "initial_position"}, "control");
        read(cj, "external", c.external_control, "control");
        if (cj.contains("trajectory")) c.trajectory = trajectory_from_json(cj.at("trajectory"));
        if (cj.contains("initial_position")) c.initial_position = vec3(cj.at("initial_position"), "control.initial_position");
    }
    if (j.contains("topics")) {
        const json& tj = j.at("topics");
        check_keys(tj, {"intensity", "depth", "events", "imu", "pose", "cmd"}, "topics");
        read(tj, "intensity", c.topics.intensity, "topics");
        read(tj, "depth", c.topics.depth, "topics");
        read(tj, "events", c.topics.events, "topics");
        read(tj, "imu", c.topics.imu, "topics");
        read(tj, "pose", c.topics.pose, "topics");
        read(tj, "cmd", c.topics.cmd, "topics");
    }
    if (j.contains("net")) {
        const json& nj = j.at("net");
        check_keys(nj, {"daemon", "transport", "high_water_mark"}, "net");
        read(nj, "daemon", c.net.daemon, "net");
        read(nj, "transport", c.net.transport, "net");
        read(nj, "high_water_mark", c.net.high_water_mark, "net");
    }
    c.validate();
    return c;
}

json config_to_json(const SimConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["mode"] = c.mode == RunMode::streaming ? "streaming" : "lockstep";
    j["dynamics_rate_hz"] = c.dynamics_rate_hz;
    j["sensor_rate_hz"] = c.sensor_rate_hz;
    j["paced"] = c.paced;
    j["zoh_timeout_ms"] = c.zoh_timeout ? json(static_cast<double>(c.zoh_timeout->count()) / 1000.0) : json("inf");
    j["event_workers"] = c.event_workers;
    j["camera"] = {{"fx", c.camera.fx},         {"fy", c.camera.fy},         {"cx", c.camera.cx},
                   {"cy", c.camera.cy},         {"width", c.camera.width},   {"height", c.camera.height},
                   {"pitch_deg", c.camera_pitch_deg}};
    json ev = {{"c_pos", c.events.c_pos},
               {"c_neg", c.events.c_neg},
               {"sigma_c", c.events.sigma_c},
               {"refractory_us", c.events.refractory_us},
               {"log_eps", c.events.log_eps},
               {"noise_rate_hz", c.events.noise_rate_hz}};
    if (!c.events.max_events_per_frame) {
        ev["max_events_per_frame"] = nullptr;
    } else if (*c.events.max_events_per_frame == events::kUnboundedCapacity) {
        ev["max_events_per_frame"] = "unbounded";
    } else {
        ev["max_events_per_frame"] = *c.events.max_events_per_frame;
    }
    j["events"] = ev;
    j["scene"] = scene_to_json(c.scene);
    j["vehicle"] = {{"mass", c.vehicle.mass},     {"inertia", to_json(c.vehicle.inertia)},
                    {"arm_length", c.vehicle.arm_length}, {"k_f", c.vehicle.k_f},
                    {"k_m", c.vehicle.k_m},       {"drag", c.vehicle.drag},
                    {"g", c.vehicle.g}};
    j["controller"] = {{"kp", to_json(c.gains.kp)}, {"kv", to_json(c.gains.kv)}, {"kR", to_json(c.gains.kR)},
                       {"kw", to_json(c.gains.kw)}};
    j["imu"] = {{"std_accel", c.imu.std_accel},
                {"std_gyro", c.imu.std_gyro},
                {"bias_std_accel", c.imu.bias_std_accel},
                {"bias_std_gyro", c.imu.bias_std_gyro},
                {"bias_seed", c.imu.bias_seed}};
    j["control"] = {{"external", c.external_control}, {"trajectory", trajectory_to_json(c.trajectory)}};
    if (c.initial_position) j["control"]["initial_position"] = to_json(*c.initial_position);
    j["topics"] = {{"intensity", c.topics.intensity}, {"depth", c.topics.depth}, {"events", c.topics.events},
                   {"imu", c.topics.imu},             {"pose", c.topics.pose},   {"cmd", c.topics.cmd}};
    j["net"] = {{"daemon", c.net.daemon},
                {"transport", c.net.transport},
                {"high_water_mark", c.net.high_water_mark}};
    return j;
}

SimConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config file " + path);
    }
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ValidationError("config file " + path + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace evsim::sim
