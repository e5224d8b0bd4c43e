#include "evsim/sim/wire.hpp"

#include <string>

#include "evsim/common/error.hpp"
#include "evsim/msg/codec.hpp"

namespace evsim::sim::wire {

namespace {

using msg::ArrayValue;
using msg::Message;
using msg::MessageSchema;

template <class T>
const T& get(const Message& m, std::size_t i, const char* what) {
    if (i >= m.values.size()) throw SerializationError(std::string("missing field ") + what);
    const T* v = std::get_if<T>(&m.values[i]);
    if (v == nullptr) throw SerializationError(std::string("field ") + what + " has the wrong type");
    return *v;
}

ArrayValue vec_array(const Vec3& v) { return ArrayValue::from<double>({3}, {v.x(), v.y(), v.z()}); }

Vec3 array_vec(const ArrayValue& a, std::size_t offset = 0) {
    return Vec3(a.at<double>(offset), a.at<double>(offset + 1), a.at<double>(offset + 2));
}

void check_rows(const ArrayValue& a, std::size_t rows, std::size_t cols, const char* what) {
    if (a.element_count() != rows * cols) throw SerializationError(std::string("field ") + what + " has the wrong size");
}

}  // namespace

const MessageSchema& intensity_schema() {
    static const MessageSchema s = msg::parse_schema("Intensity{step_id:u64;t:u64;image:f32[*][*]}");
    return s;
}

const MessageSchema& depth_schema() {
    static const MessageSchema s = msg::parse_schema("Depth{step_id:u64;t:u64;depth:f32[*][*]}");
    return s;
}

const MessageSchema& events_schema() {
    static const MessageSchema s = msg::parse_schema(
        "Events{step_id:u64;t_start:u64;t_end:u64;t:u64[*];x:u16[*];y:u16[*];p:i8[*];dropped:u64}");
    return s;
}

const MessageSchema& imu_schema() {
    static const MessageSchema s = msg::parse_schema("Imu{step_id:u64;t:u64[*];accel:f64[*][*];gyro:f64[*][*]}");
    return s;
}

const MessageSchema& pose_schema() {
    static const MessageSchema s = msg::parse_schema(
        "Pose{step_id:u64;t:u64;position:f64[3];orientation:f64[4];velocity:f64[3];angular_velocity:f64[3]}");
    return s;
}

const MessageSchema& command_schema() {
    static const MessageSchema s =
        msg::parse_schema("Command{step_id:u64;t_cmd:u64;mode:u8;rotor_speeds:f64[4];thrust:f64;torque:f64[3]}");
    return s;
}

Message encode_intensity(std::uint64_t step_id, const events::IntensityFrame& frame) {
    Message m;
    m.values = {step_id, std::uint64_t{frame.t}, ArrayValue::from<float>({frame.height, frame.width}, frame.values)};
    return m;
}

Message encode_depth(std::uint64_t step_id, const render::DepthFrame& frame) {
    Message m;
    m.values = {step_id, std::uint64_t{frame.t}, ArrayValue::from<float>({frame.height, frame.width}, frame.values)};
    return m;
}

Message encode_events(std::uint64_t step_id, Timestamp t_start, Timestamp t_end, const events::EventBatch& batch) {
    const std::size_t n = batch.events.size();
    std::vector<std::uint64_t> t(n);
    std::vector<std::uint16_t> x(n);
    std::vector<std::uint16_t> y(n);
    std::vector<std::int8_t> p(n);
    for (std::size_t i = 0; i < n; ++i) {
        const events::Event& e = batch.events[i];
        t[i] = e.t;
        x[i] = e.x;
        y[i] = e.y;
        p[i] = e.polarity;
    }
    const auto len = static_cast<std::uint32_t>(n);
    Message m;
    m.values = {step_id,
                std::uint64_t{t_start},
                std::uint64_t{t_end},
                ArrayValue::from<std::uint64_t>({len}, t),
                ArrayValue::from<std::uint16_t>({len}, x),
                ArrayValue::from<std::uint16_t>({len}, y),
                ArrayValue::from<std::int8_t>({len}, p),
                std::uint64_t{batch.dropped_count}};
    return m;
}

Message encode_imu(std::uint64_t step_id, const std::vector<dynamics::ImuSample>& samples) {
    const std::size_t n = samples.size();
    std::vector<std::uint64_t> t(n);
    std::vector<double> accel(3 * n);
    std::vector<double> gyro(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = samples[i].t;
        for (int k = 0; k < 3; ++k) {
            accel[3 * i + k] = samples[i].accel[k];
            gyro[3 * i + k] = samples[i].gyro[k];
        }
    }
    const auto len = static_cast<std::uint32_t>(n);
    Message m;
    m.values = {step_id, ArrayValue::from<std::uint64_t>({len}, t), ArrayValue::from<double>({len, 3}, accel),
                ArrayValue::from<double>({len, 3}, gyro)};
    return m;
}

Message encode_pose(std::uint64_t step_id, const dynamics::VehicleState& s) {
    Message m;
    m.values = {step_id,
                std::uint64_t{s.t},
                vec_array(s.p),
                ArrayValue::from<double>({4}, {s.q.w(), s.q.x(), s.q.y(), s.q.z()}),
                vec_array(s.v),
                vec_array(s.w)};
    return m;
}

Message encode_command(const dynamics::ControlCommand& c) {
    Message m;
    m.values = {c.step_id,
                std::uint64_t{c.t_cmd},
                static_cast<std::uint8_t>(c.mode),
                ArrayValue::from<double>({4}, {c.rotor_speeds[0], c.rotor_speeds[1], c.rotor_speeds[2],
                                               c.rotor_speeds[3]}),
                c.thrust,
                vec_array(c.torque)};
    return m;
}

events::IntensityFrame decode_intensity(const Message& m, std::uint64_t* step_id) {
    const ArrayValue& a = get<ArrayValue>(m, 2, "image");
    if (a.shape.size() != 2) throw SerializationError("image must be two-dimensional");
    events::IntensityFrame f;
    f.height = a.shape[0];
    f.width = a.shape[1];
    f.t = get<std::uint64_t>(m, 1, "t");
    f.values = a.to_vector<float>();
    if (step_id != nullptr) *step_id = get<std::uint64_t>(m, 0, "step_id");
    return f;
}

render::DepthFrame decode_depth(const Message& m, std::uint64_t* step_id) {
    const ArrayValue& a = get<ArrayValue>(m, 2, "depth");
    if (a.shape.size() != 2) throw SerializationError("depth must be two-dimensional");
    render::DepthFrame f;
    f.height = a.shape[0];
    f.width = a.shape[1];
    f.t = get<std::uint64_t>(m, 1, "t");
    f.values = a.to_vector<float>();
    if (step_id != nullptr) *step_id = get<std::uint64_t>(m, 0, "step_id");
    return f;
}

EventPacket decode_events(const Message& m) {
    EventPacket out;
    out.step_id = get<std::uint64_t>(m, 0, "step_id");
    out.t_start = get<std::uint64_t>(m, 1, "t_start");
    out.t_end = get<std::uint64_t>(m, 2, "t_end");
    const ArrayValue& t = get<ArrayValue>(m, 3, "t");
    const ArrayValue& x = get<ArrayValue>(m, 4, "x");
    const ArrayValue& y = get<ArrayValue>(m, 5, "y");
    const ArrayValue& p = get<ArrayValue>(m, 6, "p");
    const std::size_t n = t.element_count();
    if (x.element_count() != n || y.element_count() != n || p.element_count() != n) {
        throw SerializationError("event columns differ in length");
    }
    out.batch.events.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.batch.events[i] = events::Event{t.at<std::uint64_t>(i), x.at<std::uint16_t>(i), y.at<std::uint16_t>(i),
                                            p.at<std::int8_t>(i)};
    }
    out.batch.dropped_count = get<std::uint64_t>(m, 7, "dropped");
    return out;
}

std::vector<dynamics::ImuSample> decode_imu(const Message& m, std::uint64_t* step_id) {
    const ArrayValue& t = get<ArrayValue>(m, 1, "t");
    const ArrayValue& accel = get<ArrayValue>(m, 2, "accel");
    const ArrayValue& gyro = get<ArrayValue>(m, 3, "gyro");
    const std::size_t n = t.element_count();
    check_rows(accel, n, 3, "accel");
    check_rows(gyro, n, 3, "gyro");
    std::vector<dynamics::ImuSample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].t = t.at<std::uint64_t>(i);
        out[i].accel = array_vec(accel, 3 * i);
        out[i].gyro = array_vec(gyro, 3 * i);
    }
    if (step_id != nullptr) *step_id = get<std::uint64_t>(m, 0, "step_id");
    return out;
}

PoseSample decode_pose(const Message& m) {
    PoseSample out;
    out.step_id = get<std::uint64_t>(m, 0, "step_id");
    out.state.t = get<std::uint64_t>(m, 1, "t");
    out.state.p = array_vec(get<ArrayValue>(m, 2, "position"));
    const ArrayValue& q = get<ArrayValue>(m, 3, "orientation");
    out.state.q = Quat(q.at<double>(0), q.at<double>(1), q.at<double>(2), q.at<double>(3));
    out.state.v = array_vec(get<ArrayValue>(m, 4, "velocity"));
    out.state.w = array_vec(get<ArrayValue>(m, 5, "angular_velocity"));
    return out;
}

dynamics::ControlCommand decode_command(const Message& m) {
    dynamics::ControlCommand c;
    c.step_id = get<std::uint64_t>(m, 0, "step_id");
    c.t_cmd = get<std::uint64_t>(m, 1, "t_cmd");
    const std::uint8_t mode = get<std::uint8_t>(m, 2, "mode");
    if (mode > 1) throw SerializationError("unknown command mode " + std::to_string(mode));
    c.mode = static_cast<dynamics::CommandMode>(mode);
    const ArrayValue& r = get<ArrayValue>(m, 3, "rotor_speeds");
    for (std::size_t i = 0; i < 4; ++i) c.rotor_speeds[i] = r.at<double>(i);
    c.thrust = get<double>(m, 4, "thrust");
    c.torque = array_vec(get<ArrayValue>(m, 5, "torque"));
    return c;
}

BundleMessages encode_bundle(const ObservationBundle& b) {
    return BundleMessages{encode_intensity(b.step_id, b.intensity), encode_depth(b.step_id, b.depth),
                          encode_events(b.step_id, b.t_prev, b.t, b.events), encode_imu(b.step_id, b.imu),
                          encode_pose(b.step_id, b.state)};
}

std::uint64_t bundle_digest(const ObservationBundle& bundle, std::uint64_t seed) {
    const BundleMessages m = encode_bundle(bundle);
    const std::pair<const Message*, const MessageSchema*> parts[] = {{&m.intensity, &intensity_schema()},
                                                                     {&m.depth, &depth_schema()},
                                                                     {&m.events, &events_schema()},
                                                                     {&m.imu, &imu_schema()},
                                                                     {&m.pose, &pose_schema()}};
    std::uint64_t h = seed;
    for (const auto& [message, schema] : parts) {
        for (std::byte b : msg::serialize(*message, *schema)) {
            h ^= static_cast<std::uint64_t>(b);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

}  // namespace evsim::sim::wire
