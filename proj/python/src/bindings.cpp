#include <cstring>
#include <memory>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "evsim/common/error.hpp"
#include "evsim/events/aggregation.hpp"
#include "evsim/events/event_model.hpp"
#include "evsim/metrics/depth.hpp"
#include "evsim/msg/codec.hpp"
#include "evsim/msg/frame.hpp"
#include "evsim/msg/schema.hpp"
#include "evsim/net/discovery.hpp"
#include "evsim/render/scene.hpp"
#include "evsim/sim/config.hpp"
#include "evsim/sim/simulator.hpp"
#include "evsim/sim/wire.hpp"

namespace py = pybind11;
using namespace evsim;

namespace {

template <class T>
using CArray = py::array_t<T, py::array::c_style | py::array::forcecast>;

py::array_t<events::Event> events_to_numpy(const std::vector<events::Event>& ev) {
    py::array_t<events::Event> out(static_cast<py::ssize_t>(ev.size()));
    if (!ev.empty()) {
        std::memcpy(out.mutable_data(), ev.data(), ev.size() * sizeof(events::Event));
    }
    return out;
}

std::vector<events::Event> events_from_numpy(const py::array_t<events::Event, py::array::c_style>& arr) {
    std::vector<events::Event> ev(static_cast<std::size_t>(arr.size()));
    if (!ev.empty()) {
        std::memcpy(ev.data(), arr.data(), ev.size() * sizeof(events::Event));
    }
    return ev;
}

template <class T>
py::array_t<T> image_to_numpy(std::uint32_t width, std::uint32_t height, const std::vector<T>& values) {
    py::array_t<T> out({static_cast<py::ssize_t>(height), static_cast<py::ssize_t>(width)});
    std::memcpy(out.mutable_data(), values.data(), values.size() * sizeof(T));
    return out;
}

events::IntensityFrame frame_from_numpy(const CArray<float>& img, events::Timestamp t) {
    if (img.ndim() != 2) {
        throw ValidationError("intensity frame must be a 2-D array");
    }
    events::IntensityFrame frame(static_cast<std::uint32_t>(img.shape(1)), static_cast<std::uint32_t>(img.shape(0)), t);
    std::memcpy(frame.values.data(), img.data(), frame.values.size() * sizeof(float));
    return frame;
}

metrics::DisparityMap map_from_numpy(const CArray<double>& img) {
    if (img.ndim() != 2) {
        throw ValidationError("disparity map must be a 2-D array");
    }
    metrics::DisparityMap map(static_cast<std::uint32_t>(img.shape(1)), static_cast<std::uint32_t>(img.shape(0)));
    std::memcpy(map.values.data(), img.data(), map.values.size() * sizeof(double));
    return map;
}

Vec3 vec3(const std::vector<double>& v) {
    if (v.size() != 3) {
        throw ValidationError("expected 3 components");
    }
    return {v[0], v[1], v[2]};
}

Quat quat_wxyz(const std::vector<double>& q) {
    if (q.size() != 4) {
        throw ValidationError("expected quaternion (w, x, y, z)");
    }
    return {q[0], q[1], q[2], q[3]};
}

py::tuple vec_tuple(const Vec3& v) { return py::make_tuple(v.x(), v.y(), v.z()); }
py::tuple quat_tuple(const Quat& q) { return py::make_tuple(q.w(), q.x(), q.y(), q.z()); }

py::dict state_to_dict(const dynamics::VehicleState& s) {
    py::dict d;
    d["t"] = s.t;
    d["p"] = vec_tuple(s.p);
    d["v"] = vec_tuple(s.v);
    d["q"] = quat_tuple(s.q);
    d["w"] = vec_tuple(s.w);
    return d;
}

// Generic message values <-> Python objects.

py::dtype numpy_dtype(msg::ScalarType t) {
    switch (t) {
        case msg::ScalarType::u8: return py::dtype::of<std::uint8_t>();
        case msg::ScalarType::u16: return py::dtype::of<std::uint16_t>();
        case msg::ScalarType::u32: return py::dtype::of<std::uint32_t>();
        case msg::ScalarType::u64: return py::dtype::of<std::uint64_t>();
        case msg::ScalarType::i8: return py::dtype::of<std::int8_t>();
        case msg::ScalarType::i16: return py::dtype::of<std::int16_t>();
        case msg::ScalarType::i32: return py::dtype::of<std::int32_t>();
        case msg::ScalarType::i64: return py::dtype::of<std::int64_t>();
        case msg::ScalarType::f32: return py::dtype::of<float>();
        case msg::ScalarType::f64: return py::dtype::of<double>();
        case msg::ScalarType::boolean: return py::dtype::of<bool>();
    }
    throw SchemaError("unknown scalar type");
}

py::object value_to_py(const msg::Value& value) {
    return std::visit(
        [](const auto& v) -> py::object {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, msg::ArrayValue>) {
                std::vector<py::ssize_t> shape(v.shape.begin(), v.shape.end());
                py::array out(numpy_dtype(v.dtype), shape);
                if (!v.bytes.empty()) {
                    std::memcpy(out.mutable_data(), v.bytes.data(), v.bytes.size());
                }
                return std::move(out);
            } else {
                return py::cast(v);
            }
        },
        value);
}

template <class T>
msg::ArrayValue array_of(const py::handle& obj) {
    auto arr = CArray<T>::ensure(obj);
    if (!arr) {
        throw SerializationError("field value is not convertible to an array");
    }
    std::vector<std::uint32_t> shape;
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) {
        shape.push_back(static_cast<std::uint32_t>(arr.shape(i)));
    }
    std::vector<std::byte> raw(static_cast<std::size_t>(arr.size()) * sizeof(T));
    if (!raw.empty()) {
        std::memcpy(raw.data(), arr.data(), raw.size());
    }
    return msg::ArrayValue::from_bytes(msg::scalar_type_v<T>, std::move(shape), std::move(raw));
}

msg::ArrayValue array_from_py(msg::ScalarType t, const py::handle& obj) {
    switch (t) {
        case msg::ScalarType::u8: return array_of<std::uint8_t>(obj);
        case msg::ScalarType::u16: return array_of<std::uint16_t>(obj);
        case msg::ScalarType::u32: return array_of<std::uint32_t>(obj);
        case msg::ScalarType::u64: return array_of<std::uint64_t>(obj);
        case msg::ScalarType::i8: return array_of<std::int8_t>(obj);
        case msg::ScalarType::i16: return array_of<std::int16_t>(obj);
        case msg::ScalarType::i32: return array_of<std::int32_t>(obj);
        case msg::ScalarType::i64: return array_of<std::int64_t>(obj);
        case msg::ScalarType::f32: return array_of<float>(obj);
        case msg::ScalarType::f64: return array_of<double>(obj);
        case msg::ScalarType::boolean: {
            auto a = array_of<bool>(obj);
            a.dtype = msg::ScalarType::boolean;
            return a;
        }
    }
    throw SchemaError("unknown scalar type");
}

msg::Value scalar_from_py(msg::ScalarType t, const py::handle& obj) {
    switch (t) {
        case msg::ScalarType::u8: return obj.cast<std::uint8_t>();
        case msg::ScalarType::u16: return obj.cast<std::uint16_t>();
        case msg::ScalarType::u32: return obj.cast<std::uint32_t>();
        case msg::ScalarType::u64: return obj.cast<std::uint64_t>();
        case msg::ScalarType::i8: return obj.cast<std::int8_t>();
        case msg::ScalarType::i16: return obj.cast<std::int16_t>();
        case msg::ScalarType::i32: return obj.cast<std::int32_t>();
        case msg::ScalarType::i64: return obj.cast<std::int64_t>();
        case msg::ScalarType::f32: return obj.cast<float>();
        case msg::ScalarType::f64: return obj.cast<double>();
        case msg::ScalarType::boolean: return obj.cast<bool>();
    }
    throw SchemaError("unknown scalar type");
}

msg::Message message_from_dict(const msg::MessageSchema& schema, const py::dict& values) {
    msg::Message m;
    for (const auto& f : schema.fields()) {
        if (!values.contains(f.name.c_str())) {
            throw SerializationError("missing field '" + f.name + "'");
        }
        py::handle obj = values[f.name.c_str()];
        try {
            switch (f.type.kind) {
                case msg::FieldType::Kind::scalar: m.values.push_back(scalar_from_py(f.type.element, obj)); break;
                case msg::FieldType::Kind::string: m.values.emplace_back(obj.cast<std::string>()); break;
                default: m.values.emplace_back(array_from_py(f.type.element, obj)); break;
            }
        } catch (const py::cast_error&) {
            throw SerializationError("field '" + f.name + "' has the wrong type");
        }
    }
    return m;
}

py::dict message_to_dict(const msg::MessageSchema& schema, const msg::Message& m) {
    py::dict out;
    for (std::size_t i = 0; i < schema.fields().size(); ++i) {
        out[schema.fields()[i].name.c_str()] = value_to_py(m.values[i]);
    }
    return out;
}

std::span<const std::byte> byte_span(const py::bytes& b, std::string_view& holder) {
    holder = b;
    return {reinterpret_cast<const std::byte*>(holder.data()), holder.size()};
}

py::bytes to_bytes(std::span<const std::byte> data) {
    return {reinterpret_cast<const char*>(data.data()), data.size()};
}

struct PyEventSimulator {
    events::EventCameraConfig config;
    events::PixelStateGrid state;
    std::unique_ptr<events::ChunkedEventGenerator> parallel;
    events::Timestamp t_last = 0;
    std::uint64_t dropped = 0;

    py::array_t<events::Event> step(const CArray<float>& img, events::Timestamp t) {
        const auto frame = frame_from_numpy(img, t);
        if (t <= t_last) {
            throw ValidationError("frame timestamps must increase");
        }
        auto batch = parallel ? parallel->generate(state, frame, t_last, t, config)
                              : events::generate_events_serial(state, frame, t_last, t, config);
        t_last = t;
        dropped = batch.dropped_count;
        return events_to_numpy(batch.events);
    }
};

py::dict bundle_to_dict(const sim::ObservationBundle& b) {
    py::dict d;
    d["step_id"] = b.step_id;
    d["t_prev"] = b.t_prev;
    d["t"] = b.t;
    d["intensity"] = image_to_numpy(b.intensity.width, b.intensity.height, b.intensity.values);
    d["depth"] = image_to_numpy(b.depth.width, b.depth.height, b.depth.values);
    d["events"] = events_to_numpy(b.events.events);
    d["dropped"] = b.events.dropped_count;
    py::array_t<std::uint64_t> imu_t(static_cast<py::ssize_t>(b.imu.size()));
    py::array_t<double> accel({static_cast<py::ssize_t>(b.imu.size()), py::ssize_t{3}});
    py::array_t<double> gyro({static_cast<py::ssize_t>(b.imu.size()), py::ssize_t{3}});
    auto ti = imu_t.mutable_unchecked<1>();
    auto ai = accel.mutable_unchecked<2>();
    auto gi = gyro.mutable_unchecked<2>();
    for (std::size_t i = 0; i < b.imu.size(); ++i) {
        const auto k = static_cast<py::ssize_t>(i);
        ti(k) = b.imu[i].t;
        for (py::ssize_t c = 0; c < 3; ++c) {
            ai(k, c) = b.imu[i].accel[c];
            gi(k, c) = b.imu[i].gyro[c];
        }
    }
    py::dict imu;
    imu["t"] = imu_t;
    imu["accel"] = accel;
    imu["gyro"] = gyro;
    d["imu"] = imu;
    d["state"] = state_to_dict(b.state);
    d["digest"] = sim::wire::bundle_digest(b);
    return d;
}

}  // namespace

PYBIND11_MODULE(_evsim, m) {
    m.doc() = "Event-camera simulator core";

    PYBIND11_NUMPY_DTYPE_EX(events::Event, t, "t", x, "x", y, "y", polarity, "p");

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<IntegrationError>(m, "IntegrationError", PyExc_RuntimeError);
    py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
    py::register_exception<SerializationError>(m, "SerializationError", PyExc_ValueError);
    py::register_exception<FramingError>(m, "FramingError", PyExc_ValueError);
    py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_ValueError);
    py::register_exception<ConnectivityError>(m, "ConnectivityError", PyExc_ConnectionError);
    py::register_exception<TypeMismatchError>(m, "TypeMismatchError", PyExc_TypeError);

    m.attr("event_dtype") = py::dtype::of<events::Event>();

    py::class_<PyEventSimulator>(m, "EventSimulator")
        .def(py::init([](const CArray<float>& frame0, events::Timestamp t0, double c_pos, double c_neg,
                         double sigma_c, events::Timestamp refractory_us, double log_eps,
                         std::optional<std::size_t> max_events_per_frame, std::uint64_t seed, unsigned workers) {
                 auto sim = std::make_unique<PyEventSimulator>();
                 sim->config.c_pos = c_pos;
                 sim->config.c_neg = c_neg;
                 sim->config.sigma_c = sigma_c;
                 sim->config.refractory_us = refractory_us;
                 sim->config.log_eps = log_eps;
                 sim->config.max_events_per_frame = max_events_per_frame;
                 sim->config.validate();
                 if (workers == 0) {
                     throw ValidationError("workers must be at least 1");
                 }
                 const auto frame = frame_from_numpy(frame0, t0);
                 sim->state = events::init_pixel_states(frame, sim->config, seed);
                 sim->t_last = t0;
                 if (workers > 1) {
                     sim->parallel = std::make_unique<events::ChunkedEventGenerator>(workers);
                 }
                 return sim;
             }),
             py::arg("frame0"), py::arg("t0_us") = 0, py::arg("c_pos") = 0.2, py::arg("c_neg") = 0.2,
             py::arg("sigma_c") = 0.0, py::arg("refractory_us") = 0, py::arg("log_eps") = 0.01,
             py::arg("max_events_per_frame") = py::none(), py::arg("seed") = 0, py::arg("workers") = 1)
        .def("step", &PyEventSimulator::step, py::arg("frame"), py::arg("t_us"),
             "Events for the interval since the previous frame.")
        .def_property_readonly("dropped", [](const PyEventSimulator& s) { return s.dropped; })
        .def_property_readonly("t_last", [](const PyEventSimulator& s) { return s.t_last; });

    m.def("canonical_sort", [](const py::array_t<events::Event, py::array::c_style>& ev) {
        events::EventBatch batch{events_from_numpy(ev), 0};
        return events_to_numpy(events::canonical_sort(std::move(batch)).events);
    });

    m.def(
        "accumulate_events",
        [](const py::array_t<events::Event, py::array::c_style>& ev, events::Timestamp window_us,
           events::Timestamp t_end, std::uint32_t width, std::uint32_t height) {
            events::EventBatch batch{events_from_numpy(ev), 0};
            return image_to_numpy(width, height,
                                  events::accumulate_events_to_image(batch, window_us, t_end, width, height));
        },
        py::arg("events"), py::arg("window_us"), py::arg("t_end"), py::arg("width"), py::arg("height"));

    m.def(
        "render",
        [](const std::string& scene_json, const std::vector<double>& position, const std::vector<double>& quat,
           double fx, double fy, double cx, double cy, std::uint32_t width, std::uint32_t height) {
            const auto scene = scene_json.empty() ? sim::default_scene()
                                                  : sim::scene_from_json(nlohmann::json::parse(scene_json));
            render::CameraIntrinsics K{fx, fy, cx, cy, width, height};
            Pose pose;
            pose.position = vec3(position);
            pose.orientation = quat_wxyz(quat);
            const auto view = render::render_view(scene, pose, K);
            return py::make_tuple(image_to_numpy(width, height, view.intensity.values),
                                  image_to_numpy(width, height, view.depth.values));
        },
        py::arg("scene_json"), py::arg("position"), py::arg("orientation"), py::arg("fx"), py::arg("fy"),
        py::arg("cx"), py::arg("cy"), py::arg("width"), py::arg("height"));

    m.def(
        "look_at",
        [](const std::vector<double>& eye, const std::vector<double>& target, const std::vector<double>& up) {
            const auto pose = render::look_at(vec3(eye), vec3(target), vec3(up));
            return py::make_tuple(vec_tuple(pose.position), quat_tuple(pose.orientation));
        },
        py::arg("eye"), py::arg("target"), py::arg("up") = std::vector<double>{0.0, 0.0, 1.0});

    m.def("default_scene_json", [] { return sim::scene_to_json(sim::default_scene()).dump(); });
    m.def("default_config_json", [] { return sim::config_to_json(sim::SimConfig{}).dump(); });

    py::class_<sim::Simulator>(m, "Simulator")
        .def(py::init([](const std::string& config_json) {
                 auto cfg = config_json.empty() ? sim::SimConfig{}
                                                : sim::config_from_json(nlohmann::json::parse(config_json));
                 return std::make_unique<sim::Simulator>(std::move(cfg));
             }),
             py::arg("config_json") = "")
        .def("step", [](sim::Simulator& s) { return bundle_to_dict(s.step_once()); })
        .def(
            "set_command",
            [](sim::Simulator& s, double thrust, const std::vector<double>& torque, std::uint64_t step_id) {
                dynamics::ControlCommand cmd;
                cmd.mode = dynamics::CommandMode::wrench;
                cmd.thrust = thrust;
                cmd.torque = vec3(torque);
                cmd.step_id = step_id;
                s.set_command(cmd);
            },
            py::arg("thrust"), py::arg("torque") = std::vector<double>{0.0, 0.0, 0.0}, py::arg("step_id") = 0)
        .def_property_readonly("state", [](const sim::Simulator& s) { return state_to_dict(s.state()); })
        .def_property_readonly("time_us", &sim::Simulator::time)
        .def_property_readonly("next_step_id", &sim::Simulator::next_step_id)
        .def_property_readonly("config_json", [](const sim::Simulator& s) { return sim::config_to_json(s.config()).dump(); });

    m.def(
        "hover_thrust",
        [](double mass, double g) {
            dynamics::VehicleParams p;
            p.mass = mass;
            p.g = g;
            return dynamics::ControlCommand::hover(p).thrust;
        },
        py::arg("mass") = dynamics::VehicleParams{}.mass, py::arg("g") = dynamics::kStandardGravity);

    py::class_<msg::MessageSchema>(m, "Schema")
        .def(py::init([](const std::string& decl) { return msg::parse_schema(decl); }), py::arg("declaration"))
        .def_property_readonly("name", &msg::MessageSchema::name)
        .def_property_readonly("canonical", &msg::MessageSchema::canonical)
        .def_property_readonly("hash", [](const msg::MessageSchema& s) { return s.hash().value; })
        .def_property_readonly("fields",
                               [](const msg::MessageSchema& s) {
                                   std::vector<std::string> names;
                                   for (const auto& f : s.fields()) {
                                       names.push_back(f.name);
                                   }
                                   return names;
                               })
        .def("encode",
             [](const msg::MessageSchema& s, const py::dict& values) {
                 return to_bytes(msg::serialize(message_from_dict(s, values), s));
             })
        .def(
            "decode",
            [](const msg::MessageSchema& s, const py::bytes& payload, std::optional<std::uint64_t> header_hash) {
                std::string_view holder;
                const auto span = byte_span(payload, holder);
                const auto msgv = msg::deserialize(span, s, msg::SchemaHash{header_hash.value_or(s.hash().value)});
                return message_to_dict(s, msgv);
            },
            py::arg("payload"), py::arg("header_hash") = py::none())
        .def("__repr__", [](const msg::MessageSchema& s) { return "<Schema " + s.canonical() + ">"; });

    m.def("fnv1a64", [](const py::bytes& b) {
        std::string_view holder;
        return msg::fnv1a64(byte_span(b, holder));
    });

    m.def(
        "frame_encode",
        [](const std::string& topic, std::uint64_t schema_hash, std::uint64_t publish_time_ns, const py::bytes& payload,
           std::uint8_t flags) {
            std::string_view holder;
            return to_bytes(msg::frame_encode(topic, msg::SchemaHash{schema_hash}, publish_time_ns,
                                              byte_span(payload, holder), flags));
        },
        py::arg("topic"), py::arg("schema_hash"), py::arg("publish_time_ns"), py::arg("payload"), py::arg("flags") = 0);

    m.def("frame_decode", [](const py::bytes& frame) {
        std::string_view holder;
        const auto view = msg::frame_decode(byte_span(frame, holder));
        py::dict d;
        d["topic"] = std::string(view.topic);
        d["flags"] = view.header.flags;
        d["schema_hash"] = view.header.schema_hash.value;
        d["publish_time_ns"] = view.header.publish_time_ns;
        d["payload"] = to_bytes(view.payload);
        return d;
    });

    m.def("wire_schemas", [] {
        py::dict d;
        d["intensity"] = sim::wire::intensity_schema().canonical();
        d["depth"] = sim::wire::depth_schema().canonical();
        d["events"] = sim::wire::events_schema().canonical();
        d["imu"] = sim::wire::imu_schema().canonical();
        d["pose"] = sim::wire::pose_schema().canonical();
        d["command"] = sim::wire::command_schema().canonical();
        return d;
    });

    m.def("normalize_disparity", [](const CArray<double>& d) {
        const auto n = metrics::normalize_disparity(map_from_numpy(d));
        return image_to_numpy(n.width, n.height, n.values);
    });
    m.def(
        "silog_loss",
        [](const CArray<double>& d, const CArray<double>& d_star) {
            return metrics::silog_loss(map_from_numpy(d), map_from_numpy(d_star));
        },
        py::arg("d"), py::arg("d_star"));
    m.def(
        "gradient_regularizer",
        [](const CArray<double>& d_n, const CArray<double>& d_star_n, unsigned scales) {
            return metrics::gradient_regularizer(map_from_numpy(d_n), map_from_numpy(d_star_n), scales);
        },
        py::arg("d_n"), py::arg("d_star_n"), py::arg("num_scales") = metrics::kDefaultScales);
    m.def(
        "depth_objective",
        [](const CArray<double>& d, const CArray<double>& d_star, double lambda, unsigned scales) {
            return metrics::depth_objective(map_from_numpy(d), map_from_numpy(d_star), lambda, scales);
        },
        py::arg("d"), py::arg("d_star"), py::arg("lam") = 1.0, py::arg("num_scales") = metrics::kDefaultScales);
    m.def(
        "depth_objective_gradient",
        [](const CArray<double>& d, const CArray<double>& d_star, double lambda, unsigned scales) {
            const auto g = metrics::depth_objective_gradient(map_from_numpy(d), map_from_numpy(d_star), lambda, scales);
            return image_to_numpy(g.width, g.height, g.values);
        },
        py::arg("d"), py::arg("d_star"), py::arg("lam") = 1.0, py::arg("num_scales") = metrics::kDefaultScales);

    py::class_<net::DiscoveryDaemon>(m, "DiscoveryDaemon")
        .def(py::init([](const std::string& host, std::uint16_t port, double lease_ttl) {
                 net::DaemonOptions o;
                 o.host = host;
                 o.port = port;
                 o.lease_ttl = lease_ttl;
                 return std::make_unique<net::DiscoveryDaemon>(o);
             }),
             py::arg("host") = "127.0.0.1", py::arg("port") = 0, py::arg("lease_ttl") = net::kDefaultLeaseTtl)
        .def_property_readonly("port", &net::DiscoveryDaemon::port)
        .def_property_readonly("address", &net::DiscoveryDaemon::address)
        .def("node_count", &net::DiscoveryDaemon::node_count)
        .def("stop", &net::DiscoveryDaemon::stop, py::call_guard<py::gil_scoped_release>());

    m.attr("DEFAULT_DISCOVERY_PORT") = net::kDefaultDiscoveryPort;
}
