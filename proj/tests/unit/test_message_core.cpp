#include <doctest.h>

#include <cstring>
#include <random>

#include "evsim/common/error.hpp"
#include "evsim/msg/codec.hpp"
#include "evsim/msg/frame.hpp"
#include "evsim/msg/schema.hpp"
#include "support/random_messages.hpp"

using namespace evsim::msg;

namespace {

std::vector<std::byte> bytes(std::initializer_list<int> values) {
    std::vector<std::byte> out;
    for (int v : values) out.push_back(static_cast<std::byte>(v));
    return out;
}

MessageSchema imu_schema() {
    return MessageSchema("Imu", {{"accel", FieldType::fixed(ScalarType::f32, {3})},
                                 {"gyro", FieldType::fixed(ScalarType::f32, {3})},
                                 {"t", FieldType::scalar(ScalarType::u64)}});
}

}  // namespace

TEST_CASE("FNV-1a 64 reference vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("canonical schema strings") {
    CHECK(canonical_schema_string(imu_schema()) == "Imu{accel:f32[3];gyro:f32[3];t:u64}");
    MessageSchema reordered("Imu", {{"gyro", FieldType::fixed(ScalarType::f32, {3})},
                                    {"accel", FieldType::fixed(ScalarType::f32, {3})},
                                    {"t", FieldType::scalar(ScalarType::u64)}});
    CHECK(canonical_schema_string(reordered) != canonical_schema_string(imu_schema()));
    CHECK(schema_hash(reordered) != schema_hash(imu_schema()));

    MessageSchema e("E", {{"data", FieldType::dynamic(ScalarType::f32, 1)}});
    CHECK(canonical_schema_string(e) == "E{data:f32[*]}");
    MessageSchema grid("G", {{"img", FieldType::dynamic(ScalarType::u8, 2)},
                             {"m", FieldType::fixed(ScalarType::f64, {2, 3})},
                             {"s", FieldType::string()},
                             {"ok", FieldType::scalar(ScalarType::boolean)}});
    CHECK(canonical_schema_string(grid) == "G{img:u8[*][*];m:f64[2][3];s:str;ok:bool}");
    CHECK(canonical_schema_string(MessageSchema("Empty", {})) == "Empty{}");
}

TEST_CASE("schema hash is FNV-1a of the canonical string") {
    const MessageSchema s = imu_schema();
    CHECK(schema_hash(s).value == fnv1a64("Imu{accel:f32[3];gyro:f32[3];t:u64}"));
    CHECK(s.hash() == schema_hash(s));

    MessageSchema f64("Imu", {{"accel", FieldType::fixed(ScalarType::f64, {3})},
                              {"gyro", FieldType::fixed(ScalarType::f32, {3})},
                              {"t", FieldType::scalar(ScalarType::u64)}});
    CHECK(schema_hash(f64) != schema_hash(s));

    MessageSchema renamed("Imu", {{"acc", FieldType::fixed(ScalarType::f32, {3})},
                                  {"gyro", FieldType::fixed(ScalarType::f32, {3})},
                                  {"t", FieldType::scalar(ScalarType::u64)}});
    CHECK(schema_hash(renamed) != schema_hash(s));
}

TEST_CASE("schema validation") {
    CHECK_THROWS_AS(MessageSchema("Dup", {{"a", FieldType::scalar(ScalarType::u8)}, {"a", FieldType::string()}}),
                    evsim::SchemaError);
    CHECK_THROWS_AS(MessageSchema("", {}), evsim::SchemaError);
    CHECK_THROWS_AS(MessageSchema("Bad", {{"x", FieldType::fixed(ScalarType::u8, {0})}}), evsim::SchemaError);
    CHECK_THROWS_AS(MessageSchema("Bad", {{"x", FieldType::dynamic(ScalarType::u8, 0)}}), evsim::SchemaError);
}

TEST_CASE("parse_schema inverts the canonical form") {
    for (const auto& s : evsim::testing::property_schemas()) {
        CHECK(parse_schema(s.canonical()).canonical() == s.canonical());
    }
    CHECK(parse_schema("Imu{accel:f32[3];gyro:f32[3];t:u64}") == imu_schema());
    CHECK_THROWS_WITH_AS(parse_schema("Imu{accel:f33[3]}"), doctest::Contains("offset 10"), evsim::SchemaError);
    CHECK_THROWS_AS(parse_schema("Imu{a:u8"), evsim::SchemaError);
    CHECK_THROWS_AS(parse_schema("Imu{a:u8[*][2]}"), evsim::SchemaError);
    CHECK_THROWS_AS(parse_schema("Imu{a:u8;a:u16}"), evsim::SchemaError);
    CHECK_THROWS_AS(parse_schema("Imu{a:u8} "), evsim::SchemaError);
}

TEST_CASE("scalar and array wire encodings") {
    MessageSchema one("F", {{"v", FieldType::scalar(ScalarType::f32)}});
    CHECK(serialize(Message{{1.0F}}, one) == bytes({0x00, 0x00, 0x80, 0x3F}));

    MessageSchema dyn("D", {{"v", FieldType::dynamic(ScalarType::u32, 1)}});
    const Message m{{ArrayValue::from<std::uint32_t>({3}, {1, 2, 3})}};
    CHECK(serialize(m, dyn) == bytes({0x03, 0x01, 0x03, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0}));

    MessageSchema str("S", {{"s", FieldType::string()}, {"b", FieldType::scalar(ScalarType::boolean)}});
    CHECK(serialize(Message{{std::string("hi"), true}}, str) == bytes({2, 0, 0, 0, 'h', 'i', 1}));

    MessageSchema i("I", {{"v", FieldType::scalar(ScalarType::i16)}});
    CHECK(serialize(Message{{std::int16_t{-2}}}, i) == bytes({0xFE, 0xFF}));
}

TEST_CASE("serialization rejects non-conforming values naming the field") {
    const MessageSchema s = imu_schema();
    Message wrong_shape{{ArrayValue::from<float>({2}, {1, 2}), ArrayValue::from<float>({3}, {1, 2, 3}), std::uint64_t{1}}};
    CHECK_THROWS_WITH_AS(serialize(wrong_shape, s), doctest::Contains("'accel'"), evsim::SerializationError);
    Message wrong_type{{ArrayValue::from<float>({3}, {1, 2, 3}), ArrayValue::from<float>({3}, {1, 2, 3}), 1.0}};
    CHECK_THROWS_WITH_AS(serialize(wrong_type, s), doctest::Contains("'t'"), evsim::SerializationError);
    Message wrong_dtype{{ArrayValue::from<double>({3}, {1, 2, 3}), ArrayValue::from<float>({3}, {1, 2, 3}), std::uint64_t{1}}};
    CHECK_THROWS_AS(serialize(wrong_dtype, s), evsim::SerializationError);
    CHECK_THROWS_AS(serialize(Message{}, s), evsim::SerializationError);
}

TEST_CASE("randomized round trip with exact size prediction") {
    std::mt19937_64 rng(2024);
    for (const auto& schema : evsim::testing::property_schemas()) {
        for (int i = 0; i < 1000; ++i) {
            const Message m = evsim::testing::random_message(schema, rng);
            const auto payload = serialize(m, schema);
            CHECK(payload.size() == serialized_size(m, schema));
            const Message back = deserialize(std::span<const std::byte>(payload), schema, schema.hash());
            REQUIRE(back == m);
            CHECK(serialize(back, schema) == payload);
        }
    }
}

TEST_CASE("hash gate rejects every single-bit perturbation before decoding") {
    const MessageSchema s = imu_schema();
    const Message m{{ArrayValue::from<float>({3}, {1, 2, 3}), ArrayValue::from<float>({3}, {4, 5, 6}), std::uint64_t{9}}};
    const auto payload = serialize(m, s);
    for (int bit = 0; bit < 64; ++bit) {
        const SchemaHash bad{s.hash().value ^ (1ULL << bit)};
        try {
            deserialize(std::span<const std::byte>(payload), s, bad);
            FAIL("accepted a perturbed hash");
        } catch (const evsim::TypeMismatchError& e) {
            CHECK(e.expected() == s.hash().value);
            CHECK(e.received() == bad.value);
        }
    }
    // Garbage payload with the wrong hash is still a type mismatch, never a framing error.
    const std::vector<std::byte> garbage(3, std::byte{0xFF});
    CHECK_THROWS_AS(deserialize(std::span<const std::byte>(garbage), s, SchemaHash{1}), evsim::TypeMismatchError);
}

TEST_CASE("truncated and trailing payloads are framing errors") {
    const MessageSchema s = imu_schema();
    const Message m{{ArrayValue::from<float>({3}, {1, 2, 3}), ArrayValue::from<float>({3}, {4, 5, 6}), std::uint64_t{9}}};
    auto payload = serialize(m, s);
    auto short_payload = payload;
    short_payload.pop_back();
    CHECK_THROWS_WITH_AS(deserialize(std::span<const std::byte>(short_payload), s, s.hash()), doctest::Contains("'t'"),
                         evsim::FramingError);
    auto cut_in_gyro = std::vector<std::byte>(payload.begin(), payload.begin() + 14);
    CHECK_THROWS_WITH_AS(deserialize(std::span<const std::byte>(cut_in_gyro), s, s.hash()), doctest::Contains("'gyro'"),
                         evsim::FramingError);
    payload.push_back(std::byte{0});
    CHECK_THROWS_AS(deserialize(std::span<const std::byte>(payload), s, s.hash()), evsim::FramingError);
}

TEST_CASE("shared-buffer decode exposes arrays as views into the payload") {
    const MessageSchema s = parse_schema("Frame{id:u32;pixels:f32[*][*]}");
    std::vector<float> px(12);
    for (int i = 0; i < 12; ++i) px[i] = 0.5F * i;
    const Message m{{std::uint32_t{7}, ArrayValue::from<float>({3, 4}, px)}};
    const SharedBytes buffer = SharedBytes::copy_of(serialize(m, s));
    const Message back = deserialize(buffer, s, s.hash());
    const auto& arr = std::get<ArrayValue>(back.values[1]);
    CHECK(arr.views(buffer.bytes.data(), buffer.bytes.size()));
    CHECK(arr.to_vector<float>() == px);
    CHECK(arr.at<float>(5) == 2.5F);

    // The view keeps the buffer alive after the caller drops it.
    std::weak_ptr<const void> weak = buffer.owner;
    {
        SharedBytes moved = buffer;
        (void)moved;
    }
    CHECK_FALSE(weak.expired());

    const Message copied = deserialize(buffer.bytes, s, s.hash());
    CHECK_FALSE(std::get<ArrayValue>(copied.values[1]).views(buffer.bytes.data(), buffer.bytes.size()));
    CHECK(copied == back);
}

TEST_CASE("frame layout") {
    const auto frame = frame_encode("imu", SchemaHash{0x0102030405060708ULL}, 0x1122334455667788ULL, {});
    CHECK(frame.size() == 1 + 3 + 32);
    const auto expected = bytes({3, 'i', 'm', 'u', 'C', 'T', 'X', '1', 1, 0, 0, 0,
                                 0x08, 0x07, 0x06, 0x05, 0x04, 0x03, 0x02, 0x01,
                                 0x88, 0x77, 0x66, 0x55, 0x44, 0x33, 0x22, 0x11,
                                 0, 0, 0, 0, 0, 0, 0, 0});
    CHECK(frame == expected);
    const FrameView v = frame_decode(frame);
    CHECK(v.topic == "imu");
    CHECK(v.header.schema_hash.value == 0x0102030405060708ULL);
    CHECK(v.header.publish_time_ns == 0x1122334455667788ULL);
    CHECK(v.payload.empty());
    CHECK(frame_size(frame) == frame.size());
    CHECK_FALSE(frame_size(std::span<const std::byte>(frame).first(20)).has_value());
}

TEST_CASE("frame gates and validation") {
    auto frame = frame_encode("t", SchemaHash{1}, 2, bytes({1, 2, 3}));
    auto bad_magic = frame;
    std::memcpy(bad_magic.data() + 2, "XXXX", 4);
    CHECK_THROWS_AS(frame_decode(bad_magic), evsim::ProtocolError);
    CHECK_THROWS_AS(frame_size(bad_magic), evsim::ProtocolError);
    auto bad_version = frame;
    bad_version[6] = std::byte{2};
    CHECK_THROWS_AS(frame_decode(bad_version), evsim::ProtocolError);
    auto short_frame = frame;
    short_frame.pop_back();
    CHECK_THROWS_AS(frame_decode(short_frame), evsim::FramingError);
    CHECK_THROWS_AS(frame_encode(std::string(256, 'a'), SchemaHash{1}, 0, {}), evsim::ValidationError);
    CHECK_NOTHROW(frame_encode(std::string(255, 'a'), SchemaHash{1}, 0, {}));
}

TEST_CASE("frame encode/decode is identity on random inputs") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> len(0, 255);
    std::uniform_int_distribution<int> plen(0, 300);
    std::uniform_int_distribution<std::uint64_t> u64;
    for (int i = 0; i < 500; ++i) {
        std::string topic(static_cast<std::size_t>(len(rng)), 'a');
        for (auto& c : topic) c = static_cast<char>('a' + u64(rng) % 26);
        std::vector<std::byte> payload(static_cast<std::size_t>(plen(rng)));
        for (auto& b : payload) b = static_cast<std::byte>(u64(rng));
        const SchemaHash h{u64(rng)};
        const std::uint64_t t = u64(rng);
        const auto flags = static_cast<std::uint8_t>(u64(rng));
        const auto frame = frame_encode(topic, h, t, payload, flags);
        const FrameView v = frame_decode(frame);
        CHECK(v.topic == topic);
        CHECK(v.header.schema_hash == h);
        CHECK(v.header.publish_time_ns == t);
        CHECK(v.header.flags == flags);
        CHECK(std::vector<std::byte>(v.payload.begin(), v.payload.end()) == payload);
    }
}
