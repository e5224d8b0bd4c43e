#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "evsim/msg/schema.hpp"

namespace evsim::msg {

static_assert(std::endian::native == std::endian::little, "wire encoding assumes a little-endian host");

template <class T>
struct scalar_traits;

#define EVSIM_SCALAR_TRAIT(type, tag)                        \
    template <>                                              \
    struct scalar_traits<type> {                             \
        static constexpr ScalarType value = ScalarType::tag; \
    }
EVSIM_SCALAR_TRAIT(std::uint8_t, u8);
EVSIM_SCALAR_TRAIT(std::uint16_t, u16);
EVSIM_SCALAR_TRAIT(std::uint32_t, u32);
EVSIM_SCALAR_TRAIT(std::uint64_t, u64);
EVSIM_SCALAR_TRAIT(std::int8_t, i8);
EVSIM_SCALAR_TRAIT(std::int16_t, i16);
EVSIM_SCALAR_TRAIT(std::int32_t, i32);
EVSIM_SCALAR_TRAIT(std::int64_t, i64);
EVSIM_SCALAR_TRAIT(float, f32);
EVSIM_SCALAR_TRAIT(double, f64);
EVSIM_SCALAR_TRAIT(bool, boolean);
#undef EVSIM_SCALAR_TRAIT

template <class T>
inline constexpr ScalarType scalar_type_v = scalar_traits<T>::value;

// A typed n-dimensional array. The bytes are either owned or a view into a received buffer;
// `owner` keeps the backing storage alive in both cases. Contents are immutable.
struct ArrayValue {
    ScalarType dtype = ScalarType::u8;
    std::vector<std::uint32_t> shape;
    std::shared_ptr<const void> owner;
    std::span<const std::byte> bytes;

    std::size_t element_count() const;

    static ArrayValue from_bytes(ScalarType dtype, std::vector<std::uint32_t> shape, std::vector<std::byte> data);

    template <class T>
    static ArrayValue from(std::vector<std::uint32_t> shape, const std::vector<T>& data) {
        static_assert(!std::is_same_v<T, bool>, "use std::uint8_t storage with ScalarType::boolean");
        std::vector<std::byte> raw(data.size() * sizeof(T));
        if (!raw.empty()) {
            std::memcpy(raw.data(), data.data(), raw.size());
        }
        return from_bytes(scalar_type_v<T>, std::move(shape), std::move(raw));
    }

    // Element access by memcpy; the view is not necessarily aligned for T.
    template <class T>
    T at(std::size_t index) const {
        T out;
        std::memcpy(&out, bytes.data() + index * sizeof(T), sizeof(T));
        return out;
    }

    template <class T>
    std::vector<T> to_vector() const {
        std::vector<T> out(bytes.size() / sizeof(T));
        if (!out.empty()) {
            std::memcpy(out.data(), bytes.data(), out.size() * sizeof(T));
        }
        return out;
    }

    // True when the bytes alias [begin, begin + size) rather than an owned copy.
    bool views(const void* begin, std::size_t size) const;

    friend bool operator==(const ArrayValue& a, const ArrayValue& b);
};

using Value = std::variant<bool, std::uint8_t, std::uint16_t, std::uint32_t, std::uint64_t, std::int8_t, std::int16_t,
                           std::int32_t, std::int64_t, float, double, std::string, ArrayValue>;

// Field values in schema declaration order.
struct Message {
    std::vector<Value> values;

    friend bool operator==(const Message&, const Message&) = default;
};

// Looks a field up by name; throws SchemaError when absent.
const Value& field(const MessageSchema& schema, const Message& message, std::string_view name);

template <class T>
const T& field_as(const MessageSchema& schema, const Message& message, std::string_view name) {
    return std::get<T>(field(schema, message, name));
}

}  // namespace evsim::msg
