#pragma once

// Message type declarations and their canonical 64-bit fingerprint.
//
// Canonical text form, also accepted by parse_schema:
//   Name{field:code;field:code[3][4];field:code[*][*]}
// Scalar codes: u8 u16 u32 u64 i8 i16 i32 i64 f32 f64 bool; strings are `str`.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evsim::msg {

// Values double as the dtype byte of dynamic arrays on the wire.
enum class ScalarType : std::uint8_t {
    u8 = 0x01,
    u16 = 0x02,
    u32 = 0x03,
    u64 = 0x04,
    i8 = 0x05,
    i16 = 0x06,
    i32 = 0x07,
    i64 = 0x08,
    f32 = 0x09,
    f64 = 0x0A,
    boolean = 0x0B,
};

std::string_view type_code(ScalarType type);
std::size_t scalar_size(ScalarType type);
std::optional<ScalarType> scalar_from_code(std::string_view code);
std::optional<ScalarType> scalar_from_dtype(std::uint8_t dtype);

struct FieldType {
    enum class Kind : std::uint8_t { scalar, string, fixed_array, dynamic_array };

    Kind kind = Kind::scalar;
    ScalarType element = ScalarType::u8;
    std::vector<std::uint32_t> dims;  // fixed_array only
    std::uint8_t rank = 0;            // dynamic_array only

    static FieldType scalar(ScalarType t) { return FieldType{Kind::scalar, t, {}, 0}; }
    static FieldType string() { return FieldType{Kind::string, ScalarType::u8, {}, 0}; }
    static FieldType fixed(ScalarType t, std::vector<std::uint32_t> shape) {
        return FieldType{Kind::fixed_array, t, std::move(shape), 0};
    }
    static FieldType dynamic(ScalarType t, std::uint8_t rank) { return FieldType{Kind::dynamic_array, t, {}, rank}; }

    friend bool operator==(const FieldType&, const FieldType&) = default;
};

struct Field {
    std::string name;
    FieldType type;

    friend bool operator==(const Field&, const Field&) = default;
};

struct SchemaHash {
    std::uint64_t value = 0;

    friend bool operator==(SchemaHash, SchemaHash) = default;
};

class MessageSchema {
public:
    MessageSchema() = default;
    // Throws SchemaError on an empty/invalid name, duplicate field names or degenerate shapes.
    MessageSchema(std::string name, std::vector<Field> fields);

    const std::string& name() const { return name_; }
    const std::vector<Field>& fields() const { return fields_; }
    std::optional<std::size_t> index_of(std::string_view field) const;

    const std::string& canonical() const { return canonical_; }
    SchemaHash hash() const { return hash_; }

    friend bool operator==(const MessageSchema& a, const MessageSchema& b) { return a.canonical_ == b.canonical_; }

private:
    std::string name_;
    std::vector<Field> fields_;
    std::string canonical_;
    SchemaHash hash_;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64(std::span<const std::byte> bytes);

std::string canonical_schema_string(const MessageSchema& schema);
SchemaHash schema_hash(const MessageSchema& schema);

// Parses the canonical text form. Throws SchemaError with the offending position.
MessageSchema parse_schema(std::string_view declaration);

}  // namespace evsim::msg
