#include "evsim/msg/codec.hpp"

#include <limits>
#include <string>

#include "evsim/common/error.hpp"

namespace evsim::msg {

std::size_t ArrayValue::element_count() const {
    std::size_t n = 1;
    for (std::uint32_t d : shape) {
        n *= d;
    }
    return n;
}

ArrayValue ArrayValue::from_bytes(ScalarType dtype, std::vector<std::uint32_t> shape, std::vector<std::byte> data) {
    auto storage = std::make_shared<const std::vector<std::byte>>(std::move(data));
    ArrayValue out;
    out.dtype = dtype;
    out.shape = std::move(shape);
    out.bytes = std::span<const std::byte>(storage->data(), storage->size());
    out.owner = std::move(storage);
    return out;
}

bool ArrayValue::views(const void* begin, std::size_t size) const {
    const auto* lo = static_cast<const std::byte*>(begin);
    return !bytes.empty() && bytes.data() >= lo && bytes.data() + bytes.size() <= lo + size;
}

bool operator==(const ArrayValue& a, const ArrayValue& b) {
    return a.dtype == b.dtype && a.shape == b.shape && a.bytes.size() == b.bytes.size() &&
           (a.bytes.empty() || std::memcmp(a.bytes.data(), b.bytes.data(), a.bytes.size()) == 0);
}

const Value& field(const MessageSchema& schema, const Message& message, std::string_view name) {
    const auto index = schema.index_of(name);
    if (!index || *index >= message.values.size()) {
        throw SchemaError("message " + schema.name() + " has no field '" + std::string(name) + "'");
    }
    return message.values[*index];
}

SharedBytes SharedBytes::copy_of(std::span<const std::byte> data) {
    auto storage = std::make_shared<const std::vector<std::byte>>(data.begin(), data.end());
    SharedBytes out;
    out.bytes = std::span<const std::byte>(storage->data(), storage->size());
    out.owner = std::move(storage);
    return out;
}

namespace {

[[noreturn]] void mismatch(const Field& f, const std::string& what) {
    throw SerializationError("field '" + f.name + "': " + what);
}

bool scalar_matches(const Value& v, ScalarType t) {
    switch (t) {
        case ScalarType::u8: return std::holds_alternative<std::uint8_t>(v);
        case ScalarType::u16: return std::holds_alternative<std::uint16_t>(v);
        case ScalarType::u32: return std::holds_alternative<std::uint32_t>(v);
        case ScalarType::u64: return std::holds_alternative<std::uint64_t>(v);
        case ScalarType::i8: return std::holds_alternative<std::int8_t>(v);
        case ScalarType::i16: return std::holds_alternative<std::int16_t>(v);
        case ScalarType::i32: return std::holds_alternative<std::int32_t>(v);
        case ScalarType::i64: return std::holds_alternative<std::int64_t>(v);
        case ScalarType::f32: return std::holds_alternative<float>(v);
        case ScalarType::f64: return std::holds_alternative<double>(v);
        case ScalarType::boolean: return std::holds_alternative<bool>(v);
    }
    return false;
}

// Validates one field value and returns its encoded size.
std::size_t checked_size(const Field& f, const Value& v) {
    const FieldType& type = f.type;
    switch (type.kind) {
        case FieldType::Kind::scalar:
            if (!scalar_matches(v, type.element)) {
                mismatch(f, std::string("expected scalar ") + std::string(type_code(type.element)));
            }
            return scalar_size(type.element);
        case FieldType::Kind::string: {
            const auto* s = std::get_if<std::string>(&v);
            if (s == nullptr) {
                mismatch(f, "expected string");
            }
            if (s->size() > std::numeric_limits<std::uint32_t>::max()) {
                mismatch(f, "string too long");
            }
            return 4 + s->size();
        }
        case FieldType::Kind::fixed_array:
        case FieldType::Kind::dynamic_array: {
            const auto* a = std::get_if<ArrayValue>(&v);
            if (a == nullptr) {
                mismatch(f, "expected array");
            }
            if (a->dtype != type.element) {
                mismatch(f, std::string("array dtype ") + std::string(type_code(a->dtype)) + " does not match " +
                                std::string(type_code(type.element)));
            }
            if (a->bytes.size() != a->element_count() * scalar_size(a->dtype)) {
                mismatch(f, "array byte length does not match its shape");
            }
            if (type.kind == FieldType::Kind::fixed_array) {
                if (a->shape != type.dims) {
                    mismatch(f, "array shape does not match the fixed schema shape");
                }
                return a->bytes.size();
            }
            if (a->shape.size() != type.rank) {
                mismatch(f, "array rank " + std::to_string(a->shape.size()) + " does not match schema rank " +
                                std::to_string(type.rank));
            }
            return 2 + 4 * a->shape.size() + a->bytes.size();
        }
    }
    return 0;
}

template <class T>
void put(std::vector<std::byte>& out, T value) {
    const auto at = out.size();
    out.resize(at + sizeof(T));
    std::memcpy(out.data() + at, &value, sizeof(T));
}

void put_bytes(std::vector<std::byte>& out, std::span<const std::byte> data) {
    out.insert(out.end(), data.begin(), data.end());
}

void encode_scalar(std::vector<std::byte>& out, const Value& v) {
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, bool>) {
                put<std::uint8_t>(out, x ? 1 : 0);
            } else if constexpr (std::is_arithmetic_v<T>) {
                put<T>(out, x);
            }
        },
        v);
}

class Reader {
public:
    Reader(std::span<const std::byte> data, const MessageSchema& schema) : data_(data), schema_(schema) {}

    std::span<const std::byte> take(std::size_t n, const Field& f) {
        if (data_.size() - pos_ < n) {
            throw FramingError("payload of " + schema_.name() + " truncated while reading field '" + f.name +
                               "' (needed " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                               ", " + std::to_string(data_.size() - pos_) + " left)");
        }
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    template <class T>
    T read(const Field& f) {
        T out;
        std::memcpy(&out, take(sizeof(T), f).data(), sizeof(T));
        return out;
    }

    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::span<const std::byte> data_;
    const MessageSchema& schema_;
    std::size_t pos_ = 0;
};

Value decode_scalar(Reader& r, const Field& f) {
    switch (f.type.element) {
        case ScalarType::u8: return r.read<std::uint8_t>(f);
        case ScalarType::u16: return r.read<std::uint16_t>(f);
        case ScalarType::u32: return r.read<std::uint32_t>(f);
        case ScalarType::u64: return r.read<std::uint64_t>(f);
        case ScalarType::i8: return r.read<std::int8_t>(f);
        case ScalarType::i16: return r.read<std::int16_t>(f);
        case ScalarType::i32: return r.read<std::int32_t>(f);
        case ScalarType::i64: return r.read<std::int64_t>(f);
        case ScalarType::f32: return r.read<float>(f);
        case ScalarType::f64: return r.read<double>(f);
        case ScalarType::boolean: {
            const auto b = r.read<std::uint8_t>(f);
            if (b > 1) {
                throw SerializationError("field '" + f.name + "': bool byte must be 0 or 1");
            }
            return b == 1;
        }
    }
    throw SerializationError("field '" + f.name + "': unknown scalar type");
}

Message decode(const SharedBytes* shared, std::span<const std::byte> payload, const MessageSchema& schema,
               SchemaHash header_hash) {
    if (header_hash != schema.hash()) {
        throw TypeMismatchError(schema.hash().value, header_hash.value);
    }
    Reader r(payload, schema);
    Message m;
    m.values.reserve(schema.fields().size());
    for (const Field& f : schema.fields()) {
        switch (f.type.kind) {
            case FieldType::Kind::scalar:
                m.values.push_back(decode_scalar(r, f));
                break;
            case FieldType::Kind::string: {
                const auto len = r.read<std::uint32_t>(f);
                const auto bytes = r.take(len, f);
                m.values.emplace_back(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
                break;
            }
            case FieldType::Kind::fixed_array:
            case FieldType::Kind::dynamic_array: {
                ArrayValue a;
                a.dtype = f.type.element;
                if (f.type.kind == FieldType::Kind::fixed_array) {
                    a.shape = f.type.dims;
                } else {
                    const auto dtype = r.read<std::uint8_t>(f);
                    if (dtype != static_cast<std::uint8_t>(f.type.element)) {
                        throw SerializationError("field '" + f.name + "': dtype code " + std::to_string(dtype) +
                                                 " does not match schema");
                    }
                    const auto rank = r.read<std::uint8_t>(f);
                    if (rank != f.type.rank) {
                        throw SerializationError("field '" + f.name + "': rank " + std::to_string(rank) +
                                                 " does not match schema");
                    }
                    for (unsigned i = 0; i < rank; ++i) {
                        a.shape.push_back(r.read<std::uint32_t>(f));
                    }
                }
                const std::size_t size = a.element_count() * scalar_size(a.dtype);
                if (size > r.remaining()) {
                    r.take(size, f);  // raises the framing error
                }
                const auto bytes = r.take(size, f);
                if (shared != nullptr) {
                    a.owner = shared->owner;
                    a.bytes = bytes;
                } else {
                    auto copy = SharedBytes::copy_of(bytes);
                    a.owner = std::move(copy.owner);
                    a.bytes = copy.bytes;
                }
                m.values.push_back(std::move(a));
                break;
            }
        }
    }
    if (r.remaining() != 0) {
        throw FramingError("payload of " + schema.name() + " has " + std::to_string(r.remaining()) +
                           " trailing bytes");
    }
    return m;
}

}  // namespace

std::size_t serialized_size(const Message& message, const MessageSchema& schema) {
    if (message.values.size() != schema.fields().size()) {
        throw SerializationError("message has " + std::to_string(message.values.size()) + " values but schema " +
                                 schema.name() + " declares " + std::to_string(schema.fields().size()) + " fields");
    }
    std::size_t total = 0;
    for (std::size_t i = 0; i < message.values.size(); ++i) {
        total += checked_size(schema.fields()[i], message.values[i]);
    }
    return total;
}

void serialize_into(const Message& message, const MessageSchema& schema, std::vector<std::byte>& out) {
    const std::size_t size = serialized_size(message, schema);
    out.reserve(out.size() + size);
    for (std::size_t i = 0; i < message.values.size(); ++i) {
        const Field& f = schema.fields()[i];
        const Value& v = message.values[i];
        switch (f.type.kind) {
            case FieldType::Kind::scalar:
                encode_scalar(out, v);
                break;
            case FieldType::Kind::string: {
                const auto& s = std::get<std::string>(v);
                put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
                put_bytes(out, std::as_bytes(std::span<const char>(s.data(), s.size())));
                break;
            }
            case FieldType::Kind::fixed_array:
                put_bytes(out, std::get<ArrayValue>(v).bytes);
                break;
            case FieldType::Kind::dynamic_array: {
                const auto& a = std::get<ArrayValue>(v);
                put<std::uint8_t>(out, static_cast<std::uint8_t>(a.dtype));
                put<std::uint8_t>(out, static_cast<std::uint8_t>(a.shape.size()));
                for (std::uint32_t d : a.shape) {
                    put<std::uint32_t>(out, d);
                }
                put_bytes(out, a.bytes);
                break;
            }
        }
    }
}

std::vector<std::byte> serialize(const Message& message, const MessageSchema& schema) {
    std::vector<std::byte> out;
    serialize_into(message, schema, out);
    return out;
}

Message deserialize(const SharedBytes& payload, const MessageSchema& schema, SchemaHash header_hash) {
    return decode(&payload, payload.bytes, schema, header_hash);
}

Message deserialize(std::span<const std::byte> payload, const MessageSchema& schema, SchemaHash header_hash) {
    return decode(nullptr, payload, schema, header_hash);
}

}  // namespace evsim::msg
