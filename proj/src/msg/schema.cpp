#include "evsim/msg/schema.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <unordered_set>

#include "evsim/common/error.hpp"

namespace evsim::msg {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

struct CodeEntry {
    ScalarType type;
    std::string_view code;
    std::size_t size;
};

constexpr std::array<CodeEntry, 11> kCodes{{
    {ScalarType::u8, "u8", 1},
    {ScalarType::u16, "u16", 2},
    {ScalarType::u32, "u32", 4},
    {ScalarType::u64, "u64", 8},
    {ScalarType::i8, "i8", 1},
    {ScalarType::i16, "i16", 2},
    {ScalarType::i32, "i32", 4},
    {ScalarType::i64, "i64", 8},
    {ScalarType::f32, "f32", 4},
    {ScalarType::f64, "f64", 8},
    {ScalarType::boolean, "bool", 1},
}};

const CodeEntry& entry(ScalarType t) {
    const auto index = static_cast<std::size_t>(t) - 1;
    if (index >= kCodes.size()) {
        throw SchemaError("unknown scalar type");
    }
    return kCodes[index];
}

bool is_identifier(std::string_view s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) {
        return false;
    }
    for (char c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) {
            return false;
        }
    }
    return true;
}

void append_type(std::string& out, const FieldType& type) {
    switch (type.kind) {
        case FieldType::Kind::scalar:
            out += type_code(type.element);
            break;
        case FieldType::Kind::string:
            out += "str";
            break;
        case FieldType::Kind::fixed_array:
            out += type_code(type.element);
            for (std::uint32_t d : type.dims) {
                out += '[';
                out += std::to_string(d);
                out += ']';
            }
            break;
        case FieldType::Kind::dynamic_array:
            out += type_code(type.element);
            for (unsigned r = 0; r < type.rank; ++r) {
                out += "[*]";
            }
            break;
    }
}

}  // namespace

std::string_view type_code(ScalarType type) { return entry(type).code; }

std::size_t scalar_size(ScalarType type) { return entry(type).size; }

std::optional<ScalarType> scalar_from_code(std::string_view code) {
    for (const auto& e : kCodes) {
        if (e.code == code) {
            return e.type;
        }
    }
    return std::nullopt;
}

std::optional<ScalarType> scalar_from_dtype(std::uint8_t dtype) {
    if (dtype >= 1 && dtype <= kCodes.size()) {
        return static_cast<ScalarType>(dtype);
    }
    return std::nullopt;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = kFnvOffset;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t fnv1a64(std::span<const std::byte> bytes) {
    std::uint64_t h = kFnvOffset;
    for (std::byte b : bytes) {
        h ^= static_cast<std::uint8_t>(b);
        h *= kFnvPrime;
    }
    return h;
}

MessageSchema::MessageSchema(std::string name, std::vector<Field> fields)
    : name_(std::move(name)), fields_(std::move(fields)) {
    if (!is_identifier(name_)) {
        throw SchemaError("invalid message name '" + name_ + "'");
    }
    std::unordered_set<std::string> seen;
    for (const Field& f : fields_) {
        if (!is_identifier(f.name)) {
            throw SchemaError("invalid field name '" + f.name + "' in " + name_);
        }
        if (!seen.insert(f.name).second) {
            throw SchemaError("duplicate field name '" + f.name + "' in " + name_);
        }
        entry(f.type.element);
        if (f.type.kind == FieldType::Kind::fixed_array) {
            if (f.type.dims.empty()) {
                throw SchemaError("fixed array field '" + f.name + "' has no dimensions");
            }
            for (std::uint32_t d : f.type.dims) {
                if (d == 0) {
                    throw SchemaError("fixed array field '" + f.name + "' has a zero dimension");
                }
            }
        }
        if (f.type.kind == FieldType::Kind::dynamic_array && f.type.rank == 0) {
            throw SchemaError("dynamic array field '" + f.name + "' needs rank >= 1");
        }
    }
    canonical_ = name_;
    canonical_ += '{';
    for (std::size_t i = 0; i < fields_.size(); ++i) {
        if (i > 0) {
            canonical_ += ';';
        }
        canonical_ += fields_[i].name;
        canonical_ += ':';
        append_type(canonical_, fields_[i].type);
    }
    canonical_ += '}';
    hash_ = SchemaHash{fnv1a64(canonical_)};
}

std::optional<std::size_t> MessageSchema::index_of(std::string_view field) const {
    for (std::size_t i = 0; i < fields_.size(); ++i) {
        if (fields_[i].name == field) {
            return i;
        }
    }
    return std::nullopt;
}

std::string canonical_schema_string(const MessageSchema& schema) { return schema.canonical(); }

SchemaHash schema_hash(const MessageSchema& schema) { return SchemaHash{fnv1a64(schema.canonical())}; }

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    MessageSchema parse() {
        std::string name = identifier("message name");
        expect('{');
        std::vector<Field> fields;
        if (!consume('}')) {
            do {
                std::string field = identifier("field name");
                expect(':');
                fields.push_back(Field{std::move(field), field_type()});
            } while (consume(';'));
            expect('}');
        }
        if (pos_ != text_.size()) {
            fail("unexpected trailing characters");
        }
        return MessageSchema(std::move(name), std::move(fields));
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw SchemaError("schema parse error at offset " + std::to_string(pos_) + ": " + what);
    }

    bool consume(char c) {
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!consume(c)) {
            fail(std::string("expected '") + c + "'");
        }
    }

    std::string identifier(const char* what) {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        if (start == pos_) {
            fail(std::string("expected ") + what);
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    FieldType field_type() {
        const std::size_t at = pos_;
        const std::string code = identifier("type code");
        if (code == "str") {
            return FieldType::string();
        }
        const auto scalar = scalar_from_code(code);
        if (!scalar) {
            pos_ = at;
            fail("unknown type code '" + code + "'");
        }
        std::vector<std::uint32_t> dims;
        unsigned dynamic_rank = 0;
        while (consume('[')) {
            if (consume('*')) {
                ++dynamic_rank;
            } else {
                const std::size_t start = pos_;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                    ++pos_;
                }
                std::uint32_t value = 0;
                const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
                if (start == pos_ || res.ec != std::errc{}) {
                    fail("expected array dimension");
                }
                dims.push_back(value);
            }
            expect(']');
        }
        if (dynamic_rank > 0 && !dims.empty()) {
            fail("cannot mix fixed and dynamic dimensions");
        }
        if (dynamic_rank > 255) {
            fail("dynamic rank exceeds 255");
        }
        if (dynamic_rank > 0) {
            return FieldType::dynamic(*scalar, static_cast<std::uint8_t>(dynamic_rank));
        }
        if (!dims.empty()) {
            return FieldType::fixed(*scalar, std::move(dims));
        }
        return FieldType::scalar(*scalar);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

MessageSchema parse_schema(std::string_view declaration) { return Parser(declaration).parse(); }

}  // namespace evsim::msg
