#include "evsim/msg/frame.hpp"

#include <cstring>

#include "evsim/common/error.hpp"
#include "evsim/msg/value.hpp"

namespace evsim::msg {

namespace {

template <class T>
void store(std::byte* at, T value) {
    std::memcpy(at, &value, sizeof(T));
}

template <class T>
T load(const std::byte* at) {
    T value;
    std::memcpy(&value, at, sizeof(T));
    return value;
}

void check_header_gate(std::span<const std::byte> header) {
    if (std::memcmp(header.data(), kFrameMagic.data(), kFrameMagic.size()) != 0) {
        throw ProtocolError("bad frame magic");
    }
    const auto version = static_cast<std::uint8_t>(header[4]);
    if (version != kFrameVersion) {
        throw ProtocolError("unsupported frame version " + std::to_string(version));
    }
}

}  // namespace

void frame_encode_prefix(std::vector<std::byte>& out, std::string_view topic, SchemaHash schema_hash,
                         std::uint64_t publish_time_ns, std::uint64_t payload_len, std::uint8_t flags) {
    if (topic.size() > kMaxTopicLength) {
        throw ValidationError("topic '" + std::string(topic.substr(0, 32)) + "...' exceeds 255 bytes");
    }
    const std::size_t at = out.size();
    out.resize(at + 1 + topic.size() + kFrameHeaderSize);
    std::byte* p = out.data() + at;
    *p++ = static_cast<std::byte>(topic.size());
    std::memcpy(p, topic.data(), topic.size());
    p += topic.size();
    std::memcpy(p, kFrameMagic.data(), kFrameMagic.size());
    p[4] = static_cast<std::byte>(kFrameVersion);
    p[5] = static_cast<std::byte>(flags);
    store<std::uint16_t>(p + 6, 0);
    store<std::uint64_t>(p + 8, schema_hash.value);
    store<std::uint64_t>(p + 16, publish_time_ns);
    store<std::uint64_t>(p + 24, payload_len);
}

std::vector<std::byte> frame_encode(std::string_view topic, SchemaHash schema_hash, std::uint64_t publish_time_ns,
                                    std::span<const std::byte> payload, std::uint8_t flags) {
    std::vector<std::byte> out;
    out.reserve(1 + topic.size() + kFrameHeaderSize + payload.size());
    frame_encode_prefix(out, topic, schema_hash, publish_time_ns, payload.size(), flags);
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

std::optional<std::size_t> frame_size(std::span<const std::byte> prefix) {
    if (prefix.empty()) {
        return std::nullopt;
    }
    const std::size_t topic_len = static_cast<std::uint8_t>(prefix[0]);
    const std::size_t header_at = 1 + topic_len;
    if (prefix.size() >= header_at + 5) {
        check_header_gate(prefix.subspan(header_at, 5));
    }
    if (prefix.size() < header_at + kFrameHeaderSize) {
        return std::nullopt;
    }
    const auto payload_len = load<std::uint64_t>(prefix.data() + header_at + 24);
    return header_at + kFrameHeaderSize + payload_len;
}

FrameView frame_decode(std::span<const std::byte> frame) {
    if (frame.empty()) {
        throw FramingError("empty frame");
    }
    const std::size_t topic_len = static_cast<std::uint8_t>(frame[0]);
    const std::size_t header_at = 1 + topic_len;
    if (frame.size() < header_at + kFrameHeaderSize) {
        if (frame.size() >= header_at + 5) {
            check_header_gate(frame.subspan(header_at, 5));
        }
        throw FramingError("frame shorter than topic plus header");
    }
    const auto header = frame.subspan(header_at, kFrameHeaderSize);
    check_header_gate(header);

    FrameView view;
    view.topic = std::string_view(reinterpret_cast<const char*>(frame.data() + 1), topic_len);
    view.header.flags = static_cast<std::uint8_t>(header[5]);
    view.header.schema_hash = SchemaHash{load<std::uint64_t>(header.data() + 8)};
    view.header.publish_time_ns = load<std::uint64_t>(header.data() + 16);
    view.header.payload_len = load<std::uint64_t>(header.data() + 24);
    const std::size_t available = frame.size() - header_at - kFrameHeaderSize;
    if (view.header.payload_len != available) {
        throw FramingError("frame declares " + std::to_string(view.header.payload_len) + " payload bytes but carries " +
                           std::to_string(available));
    }
    view.payload = frame.subspan(header_at + kFrameHeaderSize);
    return view;
}

}  // namespace evsim::msg
