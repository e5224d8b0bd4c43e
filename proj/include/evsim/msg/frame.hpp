#pragma once

// Wire frame:
//   u8 topic_len | topic bytes | 32-byte header | payload
// Header (little-endian):
//   "CTX1" | u8 version = 1 | u8 flags | u16 reserved | u64 schema_hash | u64 publish_time_ns | u64 payload_len

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evsim/msg/schema.hpp"

namespace evsim::msg {

inline constexpr std::array<char, 4> kFrameMagic{'C', 'T', 'X', '1'};
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 32;
inline constexpr std::size_t kMaxTopicLength = 255;

struct FrameHeader {
    std::uint8_t flags = 0;
    SchemaHash schema_hash;
    std::uint64_t publish_time_ns = 0;
    std::uint64_t payload_len = 0;

    friend bool operator==(const FrameHeader&, const FrameHeader&) = default;
};

// Non-owning view over one encoded frame.
struct FrameView {
    std::string_view topic;
    FrameHeader header;
    std::span<const std::byte> payload;
};

std::vector<std::byte> frame_encode(std::string_view topic, SchemaHash schema_hash, std::uint64_t publish_time_ns,
                                    std::span<const std::byte> payload, std::uint8_t flags = 0);

// Writes topic + header only; the payload is appended by the caller.
void frame_encode_prefix(std::vector<std::byte>& out, std::string_view topic, SchemaHash schema_hash,
                         std::uint64_t publish_time_ns, std::uint64_t payload_len, std::uint8_t flags = 0);

// Decodes a buffer holding exactly one frame. Bad magic/version is a ProtocolError;
// a length disagreement is a FramingError.
FrameView frame_decode(std::span<const std::byte> frame);

// Total frame length once the topic and header are visible in `prefix`, otherwise nullopt.
// Validates magic and version as soon as they are available.
std::optional<std::size_t> frame_size(std::span<const std::byte> prefix);

}  // namespace evsim::msg
