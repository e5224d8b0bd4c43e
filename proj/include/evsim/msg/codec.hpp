#pragma once

// Payload encoding: fields in declaration order, little-endian, no padding.
//   scalar         raw little-endian value (bool as one byte 0/1)
//   str            u32 byte length + UTF-8 bytes
//   fixed array    row-major element data, shape implied by the schema
//   dynamic array  u8 dtype, u8 rank, rank x u32 dims, row-major element data

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "evsim/msg/schema.hpp"
#include "evsim/msg/value.hpp"

namespace evsim::msg {

// A byte range together with whatever keeps it alive.
struct SharedBytes {
    std::shared_ptr<const void> owner;
    std::span<const std::byte> bytes;

    static SharedBytes copy_of(std::span<const std::byte> data);
};

// Exact payload size; throws SerializationError when the message does not fit the schema.
std::size_t serialized_size(const Message& message, const MessageSchema& schema);

std::vector<std::byte> serialize(const Message& message, const MessageSchema& schema);

// Appends the payload to `out`.
void serialize_into(const Message& message, const MessageSchema& schema, std::vector<std::byte>& out);

// Checks the header hash before touching the payload. Array fields come back as views that
// share ownership of `payload`.
Message deserialize(const SharedBytes& payload, const MessageSchema& schema, SchemaHash header_hash);

// Copying variant for callers that do not own a shareable buffer.
Message deserialize(std::span<const std::byte> payload, const MessageSchema& schema, SchemaHash header_hash);

}  // namespace evsim::msg
