#include "evsim/common/error.hpp"

#include <cstdio>

namespace evsim {

std::string hex64(std::uint64_t value) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(value));
    return buf;
}

TypeMismatchError::TypeMismatchError(std::uint64_t expected, std::uint64_t received)
    : Error("schema hash mismatch: expected " + hex64(expected) + ", received " + hex64(received)),
      expected_(expected),
      received_(received) {}

}  // namespace evsim
