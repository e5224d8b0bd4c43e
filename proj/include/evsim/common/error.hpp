#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace evsim {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input failed a precondition (out-of-range value, bad dimensions, bad config).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Mathematical domain violation, e.g. a non-positive disparity fed to a log.
class DomainError : public Error {
public:
    using Error::Error;
};

// Numerical integration produced non-finite state.
class IntegrationError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class SerializationError : public Error {
public:
    using Error::Error;
};

// Payload is truncated or carries trailing bytes.
class FramingError : public Error {
public:
    using Error::Error;
};

// Wire header failed its magic/version gate.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class ConnectivityError : public Error {
public:
    using Error::Error;
};

// Received schema hash differs from the expected one. No payload byte is read.
class TypeMismatchError : public Error {
public:
    TypeMismatchError(std::uint64_t expected, std::uint64_t received);

    std::uint64_t expected() const noexcept { return expected_; }
    std::uint64_t received() const noexcept { return received_; }

private:
    std::uint64_t expected_;
    std::uint64_t received_;
};

std::string hex64(std::uint64_t value);

}  // namespace evsim
