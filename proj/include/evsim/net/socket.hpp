#pragma once

// Thin POSIX socket helpers shared by the discovery daemon, publishers and subscribers.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace evsim::net {

using Clock = std::chrono::steady_clock;

// Owning file descriptor.
class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    Fd(Fd&& other) noexcept : fd_(other.release()) {}
    Fd& operator=(Fd&& other) noexcept;
    ~Fd() { reset(); }

    int get() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    int release();
    void reset(int fd = -1);

private:
    int fd_ = -1;
};

enum class Transport : std::uint8_t { tcp, local };

// "tcp://host:port" or "local:///absolute/path". "host:port" is accepted as tcp.
struct Endpoint {
    Transport transport = Transport::tcp;
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
    std::string path;

    static Endpoint parse(std::string_view text);
    std::string str() const;
};

// Binds and listens. Port 0 and an empty local path are resolved in place to the actual address.
Fd listen_on(Endpoint& endpoint, int backlog = 64);

Fd connect_to(const Endpoint& endpoint, std::chrono::milliseconds timeout);

void set_nonblocking(int fd, bool on);

// TCP_NODELAY plus larger kernel buffers; harmless on local sockets.
void tune_socket(int fd);

// Writes every byte or throws ConnectivityError. Never raises SIGPIPE.
void write_all(int fd, std::span<const std::byte> data);
void write_all(int fd, std::string_view text);

// Waits for readability; false on timeout.
bool wait_readable(int fd, Clock::time_point deadline);

// Buffered reader for newline-terminated text over a blocking or non-blocking descriptor.
class LineReader {
public:
    // Next line without the terminator, or nullopt on timeout. Throws ConnectivityError on EOF or error.
    std::optional<std::string> read_line(int fd, Clock::time_point deadline, std::size_t max_len = 1 << 20);

    // Bytes received past the last returned line.
    std::string take_leftover();

private:
    std::string buffer_;
};

// Event descriptor used to wake threads blocked in poll().
class Wakeup {
public:
    Wakeup();
    int fd() const { return fd_.get(); }
    void notify();
    void drain();

private:
    Fd fd_;
};

std::uint64_t monotonic_ns();

}  // namespace evsim::net
