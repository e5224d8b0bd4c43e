#include "evsim/net/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/eventfd.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <cstring>

#include "evsim/common/error.hpp"

namespace evsim::net {

namespace {

constexpr int kSocketBufferBytes = 4 << 20;

std::string errno_text() { return std::strerror(errno); }

sockaddr_in tcp_address(const Endpoint& ep) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    if (ep.host == "localhost") {
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    } else if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
            throw ConnectivityError("cannot resolve host '" + ep.host + "'");
        }
        addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
        freeaddrinfo(res);
    }
    return addr;
}

sockaddr_un local_address(const Endpoint& ep) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (ep.path.empty() || ep.path.size() >= sizeof(addr.sun_path)) {
        throw ValidationError("local socket path '" + ep.path + "' is empty or too long");
    }
    std::memcpy(addr.sun_path, ep.path.c_str(), ep.path.size() + 1);
    return addr;
}

std::string auto_local_path() {
    static std::atomic<std::uint64_t> counter{0};
    return "/tmp/evsim-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)) + ".sock";
}

}  // namespace

Fd& Fd::operator=(Fd&& other) noexcept {
    if (this != &other) {
        reset(other.release());
    }
    return *this;
}

int Fd::release() {
    const int fd = fd_;
    fd_ = -1;
    return fd;
}

void Fd::reset(int fd) {
    if (fd_ >= 0) {
        ::close(fd_);
    }
    fd_ = fd;
}

Endpoint Endpoint::parse(std::string_view text) {
    Endpoint ep;
    if (text.starts_with("local://")) {
        ep.transport = Transport::local;
        ep.host.clear();
        ep.path = std::string(text.substr(8));
        if (!ep.path.empty() && ep.path.front() != '/') {
            throw ValidationError("local endpoint path must be absolute: '" + std::string(text) + "'");
        }
        return ep;
    }
    std::string_view rest = text;
    if (rest.starts_with("tcp://")) {
        rest.remove_prefix(6);
    } else if (rest.find("://") != std::string_view::npos) {
        throw ValidationError("unsupported endpoint scheme in '" + std::string(text) + "'");
    }
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
        throw ValidationError("endpoint '" + std::string(text) + "' is not host:port");
    }
    ep.host = std::string(rest.substr(0, colon));
    const std::string_view port = rest.substr(colon + 1);
    unsigned value = 0;
    const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (ec != std::errc{} || ptr != port.data() + port.size() || value > 65535) {
        throw ValidationError("endpoint '" + std::string(text) + "' has an invalid port");
    }
    ep.port = static_cast<std::uint16_t>(value);
    return ep;
}

std::string Endpoint::str() const {
    if (transport == Transport::local) {
        return "local://" + path;
    }
    return "tcp://" + host + ":" + std::to_string(port);
}

Fd listen_on(Endpoint& endpoint, int backlog) {
    if (endpoint.transport == Transport::local) {
        if (endpoint.path.empty()) {
            endpoint.path = auto_local_path();
        }
        const sockaddr_un addr = local_address(endpoint);
        Fd fd(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
        if (!fd.valid()) throw ConnectivityError("socket: " + errno_text());
        ::unlink(endpoint.path.c_str());
        if (::bind(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
            throw ConnectivityError("cannot bind " + endpoint.str() + ": " + errno_text());
        }
        if (::listen(fd.get(), backlog) != 0) throw ConnectivityError("listen: " + errno_text());
        return fd;
    }
    const sockaddr_in addr = tcp_address(endpoint);
    Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!fd.valid()) throw ConnectivityError("socket: " + errno_text());
    const int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
        throw ConnectivityError("cannot bind " + endpoint.str() + ": " + errno_text());
    }
    if (::listen(fd.get(), backlog) != 0) throw ConnectivityError("listen: " + errno_text());
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&bound), &len);
    endpoint.port = ntohs(bound.sin_port);
    if (endpoint.host == "0.0.0.0") {
        endpoint.host = "127.0.0.1";
    }
    return fd;
}

Fd connect_to(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
    Fd fd;
    int rc = 0;
    if (endpoint.transport == Transport::local) {
        const sockaddr_un addr = local_address(endpoint);
        fd.reset(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
        if (!fd.valid()) throw ConnectivityError("socket: " + errno_text());
        set_nonblocking(fd.get(), true);
        rc = ::connect(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr));
    } else {
        const sockaddr_in addr = tcp_address(endpoint);
        fd.reset(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
        if (!fd.valid()) throw ConnectivityError("socket: " + errno_text());
        set_nonblocking(fd.get(), true);
        rc = ::connect(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr));
    }
    if (rc != 0) {
        if (errno != EINPROGRESS && errno != EAGAIN) {
            throw ConnectivityError("cannot connect to " + endpoint.str() + ": " + errno_text());
        }
        pollfd p{fd.get(), POLLOUT, 0};
        if (::poll(&p, 1, static_cast<int>(timeout.count())) != 1) {
            throw ConnectivityError("timed out connecting to " + endpoint.str());
        }
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            throw ConnectivityError("cannot connect to " + endpoint.str() + ": " + std::strerror(err));
        }
    }
    set_nonblocking(fd.get(), false);
    tune_socket(fd.get());
    return fd;
}

void set_nonblocking(int fd, bool on) {
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, on ? (flags | O_NONBLOCK) : (flags & ~O_NONBLOCK));
}

void tune_socket(int fd) {
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    ::setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &kSocketBufferBytes, sizeof(kSocketBufferBytes));
    ::setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &kSocketBufferBytes, sizeof(kSocketBufferBytes));
}

void write_all(int fd, std::span<const std::byte> data) {
    std::size_t done = 0;
    while (done < data.size()) {
        const ssize_t n = ::send(fd, data.data() + done, data.size() - done, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            if (errno == EAGAIN) {
                pollfd p{fd, POLLOUT, 0};
                ::poll(&p, 1, 100);
                continue;
            }
            throw ConnectivityError("send failed: " + errno_text());
        }
        done += static_cast<std::size_t>(n);
    }
}

void write_all(int fd, std::string_view text) {
    write_all(fd, std::as_bytes(std::span<const char>(text.data(), text.size())));
}

bool wait_readable(int fd, Clock::time_point deadline) {
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        const int ms = left.count() <= 0 ? 0 : static_cast<int>(std::min<long long>(left.count() + 1, 1 << 30));
        pollfd p{fd, POLLIN, 0};
        const int rc = ::poll(&p, 1, ms);
        if (rc > 0) return true;
        if (rc == 0) return false;
        if (errno != EINTR) throw ConnectivityError("poll failed: " + errno_text());
    }
}

std::optional<std::string> LineReader::read_line(int fd, Clock::time_point deadline, std::size_t max_len) {
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        if (buffer_.size() > max_len) {
            throw ConnectivityError("line exceeds " + std::to_string(max_len) + " bytes");
        }
        if (!wait_readable(fd, deadline)) {
            return std::nullopt;
        }
        char chunk[4096];
        const ssize_t n = ::recv(fd, chunk, sizeof(chunk), MSG_DONTWAIT);
        if (n == 0) throw ConnectivityError("connection closed by peer");
        if (n < 0) {
            if (errno == EAGAIN || errno == EINTR) continue;
            throw ConnectivityError("recv failed: " + errno_text());
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::string LineReader::take_leftover() {
    std::string out;
    out.swap(buffer_);
    return out;
}

Wakeup::Wakeup() : fd_(::eventfd(0, EFD_NONBLOCK | EFD_CLOEXEC)) {
    if (!fd_.valid()) throw ConnectivityError("eventfd: " + errno_text());
}

void Wakeup::notify() {
    const std::uint64_t one = 1;
    [[maybe_unused]] const ssize_t n = ::write(fd_.get(), &one, sizeof(one));
}

void Wakeup::drain() {
    std::uint64_t value = 0;
    [[maybe_unused]] const ssize_t n = ::read(fd_.get(), &value, sizeof(value));
}

std::uint64_t monotonic_ns() {
    timespec ts{};
    ::clock_gettime(CLOCK_MONOTONIC, &ts);
    return static_cast<std::uint64_t>(ts.tv_sec) * 1000000000ULL + static_cast<std::uint64_t>(ts.tv_nsec);
}

}  // namespace evsim::net
