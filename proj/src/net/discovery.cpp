#include "evsim/net/discovery.hpp"

#include <poll.h>
#include <sys/socket.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>

#include "evsim/common/error.hpp"

namespace evsim::net {

namespace {

std::vector<std::string_view> split_words(std::string_view line) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) words.push_back(line.substr(start, i - start));
    }
    return words;
}

std::optional<std::uint64_t> parse_hex(std::string_view s) {
    if (s.starts_with("0x")) s.remove_prefix(2);
    if (s.empty() || s.size() > 16) return std::nullopt;
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string lease_reply(std::chrono::milliseconds ttl) { return "OK LEASE " + std::to_string(ttl.count()); }

}  // namespace

std::string default_discovery_address() {
    const char* env = std::getenv(kDiscoveryEnv);
    if (env != nullptr && *env != '\0') {
        return env;
    }
    return "127.0.0.1:" + std::to_string(kDefaultDiscoveryPort);
}

std::uint64_t random_node_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}() ^ (static_cast<std::uint64_t>(monotonic_ns()) << 1)};
    std::uint64_t id = 0;
    while (id == 0) id = rng();
    return id;
}

Registry::Registry(std::chrono::milliseconds lease_ttl) : lease_ttl_(lease_ttl) {
    if (lease_ttl.count() <= 0) {
        throw ValidationError("lease ttl must be positive");
    }
}

void Registry::expire(Clock::time_point now) {
    std::erase_if(nodes_, [&](const auto& kv) { return kv.second.lease_deadline < now; });
}

std::size_t Registry::node_count(Clock::time_point now) {
    expire(now);
    return nodes_.size();
}

std::string Registry::handle(std::string_view request, Clock::time_point now) {
    expire(now);
    const auto words = split_words(request);
    if (words.empty()) {
        return "ERR malformed empty-request";
    }
    const std::string_view cmd = words[0];
    if (cmd == "PING") {
        return "PONG";
    }
    if (cmd == "REGISTER") {
        if (words.size() < 4) return "ERR malformed REGISTER needs <node_id> <node_name> <count>";
        const auto id = parse_hex(words[1]);
        if (!id) return "ERR malformed node_id";
        std::size_t count = 0;
        const auto [ptr, ec] = std::from_chars(words[3].data(), words[3].data() + words[3].size(), count);
        if (ec != std::errc{} || ptr != words[3].data() + words[3].size()) return "ERR malformed count";
        if (words.size() != 4 + 3 * count) return "ERR malformed publication list length";
        NodeInfo node;
        node.node_id = *id;
        node.node_name = std::string(words[2]);
        for (std::size_t i = 0; i < count; ++i) {
            const auto hash = parse_hex(words[5 + 3 * i]);
            if (!hash) return "ERR malformed schema_hash";
            try {
                Endpoint::parse(words[6 + 3 * i]);
            } catch (const Error&) {
                return "ERR malformed endpoint " + std::string(words[6 + 3 * i]);
            }
            node.publications.push_back(
                {std::string(words[4 + 3 * i]), msg::SchemaHash{*hash}, std::string(words[6 + 3 * i])});
        }
        node.lease_deadline = now + lease_ttl_;
        nodes_[*id] = std::move(node);
        return lease_reply(lease_ttl_);
    }
    if (cmd == "HEARTBEAT") {
        if (words.size() != 2) return "ERR malformed HEARTBEAT needs <node_id>";
        const auto id = parse_hex(words[1]);
        if (!id) return "ERR malformed node_id";
        auto it = nodes_.find(*id);
        if (it == nodes_.end()) return "ERR unknown-node";
        it->second.lease_deadline = now + lease_ttl_;
        return lease_reply(lease_ttl_);
    }
    if (cmd == "QUERY") {
        if (words.size() != 2) return "ERR malformed QUERY needs <topic>";
        std::vector<TopicEndpoint> found;
        for (const auto& [id, node] : nodes_) {
            for (const Publication& p : node.publications) {
                if (p.topic == words[1]) found.push_back({p.endpoint, p.schema_hash});
            }
        }
        std::string reply = "ENDPOINTS " + std::to_string(found.size());
        for (const auto& e : found) reply += " " + e.endpoint + " " + hex16(e.schema_hash.value);
        return reply;
    }
    if (cmd == "UNREGISTER") {
        if (words.size() != 2) return "ERR malformed UNREGISTER needs <node_id>";
        const auto id = parse_hex(words[1]);
        if (!id) return "ERR malformed node_id";
        return nodes_.erase(*id) == 1 ? "OK" : "ERR unknown-node";
    }
    return "ERR unknown-command " + std::string(cmd);
}

DiscoveryDaemon::DiscoveryDaemon(const DaemonOptions& options)
    : registry_(std::chrono::milliseconds(static_cast<long long>(options.lease_ttl * 1000.0))) {
    if (!(options.lease_ttl > 0.0)) {
        throw ValidationError("lease ttl must be positive");
    }
    endpoint_.transport = Transport::tcp;
    endpoint_.host = options.host;
    endpoint_.port = options.port;
    listener_ = listen_on(endpoint_);
    thread_ = std::thread([this] { serve(); });
}

DiscoveryDaemon::~DiscoveryDaemon() { stop(); }

void DiscoveryDaemon::stop() {
    {
        std::lock_guard lock(mutex_);
        if (stopping_) {
            if (thread_.joinable()) thread_.join();
            return;
        }
        stopping_ = true;
    }
    wake_.notify();
    if (thread_.joinable()) thread_.join();
    listener_.reset();
}

std::string DiscoveryDaemon::address() const { return endpoint_.host + ":" + std::to_string(endpoint_.port); }

std::size_t DiscoveryDaemon::node_count() {
    std::lock_guard lock(mutex_);
    return registry_.node_count(Clock::now());
}

void DiscoveryDaemon::serve() {
    struct Client {
        Fd fd;
        std::string buffer;
    };
    std::vector<Client> clients;
    for (;;) {
        std::vector<pollfd> fds;
        fds.push_back({wake_.fd(), POLLIN, 0});
        fds.push_back({listener_.get(), POLLIN, 0});
        for (const Client& c : clients) fds.push_back({c.fd.get(), POLLIN, 0});
        if (::poll(fds.data(), fds.size(), 500) < 0 && errno != EINTR) {
            break;
        }
        {
            std::lock_guard lock(mutex_);
            if (stopping_) break;
        }
        if ((fds[1].revents & POLLIN) != 0) {
            Fd conn(::accept4(listener_.get(), nullptr, nullptr, SOCK_CLOEXEC));
            if (conn.valid()) clients.push_back({std::move(conn), {}});
        }
        for (std::size_t i = 2; i < fds.size(); ++i) {
            if (fds[i].revents == 0) continue;
            Client& c = clients[i - 2];
            char chunk[4096];
            const ssize_t n = ::recv(c.fd.get(), chunk, sizeof(chunk), MSG_DONTWAIT);
            if (n <= 0) {
                if (n < 0 && (errno == EAGAIN || errno == EINTR)) continue;
                c.fd.reset();
                continue;
            }
            c.buffer.append(chunk, static_cast<std::size_t>(n));
            std::size_t nl = 0;
            while ((nl = c.buffer.find('\n')) != std::string::npos) {
                std::string line = c.buffer.substr(0, nl);
                c.buffer.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                std::string reply;
                {
                    std::lock_guard lock(mutex_);
                    reply = registry_.handle(line, Clock::now());
                }
                reply.push_back('\n');
                try {
                    write_all(c.fd.get(), reply);
                } catch (const ConnectivityError&) {
                    c.fd.reset();
                    break;
                }
            }
            if (c.buffer.size() > (1U << 20)) c.fd.reset();
        }
        std::erase_if(clients, [](const Client& c) { return !c.fd.valid(); });
    }
}

std::unique_ptr<DiscoveryDaemon> start_discovery_daemon(std::uint16_t port, double lease_ttl) {
    DaemonOptions options;
    options.port = port;
    options.lease_ttl = lease_ttl;
    return std::make_unique<DiscoveryDaemon>(options);
}

DiscoveryClient::DiscoveryClient(std::string address, std::chrono::milliseconds timeout)
    : address_(std::move(address)), endpoint_(Endpoint::parse(address_)), timeout_(timeout) {
    if (endpoint_.transport != Transport::tcp) {
        throw ValidationError("discovery daemon address must be tcp host:port, got '" + address_ + "'");
    }
}

std::string DiscoveryClient::exchange(std::string_view line) {
    if (!fd_.valid()) {
        fd_ = connect_to(endpoint_, timeout_);
        reader_ = LineReader{};
    }
    std::string out(line);
    out.push_back('\n');
    write_all(fd_.get(), out);
    auto reply = reader_.read_line(fd_.get(), Clock::now() + timeout_);
    if (!reply) {
        throw ConnectivityError("discovery daemon at " + address_ + " did not answer within " +
                                std::to_string(timeout_.count()) + " ms");
    }
    return *reply;
}

std::string DiscoveryClient::request(std::string_view line) {
    std::lock_guard lock(mutex_);
    try {
        return exchange(line);
    } catch (const ConnectivityError&) {
        fd_.reset();
    }
    try {
        return exchange(line);
    } catch (const ConnectivityError& e) {
        fd_.reset();
        throw ConnectivityError("discovery daemon at " + address_ + " unreachable: " + e.what());
    }
}

std::chrono::milliseconds DiscoveryClient::register_node(const NodeInfo& node) {
    std::ostringstream line;
    line << "REGISTER " << hex16(node.node_id) << ' ' << node.node_name << ' ' << node.publications.size();
    for (const Publication& p : node.publications) {
        line << ' ' << p.topic << ' ' << hex16(p.schema_hash.value) << ' ' << p.endpoint;
    }
    const std::string reply = request(line.str());
    const auto words = split_words(reply);
    long long ms = 0;
    if (words.size() == 3 && words[0] == "OK" && words[1] == "LEASE" &&
        std::from_chars(words[2].data(), words[2].data() + words[2].size(), ms).ec == std::errc{}) {
        return std::chrono::milliseconds(ms);
    }
    throw ConnectivityError("registration of node '" + node.node_name + "' rejected: " + reply);
}

std::optional<std::chrono::milliseconds> DiscoveryClient::heartbeat(std::uint64_t node_id) {
    const std::string reply = request("HEARTBEAT " + hex16(node_id));
    const auto words = split_words(reply);
    long long ms = 0;
    if (words.size() == 3 && words[0] == "OK" &&
        std::from_chars(words[2].data(), words[2].data() + words[2].size(), ms).ec == std::errc{}) {
        return std::chrono::milliseconds(ms);
    }
    if (reply == "ERR unknown-node") {
        return std::nullopt;
    }
    throw ConnectivityError("unexpected heartbeat reply: " + reply);
}

std::vector<TopicEndpoint> DiscoveryClient::query(std::string_view topic) {
    const std::string reply = request("QUERY " + std::string(topic));
    const auto words = split_words(reply);
    std::size_t n = 0;
    if (words.size() < 2 || words[0] != "ENDPOINTS" ||
        std::from_chars(words[1].data(), words[1].data() + words[1].size(), n).ec != std::errc{} ||
        words.size() != 2 + 2 * n) {
        throw ConnectivityError("unexpected query reply: " + reply);
    }
    std::vector<TopicEndpoint> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto hash = parse_hex(words[3 + 2 * i]);
        if (!hash) throw ConnectivityError("unexpected query reply: " + reply);
        out.push_back({std::string(words[2 + 2 * i]), msg::SchemaHash{*hash}});
    }
    return out;
}

void DiscoveryClient::unregister(std::uint64_t node_id) { request("UNREGISTER " + hex16(node_id)); }

bool DiscoveryClient::ping() {
    try {
        return request("PING") == "PONG";
    } catch (const ConnectivityError&) {
        return false;
    }
}

}  // namespace evsim::net
