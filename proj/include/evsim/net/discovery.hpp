#pragma once

// Discovery control plane. Line protocol over TCP, one request per line:
//   REGISTER <node_id> <node_name> <count> (<topic> <schema_hash> <endpoint>)*  -> OK LEASE <ms>
//   HEARTBEAT <node_id>                                                        -> OK LEASE <ms> | ERR unknown-node
//   QUERY <topic>                                                              -> ENDPOINTS <n> (<endpoint> <schema_hash>)*
//   UNREGISTER <node_id>                                                       -> OK | ERR unknown-node
//   PING                                                                       -> PONG
// node ids and hashes are 16 hex digits. Malformed requests get "ERR <reason>" and the connection stays open.

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "evsim/msg/schema.hpp"
#include "evsim/net/socket.hpp"

namespace evsim::net {

constexpr std::uint16_t kDefaultDiscoveryPort = 7780;
constexpr double kDefaultLeaseTtl = 6.0;
inline constexpr const char* kDiscoveryEnv = "EVSIM_DISCOVERY";

// EVSIM_DISCOVERY when set, otherwise 127.0.0.1:7780.
std::string default_discovery_address();

struct Publication {
    std::string topic;
    msg::SchemaHash schema_hash;
    std::string endpoint;
};

struct NodeInfo {
    std::string node_name;
    std::uint64_t node_id = 0;
    std::vector<Publication> publications;
    Clock::time_point lease_deadline{};
};

struct TopicEndpoint {
    std::string endpoint;
    msg::SchemaHash schema_hash;

    friend bool operator==(const TopicEndpoint&, const TopicEndpoint&) = default;
};

std::uint64_t random_node_id();

// Registry state machine behind the daemon; requests are answered with respect to `now`.
class Registry {
public:
    explicit Registry(std::chrono::milliseconds lease_ttl);

    std::string handle(std::string_view request, Clock::time_point now);

    std::size_t node_count(Clock::time_point now);
    std::chrono::milliseconds lease_ttl() const { return lease_ttl_; }

private:
    void expire(Clock::time_point now);

    std::chrono::milliseconds lease_ttl_;
    std::map<std::uint64_t, NodeInfo> nodes_;
};

struct DaemonOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = kDefaultDiscoveryPort;  // 0 picks a free port
    double lease_ttl = kDefaultLeaseTtl;          // seconds
};

class DiscoveryDaemon {
public:
    // Throws ConnectivityError when the port cannot be bound.
    explicit DiscoveryDaemon(const DaemonOptions& options);
    ~DiscoveryDaemon();
    DiscoveryDaemon(const DiscoveryDaemon&) = delete;
    DiscoveryDaemon& operator=(const DiscoveryDaemon&) = delete;

    void stop();
    std::uint16_t port() const { return endpoint_.port; }
    std::string address() const;
    std::size_t node_count();

private:
    void serve();

    Endpoint endpoint_;
    Fd listener_;
    Wakeup wake_;
    std::mutex mutex_;
    Registry registry_;
    bool stopping_ = false;
    std::thread thread_;
};

std::unique_ptr<DiscoveryDaemon> start_discovery_daemon(std::uint16_t port, double lease_ttl = kDefaultLeaseTtl);

// Synchronous client. Reconnects once per request when the daemon connection has gone away.
class DiscoveryClient {
public:
    explicit DiscoveryClient(std::string address = default_discovery_address(),
                             std::chrono::milliseconds timeout = std::chrono::milliseconds(1000));

    std::string request(std::string_view line);

    // Returns the granted lease.
    std::chrono::milliseconds register_node(const NodeInfo& node);
    // nullopt when the daemon does not know the node (e.g. after a restart).
    std::optional<std::chrono::milliseconds> heartbeat(std::uint64_t node_id);
    std::vector<TopicEndpoint> query(std::string_view topic);
    void unregister(std::uint64_t node_id);
    bool ping();

    const std::string& address() const { return address_; }

private:
    std::string exchange(std::string_view line);

    std::string address_;
    Endpoint endpoint_;
    std::chrono::milliseconds timeout_;
    Fd fd_;
    LineReader reader_;
    std::mutex mutex_;
};

}  // namespace evsim::net
