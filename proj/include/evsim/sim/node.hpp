#pragma once

// Networked simulator node and a minimal lockstep controller client.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "evsim/net/pubsub.hpp"
#include "evsim/sim/config.hpp"
#include "evsim/sim/simulator.hpp"

namespace evsim::sim {

// Single-writer/single-reader exchange cell with last-value semantics.
template <class T>
class LatestValue {
public:
    void put(T value) {
        std::lock_guard<std::mutex> lock(mutex_);
        value_ = std::move(value);
        ++writes_;
    }

    // The newest value not yet taken, if any.
    std::optional<T> take() {
        std::lock_guard<std::mutex> lock(mutex_);
        std::optional<T> out = std::move(value_);
        value_.reset();
        return out;
    }

    std::uint64_t writes() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return writes_;
    }

private:
    mutable std::mutex mutex_;
    std::optional<T> value_;
    std::uint64_t writes_ = 0;
};

struct NodeOptions {
    std::optional<std::uint64_t> max_ticks;  // nullopt: until stop()
};

struct NodeStats {
    std::uint64_t ticks = 0;
    std::uint64_t commands_applied = 0;
    std::uint64_t zoh_activations = 0;   // lockstep ticks without a matching reply
    std::uint64_t stale_commands = 0;    // step_id below the awaited one
    std::uint64_t future_commands = 0;   // step_id above the awaited one
    std::uint64_t command_errors = 0;    // undecodable or mismatched command frames
    std::uint64_t publish_errors = 0;
    std::uint64_t overruns = 0;          // paced ticks that started late
    std::vector<std::uint64_t> zoh_steps;
    std::string last_error;
    double wall_seconds = 0.0;
};

class SimNode {
public:
    // Creates the publishers and, when commands are consumed, the command subscriber.
    // Throws ConnectivityError when the discovery daemon cannot be reached.
    explicit SimNode(SimConfig config, NodeOptions options = {});
    ~SimNode();
    SimNode(const SimNode&) = delete;
    SimNode& operator=(const SimNode&) = delete;

    // Runs the configured mode until max_ticks or stop().
    NodeStats run();
    void stop();

    // True once the pose topic has `pose_subscribers` subscribers and the command topic has
    // `command_publishers` publishers (0 skips either check).
    bool wait_ready(std::size_t pose_subscribers, std::size_t command_publishers, std::chrono::milliseconds timeout);

    Simulator& simulator() { return sim_; }
    const SimConfig& config() const { return sim_.config(); }

private:
    NodeStats run_streaming();
    NodeStats run_lockstep();
    void publish_bundle(const ObservationBundle& bundle, NodeStats& stats);
    void command_loop();

    Simulator sim_;
    NodeOptions options_;
    std::vector<net::Publisher> publishers_;  // intensity, depth, events, imu, pose
    std::unique_ptr<net::Subscriber> commands_;
    LatestValue<dynamics::ControlCommand> latest_;
    std::atomic<std::uint64_t> command_errors_{0};
    std::atomic<bool> stop_{false};
    std::thread command_thread_;
};

struct ControllerOptions {
    std::string daemon;
    TopicNames topics;
    std::string transport = "tcp";
    dynamics::VehicleParams vehicle;
    std::uint32_t skip_every = 0;  // no reply when step_id % skip_every == 0
    std::int64_t step_offset = 0;  // replies carry step_id + step_offset
    double rate_hz = 0.0;          // > 0: hold each reply until the next slot of this control rate
};

// Replies to every pose with a hover command; records the command-to-next-pose latency.
class EchoController {
public:
    explicit EchoController(ControllerOptions options);
    ~EchoController();
    EchoController(const EchoController&) = delete;
    EchoController& operator=(const EchoController&) = delete;

    bool wait_connected(std::chrono::milliseconds timeout) const;
    void stop();

    std::uint64_t poses_received() const { return poses_.load(); }
    std::uint64_t replies_sent() const { return replies_.load(); }
    // Nanoseconds from publishing the reply to step k to receiving pose k + 1.
    std::vector<std::uint64_t> latencies_ns() const;

private:
    void loop();

    ControllerOptions options_;
    net::Subscriber poses_sub_;
    net::Publisher commands_pub_;
    std::atomic<bool> stop_{false};
    std::atomic<std::uint64_t> poses_{0};
    std::atomic<std::uint64_t> replies_{0};
    mutable std::mutex mutex_;
    std::vector<std::uint64_t> latencies_;
    std::thread thread_;
};

}  // namespace evsim::sim
