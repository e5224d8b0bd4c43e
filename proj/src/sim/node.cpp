#include "evsim/sim/node.hpp"

#include <utility>

#include "evsim/common/error.hpp"
#include "evsim/net/socket.hpp"
#include "evsim/sim/wire.hpp"

namespace evsim::sim {

namespace {

using Clock = std::chrono::steady_clock;

std::string bind_endpoint(const std::string& transport) {
    return transport == "local" ? "local://" : "tcp://127.0.0.1:0";
}

net::PublisherOptions publisher_options(const std::string& daemon, const std::string& transport, std::size_t hwm,
                                        const std::string& node_name) {
    net::PublisherOptions o;
    o.endpoint = bind_endpoint(transport);
    o.daemon = daemon;
    o.node_name = node_name;
    o.queue.high_water_mark = hwm;
    return o;
}

}  // namespace

SimNode::SimNode(SimConfig config, NodeOptions options) : sim_([&] {
      if (config.mode == RunMode::lockstep) config.external_control = true;
      return std::move(config);
  }()),
      options_(options) {
    const SimConfig& c = sim_.config();
    const auto opts = [&](const char* name) {
        return publisher_options(c.net.daemon, c.net.transport, c.net.high_water_mark, std::string("simnode-") + name);
    };
    publishers_.emplace_back(c.topics.intensity, wire::intensity_schema(), opts("intensity"));
    publishers_.emplace_back(c.topics.depth, wire::depth_schema(), opts("depth"));
    publishers_.emplace_back(c.topics.events, wire::events_schema(), opts("events"));
    publishers_.emplace_back(c.topics.imu, wire::imu_schema(), opts("imu"));
    publishers_.emplace_back(c.topics.pose, wire::pose_schema(), opts("pose"));
    if (c.external_control) {
        net::SubscriberOptions so;
        so.daemon = c.net.daemon;
        so.requery_interval = std::chrono::milliseconds(100);
        commands_ = std::make_unique<net::Subscriber>(c.topics.cmd, wire::command_schema(), so);
    }
}

SimNode::~SimNode() {
    stop();
    if (command_thread_.joinable()) command_thread_.join();
}

void SimNode::stop() { stop_.store(true); }

bool SimNode::wait_ready(std::size_t pose_subscribers, std::size_t command_publishers,
                         std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    if (pose_subscribers > 0 && !publishers_.back().wait_for_subscribers(pose_subscribers, timeout)) {
        return false;
    }
    if (command_publishers > 0) {
        if (!commands_) return false;
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        return commands_->wait_for_publishers(command_publishers, std::max(left, std::chrono::milliseconds(0)));
    }
    return true;
}

void SimNode::publish_bundle(const ObservationBundle& b, NodeStats& stats) {
    const wire::BundleMessages m = wire::encode_bundle(b);
    const msg::Message* order[] = {&m.intensity, &m.depth, &m.events, &m.imu, &m.pose};
    for (std::size_t i = 0; i < publishers_.size(); ++i) {
        try {
            publishers_[i].publish(*order[i]);
        } catch (const Error& e) {
            ++stats.publish_errors;
            stats.last_error = e.what();
        }
    }
}

NodeStats SimNode::run() {
    stop_.store(false);
    NodeStats stats = sim_.config().mode == RunMode::lockstep ? run_lockstep() : run_streaming();
    stats.command_errors += command_errors_.load();
    return stats;
}

void SimNode::command_loop() {
    while (!stop_.load()) {
        try {
            auto r = commands_->receive(std::chrono::milliseconds(20));
            if (r) latest_.put(wire::decode_command(r->message));
        } catch (const Error&) {
            command_errors_.fetch_add(1);
        }
    }
}

NodeStats SimNode::run_streaming() {
    NodeStats stats;
    const SimConfig& c = sim_.config();
    if (commands_ && !command_thread_.joinable()) command_thread_ = std::thread([this] { command_loop(); });

    const auto period = std::chrono::microseconds(c.sensor_period_us());
    const auto start = Clock::now();
    auto next = start;
    while (!stop_.load() && (!options_.max_ticks || stats.ticks < *options_.max_ticks)) {
        if (c.paced) {
            const auto now = Clock::now();
            if (now < next) {
                std::this_thread::sleep_until(next);
            } else if (now - next > period / 10) {
                ++stats.overruns;
            }
            next += period;
        }
        if (auto cmd = latest_.take()) {
            sim_.set_command(*cmd);
            ++stats.commands_applied;
        }
        publish_bundle(sim_.step_once(), stats);
        ++stats.ticks;
    }
    stats.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    stop_.store(true);
    if (command_thread_.joinable()) command_thread_.join();
    return stats;
}

NodeStats SimNode::run_lockstep() {
    NodeStats stats;
    const SimConfig& c = sim_.config();
    const auto start = Clock::now();
    while (!stop_.load() && (!options_.max_ticks || stats.ticks < *options_.max_ticks)) {
        const ObservationBundle b = sim_.step_once();
        publish_bundle(b, stats);
        ++stats.ticks;

        const std::uint64_t k = b.step_id;
        const std::optional<Clock::time_point> deadline =
            c.zoh_timeout ? std::optional(Clock::now() + *c.zoh_timeout) : std::nullopt;
        bool matched = false;
        while (!stop_.load()) {
            auto wait = std::chrono::microseconds(100000);
            if (deadline) {
                const auto left = std::chrono::duration_cast<std::chrono::microseconds>(*deadline - Clock::now());
                if (left.count() <= 0) break;
                wait = std::min(wait, left);
            }
            std::optional<net::Received> r;
            try {
                r = commands_->receive(wait);
            } catch (const Error& e) {
                ++stats.command_errors;
                stats.last_error = e.what();
                continue;
            }
            if (!r) continue;
            dynamics::ControlCommand cmd;
            try {
                cmd = wire::decode_command(r->message);
            } catch (const Error& e) {
                ++stats.command_errors;
                stats.last_error = e.what();
                continue;
            }
            if (cmd.step_id == k) {
                sim_.set_command(cmd);
                ++stats.commands_applied;
                matched = true;
                break;
            }
            if (cmd.step_id < k) {
                ++stats.stale_commands;
            } else {
                ++stats.future_commands;
            }
        }
        if (!matched) {
            ++stats.zoh_activations;
            stats.zoh_steps.push_back(k);
        }
    }
    stats.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return stats;
}

EchoController::EchoController(ControllerOptions options)
    : options_(std::move(options)),
      poses_sub_(options_.topics.pose, wire::pose_schema(),
                 [&] {
                     net::SubscriberOptions so;
                     so.daemon = options_.daemon;
                     so.requery_interval = std::chrono::milliseconds(100);
                     return so;
                 }()),
      commands_pub_(options_.topics.cmd, wire::command_schema(),
                    publisher_options(options_.daemon, options_.transport, 1000, "echo-controller")) {
    thread_ = std::thread([this] { loop(); });
}

EchoController::~EchoController() {
    stop();
    if (thread_.joinable()) thread_.join();
}

void EchoController::stop() { stop_.store(true); }

bool EchoController::wait_connected(std::chrono::milliseconds timeout) const {
    const auto deadline = Clock::now() + timeout;
    if (!poses_sub_.wait_for_publishers(1, timeout)) return false;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    return commands_pub_.wait_for_subscribers(1, std::max(left, std::chrono::milliseconds(0)));
}

std::vector<std::uint64_t> EchoController::latencies_ns() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return latencies_;
}

void EchoController::loop() {
    std::optional<std::uint64_t> last_step;
    std::uint64_t last_sent_ns = 0;
    std::optional<Clock::time_point> next_slot;
    const auto period = options_.rate_hz > 0.0
                            ? std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / options_.rate_hz))
                            : Clock::duration::zero();
    while (!stop_.load()) {
        std::optional<net::Received> r;
        try {
            r = poses_sub_.receive(std::chrono::milliseconds(20));
        } catch (const Error&) {
            continue;
        }
        if (!r) continue;
        const wire::PoseSample pose = wire::decode_pose(r->message);
        poses_.fetch_add(1);
        if (last_step && pose.step_id == *last_step + 1) {
            std::lock_guard<std::mutex> lock(mutex_);
            latencies_.push_back(r->receive_time_ns - last_sent_ns);
        }
        last_step.reset();
        if (options_.skip_every > 0 && pose.step_id % options_.skip_every == 0) continue;

        dynamics::ControlCommand cmd = dynamics::ControlCommand::hover(options_.vehicle);
        cmd.step_id = static_cast<std::uint64_t>(static_cast<std::int64_t>(pose.step_id) + options_.step_offset);
        cmd.t_cmd = pose.state.t;
        if (options_.rate_hz > 0.0) {
            next_slot = next_slot ? std::max(*next_slot + period, Clock::now()) : Clock::now() + period;
            std::this_thread::sleep_until(*next_slot);
        }
        last_sent_ns = net::monotonic_ns();
        commands_pub_.publish(wire::encode_command(cmd), last_sent_ns);
        last_step = pose.step_id;
        replies_.fetch_add(1);
    }
}

}  // namespace evsim::sim
