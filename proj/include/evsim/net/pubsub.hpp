#pragma once

// Brokerless publish/subscribe over tcp or local stream sockets.
//
// Data connection: the subscriber sends "SUBSCRIBE <topic>\n", the publisher answers
// "SUBSCRIBED 1\n" (or "ERR <reason>\n" and closes) and then streams wire frames. Messages
// published after the subscriber has read the confirmation are delivered; earlier ones are not.

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "evsim/msg/codec.hpp"
#include "evsim/msg/frame.hpp"
#include "evsim/msg/schema.hpp"
#include "evsim/msg/value.hpp"

namespace evsim::net {

struct SendQueuePolicy {
    std::size_t high_water_mark = 1000;

    void validate() const;
};

using FramePtr = std::shared_ptr<const std::vector<std::byte>>;

// Bounded FIFO of encoded frames that drops its oldest entry when full.
class SendQueue {
public:
    explicit SendQueue(std::size_t high_water_mark);

    // Returns true when an older frame was dropped to make room.
    bool push(FramePtr frame);
    // Blocks until frames are available or the queue is closed; appends up to `max` frames to `out`.
    // Returns false once closed and empty.
    bool pop_batch(std::vector<FramePtr>& out, std::size_t max);
    void close();

    std::size_t size() const;
    std::uint64_t dropped() const;

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<FramePtr> frames_;
    std::size_t hwm_;
    std::uint64_t dropped_ = 0;
    bool waiting_ = false;
    bool closed_ = false;
};

struct PublisherOptions {
    std::string endpoint = "tcp://127.0.0.1:0";
    std::string daemon;          // empty: default_discovery_address()
    bool daemonless = false;     // skip registration and serve only the fixed endpoint
    std::string node_name;       // empty: derived from the topic
    SendQueuePolicy queue;
};

struct PublishResult {
    std::size_t subscribers = 0;  // queues the frame was handed to
    std::size_t dropped = 0;      // queues that discarded their oldest frame
};

class Publisher {
public:
    // Throws ConnectivityError on bind failure, unreachable daemon or rejected registration.
    Publisher(std::string topic, msg::MessageSchema schema, PublisherOptions options = {});
    ~Publisher();
    Publisher(Publisher&&) noexcept;
    Publisher& operator=(Publisher&&) noexcept;

    // Throws SerializationError before anything is sent when the message does not fit the schema.
    PublishResult publish(const msg::Message& message, std::uint64_t publish_time_ns = 0);

    const std::string& topic() const;
    const msg::MessageSchema& schema() const;
    std::string endpoint() const;
    std::uint64_t node_id() const;
    std::size_t subscriber_count() const;
    std::uint64_t dropped_total() const;
    bool wait_for_subscribers(std::size_t count, std::chrono::milliseconds timeout) const;

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

struct SubscriberOptions {
    std::string daemon;                   // empty: default_discovery_address()
    std::vector<std::string> endpoints;   // fixed publisher endpoints
    bool daemonless = false;              // use only `endpoints`
    std::size_t queue_capacity = 1000;    // drop-oldest bound on received frames
    std::chrono::milliseconds requery_interval{200};
};

struct ReceivedFrame {
    std::string topic;
    msg::FrameHeader header;
    msg::SharedBytes payload;
    std::uint64_t receive_time_ns = 0;
};

struct Received {
    msg::Message message;
    msg::FrameHeader header;
    std::uint64_t receive_time_ns = 0;
};

struct SubscriberStatus {
    std::size_t connected_publishers = 0;
    std::uint64_t frames_received = 0;
    std::uint64_t dropped = 0;
    std::uint64_t connection_losses = 0;
    bool daemon_reachable = true;
    std::string last_error;
};

class Subscriber {
public:
    // Throws ConnectivityError when the daemon cannot be reached at creation.
    Subscriber(std::string topic, msg::MessageSchema expected, SubscriberOptions options = {});
    ~Subscriber();
    Subscriber(Subscriber&&) noexcept;
    Subscriber& operator=(Subscriber&&) noexcept;

    // Next message, or nullopt after `timeout`. A frame with a foreign schema hash is discarded and
    // reported as TypeMismatchError; the following call continues with the next frame.
    std::optional<Received> receive(std::chrono::microseconds timeout);
    // Next raw frame without schema checks or decoding.
    std::optional<ReceivedFrame> receive_frame(std::chrono::microseconds timeout);

    // True once `count` publishers have confirmed the subscription.
    bool wait_for_publishers(std::size_t count, std::chrono::milliseconds timeout) const;

    SubscriberStatus status() const;
    const std::string& topic() const;
    const msg::MessageSchema& schema() const;

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace evsim::net
