#include "evsim/net/pubsub.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <map>
#include <thread>

#include "evsim/common/error.hpp"
#include "evsim/net/discovery.hpp"
#include "evsim/net/socket.hpp"

namespace evsim::net {

namespace {

using namespace std::chrono_literals;

constexpr std::size_t kSendBatch = 256;
constexpr std::size_t kStagingBytes = 256 * 1024;
constexpr std::uint64_t kMaxFrameBytes = 1ULL << 31;
constexpr auto kHandshakeTimeout = 1000ms;
constexpr auto kConnectTimeout = 500ms;
constexpr auto kMaxBackoff = 2000ms;

void validate_topic(const std::string& topic) {
    if (topic.empty() || topic.size() > msg::kMaxTopicLength) {
        throw ValidationError("topic must have 1 to 255 bytes");
    }
    for (char c : topic) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            throw ValidationError("topic '" + topic + "' contains whitespace");
        }
    }
}

std::string node_name_for(const std::string& topic) {
    std::string name = "pub";
    for (char c : topic) name.push_back(c == '/' ? '.' : c);
    return name;
}

// Sends a batch of frames with one gather write per kernel call, resuming after partial writes.
void send_frames(int fd, const std::vector<FramePtr>& frames) {
    std::vector<iovec> iov;
    iov.reserve(frames.size());
    for (const FramePtr& f : frames) {
        iov.push_back({const_cast<std::byte*>(f->data()), f->size()});
    }
    std::size_t first = 0;
    while (first < iov.size()) {
        msghdr mh{};
        mh.msg_iov = iov.data() + first;
        mh.msg_iovlen = std::min<std::size_t>(iov.size() - first, IOV_MAX);
        const ssize_t n = ::sendmsg(fd, &mh, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ConnectivityError(std::string("send failed: ") + std::strerror(errno));
        }
        auto left = static_cast<std::size_t>(n);
        while (first < iov.size() && left >= iov[first].iov_len) {
            left -= iov[first].iov_len;
            ++first;
        }
        if (left > 0) {
            iov[first].iov_base = static_cast<std::byte*>(iov[first].iov_base) + left;
            iov[first].iov_len -= left;
        }
    }
}

}  // namespace

void SendQueuePolicy::validate() const {
    if (high_water_mark < 1) {
        throw ValidationError("high water mark must be at least 1");
    }
}

SendQueue::SendQueue(std::size_t high_water_mark) : hwm_(high_water_mark) {
    SendQueuePolicy{high_water_mark}.validate();
}

bool SendQueue::push(FramePtr frame) {
    bool dropped = false;
    bool wake = false;
    {
        std::lock_guard lock(mutex_);
        if (closed_) return false;
        if (frames_.size() >= hwm_) {
            frames_.pop_front();
            ++dropped_;
            dropped = true;
        }
        frames_.push_back(std::move(frame));
        wake = waiting_;
    }
    if (wake) cv_.notify_one();
    return dropped;
}

bool SendQueue::pop_batch(std::vector<FramePtr>& out, std::size_t max) {
    std::unique_lock lock(mutex_);
    if (frames_.empty() && !closed_) {
        waiting_ = true;
        cv_.wait(lock, [&] { return !frames_.empty() || closed_; });
        waiting_ = false;
    }
    if (frames_.empty()) return false;
    const std::size_t n = std::min(max, frames_.size());
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(std::move(frames_.front()));
        frames_.pop_front();
    }
    return true;
}

void SendQueue::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    cv_.notify_all();
}

std::size_t SendQueue::size() const {
    std::lock_guard lock(mutex_);
    return frames_.size();
}

std::uint64_t SendQueue::dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
}

// ---------------------------------------------------------------------------------------------
// Publisher

namespace {

struct Connection {
    Connection(Fd f, std::size_t hwm) : fd(std::move(f)), queue(hwm) {}

    Fd fd;
    SendQueue queue;
    std::thread sender;
    std::atomic<bool> alive{true};
    std::atomic<bool> finished{false};
};

}  // namespace

struct Publisher::Impl {
    std::string topic;
    msg::MessageSchema schema;
    PublisherOptions options;
    Endpoint endpoint;
    Fd listener;
    Wakeup wake;
    std::uint64_t node_id = 0;
    std::unique_ptr<DiscoveryClient> client;
    std::chrono::milliseconds lease{0};

    mutable std::mutex mutex;
    mutable std::condition_variable changed;
    std::vector<std::shared_ptr<Connection>> connections;
    std::atomic<std::uint64_t> dropped_total{0};

    std::atomic<bool> stopping{false};
    std::mutex hb_mutex;
    std::condition_variable hb_cv;
    std::thread acceptor;
    std::thread heartbeat;

    NodeInfo node_info() const {
        NodeInfo info;
        info.node_id = node_id;
        info.node_name = options.node_name.empty() ? node_name_for(topic) : options.node_name;
        info.publications.push_back({topic, schema.hash(), endpoint.str()});
        return info;
    }

    void start_sender(const std::shared_ptr<Connection>& conn) {
        conn->sender = std::thread([conn] {
            try {
                write_all(conn->fd.get(), std::string_view("SUBSCRIBED 1\n"));
                std::vector<FramePtr> batch;
                batch.reserve(kSendBatch);
                while (conn->queue.pop_batch(batch, kSendBatch)) {
                    send_frames(conn->fd.get(), batch);
                    batch.clear();
                }
            } catch (const ConnectivityError&) {
                conn->alive = false;
                conn->queue.close();
            }
            conn->finished = true;
        });
    }

    void handshake(Fd fd) {
        LineReader reader;
        std::optional<std::string> line;
        try {
            line = reader.read_line(fd.get(), Clock::now() + kHandshakeTimeout, 4096);
        } catch (const ConnectivityError&) {
            return;
        }
        if (!line || !line->starts_with("SUBSCRIBE ")) {
            try {
                write_all(fd.get(), std::string_view("ERR expected SUBSCRIBE <topic>\n"));
            } catch (const ConnectivityError&) {
            }
            return;
        }
        bool match = false;
        std::size_t pos = 10;
        while (pos < line->size()) {
            const std::size_t end = std::min(line->find(' ', pos), line->size());
            if (line->compare(pos, end - pos, topic) == 0 && end - pos == topic.size()) match = true;
            pos = end + 1;
        }
        if (!match) {
            try {
                write_all(fd.get(), "ERR unknown-topic; this endpoint serves " + topic + "\n");
            } catch (const ConnectivityError&) {
            }
            return;
        }
        tune_socket(fd.get());
        auto conn = std::make_shared<Connection>(std::move(fd), options.queue.high_water_mark);
        {
            std::lock_guard lock(mutex);
            connections.push_back(conn);
            // Started under the lock so that no publish can reach the socket before the confirmation.
            start_sender(conn);
        }
        changed.notify_all();
    }

    void reap() {
        std::vector<std::shared_ptr<Connection>> dead;
        {
            std::lock_guard lock(mutex);
            auto it = std::stable_partition(connections.begin(), connections.end(),
                                            [](const auto& c) { return c->alive.load(); });
            dead.assign(std::make_move_iterator(it), std::make_move_iterator(connections.end()));
            connections.erase(it, connections.end());
        }
        for (auto& c : dead) {
            c->queue.close();
            ::shutdown(c->fd.get(), SHUT_RDWR);
            if (c->sender.joinable()) c->sender.join();
        }
        if (!dead.empty()) changed.notify_all();
    }

    void accept_loop() {
        while (!stopping) {
            std::vector<pollfd> fds{{wake.fd(), POLLIN, 0}, {listener.get(), POLLIN, 0}};
            std::vector<std::shared_ptr<Connection>> watched;
            {
                std::lock_guard lock(mutex);
                watched = connections;
            }
            for (const auto& c : watched) fds.push_back({c->fd.get(), POLLRDHUP, 0});
            ::poll(fds.data(), fds.size(), 200);
            if (stopping) break;
            if ((fds[0].revents & POLLIN) != 0) wake.drain();
            for (std::size_t i = 0; i < watched.size(); ++i) {
                const short ev = fds[i + 2].revents;
                if ((ev & (POLLRDHUP | POLLHUP | POLLERR)) != 0) {
                    watched[i]->alive = false;
                } else if ((ev & POLLIN) != 0) {
                    char sink[256];
                    if (::recv(watched[i]->fd.get(), sink, sizeof(sink), MSG_DONTWAIT) == 0) watched[i]->alive = false;
                }
            }
            reap();
            if ((fds[1].revents & POLLIN) != 0) {
                Fd conn(::accept4(listener.get(), nullptr, nullptr, SOCK_CLOEXEC));
                if (conn.valid()) handshake(std::move(conn));
            }
        }
    }

    void heartbeat_loop() {
        auto interval = std::max(lease / 3, std::chrono::milliseconds(10));
        std::unique_lock lock(hb_mutex);
        while (!stopping) {
            hb_cv.wait_for(lock, interval, [&] { return stopping.load(); });
            if (stopping) break;
            lock.unlock();
            try {
                if (auto granted = client->heartbeat(node_id)) {
                    interval = std::max(*granted / 3, std::chrono::milliseconds(10));
                } else {
                    interval = std::max(client->register_node(node_info()) / 3, std::chrono::milliseconds(10));
                }
            } catch (const ConnectivityError&) {
                // The daemon is down; keep trying at the same cadence.
            }
            lock.lock();
        }
    }

    void shutdown() {
        stopping = true;
        hb_cv.notify_all();
        wake.notify();
        if (acceptor.joinable()) acceptor.join();
        if (heartbeat.joinable()) heartbeat.join();
        if (client) {
            try {
                client->unregister(node_id);
            } catch (const Error&) {
            }
        }
        std::vector<std::shared_ptr<Connection>> all;
        {
            std::lock_guard lock(mutex);
            all.swap(connections);
        }
        for (auto& c : all) c->queue.close();
        // Give senders a moment to flush, then abort any stuck on a stalled peer.
        const auto deadline = Clock::now() + 200ms;
        for (auto& c : all) {
            while (!c->finished && Clock::now() < deadline) std::this_thread::sleep_for(1ms);
            ::shutdown(c->fd.get(), SHUT_RDWR);
            if (c->sender.joinable()) c->sender.join();
        }
        listener.reset();
        if (endpoint.transport == Transport::local) ::unlink(endpoint.path.c_str());
    }
};

Publisher::Publisher(std::string topic, msg::MessageSchema schema, PublisherOptions options)
    : impl_(std::make_unique<Impl>()) {
    validate_topic(topic);
    options.queue.validate();
    Impl& s = *impl_;
    s.topic = std::move(topic);
    s.schema = std::move(schema);
    s.options = std::move(options);
    s.endpoint = Endpoint::parse(s.options.endpoint);
    s.listener = listen_on(s.endpoint);
    s.node_id = random_node_id();
    if (!s.options.daemonless) {
        s.client = std::make_unique<DiscoveryClient>(
            s.options.daemon.empty() ? default_discovery_address() : s.options.daemon);
        try {
            s.lease = s.client->register_node(s.node_info());
        } catch (...) {
            s.listener.reset();
            if (s.endpoint.transport == Transport::local) ::unlink(s.endpoint.path.c_str());
            throw;
        }
    }
    s.acceptor = std::thread([&s] { s.accept_loop(); });
    if (s.client) {
        s.heartbeat = std::thread([&s] { s.heartbeat_loop(); });
    }
}

Publisher::~Publisher() {
    if (impl_) impl_->shutdown();
}

Publisher::Publisher(Publisher&&) noexcept = default;

Publisher& Publisher::operator=(Publisher&& other) noexcept {
    if (this != &other) {
        if (impl_) impl_->shutdown();
        impl_ = std::move(other.impl_);
    }
    return *this;
}

PublishResult Publisher::publish(const msg::Message& message, std::uint64_t publish_time_ns) {
    Impl& s = *impl_;
    const std::size_t payload = msg::serialized_size(message, s.schema);
    auto frame = std::make_shared<std::vector<std::byte>>();
    frame->reserve(1 + s.topic.size() + msg::kFrameHeaderSize + payload);
    msg::frame_encode_prefix(*frame, s.topic, s.schema.hash(), publish_time_ns == 0 ? monotonic_ns() : publish_time_ns,
                             payload);
    msg::serialize_into(message, s.schema, *frame);
    FramePtr shared = std::move(frame);

    PublishResult result;
    std::lock_guard lock(s.mutex);
    for (const auto& c : s.connections) {
        if (!c->alive.load(std::memory_order_relaxed)) continue;
        ++result.subscribers;
        if (c->queue.push(shared)) ++result.dropped;
    }
    if (result.dropped > 0) s.dropped_total.fetch_add(result.dropped, std::memory_order_relaxed);
    return result;
}

const std::string& Publisher::topic() const { return impl_->topic; }
const msg::MessageSchema& Publisher::schema() const { return impl_->schema; }
std::string Publisher::endpoint() const { return impl_->endpoint.str(); }
std::uint64_t Publisher::node_id() const { return impl_->node_id; }
std::uint64_t Publisher::dropped_total() const { return impl_->dropped_total.load(); }

std::size_t Publisher::subscriber_count() const {
    std::lock_guard lock(impl_->mutex);
    return static_cast<std::size_t>(std::count_if(impl_->connections.begin(), impl_->connections.end(),
                                                  [](const auto& c) { return c->alive.load(); }));
}

bool Publisher::wait_for_subscribers(std::size_t count, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(impl_->mutex);
    return impl_->changed.wait_for(lock, timeout, [&] {
        return static_cast<std::size_t>(std::count_if(impl_->connections.begin(), impl_->connections.end(),
                                                      [](const auto& c) { return c->alive.load(); })) >= count;
    });
}

// ---------------------------------------------------------------------------------------------
// Subscriber

namespace {

struct InboundConnection {
    std::string endpoint;
    Fd fd;
    std::vector<std::byte> staging = std::vector<std::byte>(kStagingBytes);
    std::size_t have = 0;
    std::shared_ptr<std::byte[]> big;
    std::size_t big_size = 0;
    std::size_t big_have = 0;
};

struct Backoff {
    Clock::time_point next_attempt{};
    int failures = 0;
};

}  // namespace

struct Subscriber::Impl {
    std::string topic;
    msg::MessageSchema schema;
    SubscriberOptions options;
    std::unique_ptr<DiscoveryClient> client;
    Wakeup wake;
    std::atomic<bool> stopping{false};
    std::thread thread;

    // Owned by the reception thread.
    std::vector<std::unique_ptr<InboundConnection>> connections;
    std::map<std::string, Backoff> backoff;

    mutable std::mutex queue_mutex;
    std::condition_variable queue_cv;
    std::deque<ReceivedFrame> frames;
    std::vector<ReceivedFrame> pending;  // reception thread only
    bool consumer_waiting = false;

    mutable std::mutex status_mutex;
    mutable std::condition_variable status_cv;
    SubscriberStatus status;
    std::atomic<std::uint64_t> frames_received{0};
    std::uint64_t dropped = 0;

    void set_error(const std::string& what) {
        std::lock_guard lock(status_mutex);
        status.last_error = what;
    }

    void publish_connection_count() {
        {
            std::lock_guard lock(status_mutex);
            status.connected_publishers = connections.size();
        }
        status_cv.notify_all();
    }

    // One lock and at most one wakeup per batch.
    void enqueue(std::vector<ReceivedFrame>& batch) {
        if (batch.empty()) return;
        bool wake_consumer = false;
        {
            std::lock_guard lock(queue_mutex);
            for (ReceivedFrame& f : batch) {
                if (frames.size() >= options.queue_capacity) {
                    frames.pop_front();
                    ++dropped;
                }
                frames.push_back(std::move(f));
            }
            wake_consumer = consumer_waiting;
        }
        frames_received.fetch_add(batch.size(), std::memory_order_relaxed);
        batch.clear();
        if (wake_consumer) queue_cv.notify_one();
    }

    void decode_into(std::vector<ReceivedFrame>& out, const std::shared_ptr<std::byte[]>& owner,
                     std::span<const std::byte> bytes, std::uint64_t now_ns) {
        const msg::FrameView view = msg::frame_decode(bytes);
        if (view.topic != topic) return;
        ReceivedFrame& f = out.emplace_back();
        f.topic = std::string(view.topic);
        f.header = view.header;
        f.payload = msg::SharedBytes{std::shared_ptr<const void>(owner, owner.get()), view.payload};
        f.receive_time_ns = now_ns;
    }

    void emit(std::shared_ptr<std::byte[]> owner, std::size_t size) {
        std::vector<ReceivedFrame> batch;
        decode_into(batch, owner, {owner.get(), size}, monotonic_ns());
        enqueue(batch);
    }

    // Complete frames found in one pass share a single copied block.
    void emit_run(const InboundConnection& c, std::size_t size) {
        if (size == 0) return;
        std::shared_ptr<std::byte[]> block(new std::byte[size]);
        std::memcpy(block.get(), c.staging.data(), size);
        const std::uint64_t now_ns = monotonic_ns();
        std::size_t off = 0;
        while (off < size) {
            const std::span<const std::byte> rest(block.get() + off, size - off);
            const std::size_t n = *msg::frame_size(rest);
            decode_into(pending, block, rest.first(n), now_ns);
            off += n;
        }
        enqueue(pending);
    }

    void parse(InboundConnection& c) {
        std::size_t off = 0;
        while (off < c.have) {
            const std::span<const std::byte> rest(c.staging.data() + off, c.have - off);
            const auto total = msg::frame_size(rest);
            if (!total) break;
            if (*total > kMaxFrameBytes) {
                throw ProtocolError("frame of " + std::to_string(*total) + " bytes exceeds the receive limit");
            }
            if (*total <= rest.size()) {
                off += *total;
                continue;
            }
            break;
        }
        emit_run(c, off);
        if (off < c.have) {
            const std::span<const std::byte> rest(c.staging.data() + off, c.have - off);
            const auto total = msg::frame_size(rest);
            if (total && *total > c.staging.size() / 2) {
                // Large frame: receive the remainder straight into its own buffer.
                c.big.reset(new std::byte[*total]);
                std::memcpy(c.big.get(), rest.data(), rest.size());
                c.big_size = *total;
                c.big_have = rest.size();
                off = c.have;
            }
        }
        if (off > 0) {
            std::memmove(c.staging.data(), c.staging.data() + off, c.have - off);
            c.have -= off;
        }
    }

    // Returns false when the connection is finished.
    bool read_from(InboundConnection& c) {
        for (int round = 0; round < 64; ++round) {
            std::byte* dst = nullptr;
            std::size_t room = 0;
            if (c.big) {
                dst = c.big.get() + c.big_have;
                room = c.big_size - c.big_have;
            } else {
                dst = c.staging.data() + c.have;
                room = c.staging.size() - c.have;
            }
            const ssize_t n = ::recv(c.fd.get(), dst, room, MSG_DONTWAIT);
            if (n == 0) return false;
            if (n < 0) {
                if (errno == EINTR) continue;
                return errno == EAGAIN || errno == EWOULDBLOCK;
            }
            if (c.big) {
                c.big_have += static_cast<std::size_t>(n);
                if (c.big_have == c.big_size) {
                    const std::size_t size = c.big_size;
                    emit(std::move(c.big), size);
                    c.big.reset();
                    c.big_size = c.big_have = 0;
                }
            } else {
                c.have += static_cast<std::size_t>(n);
                parse(c);
            }
        }
        return true;
    }

    bool connect_one(const std::string& endpoint) {
        Backoff& b = backoff[endpoint];
        if (Clock::now() < b.next_attempt) return false;
        try {
            auto conn = std::make_unique<InboundConnection>();
            conn->endpoint = endpoint;
            conn->fd = connect_to(Endpoint::parse(endpoint), kConnectTimeout);
            write_all(conn->fd.get(), "SUBSCRIBE " + topic + "\n");
            LineReader reader;
            const auto reply = reader.read_line(conn->fd.get(), Clock::now() + kHandshakeTimeout, 4096);
            if (!reply) throw ConnectivityError("no subscription confirmation from " + endpoint);
            if (!reply->starts_with("SUBSCRIBED")) throw ConnectivityError(endpoint + " refused: " + *reply);
            const std::string leftover = reader.take_leftover();
            std::memcpy(conn->staging.data(), leftover.data(), leftover.size());
            conn->have = leftover.size();
            set_nonblocking(conn->fd.get(), true);
            parse(*conn);
            connections.push_back(std::move(conn));
            b = Backoff{};
            return true;
        } catch (const Error& e) {
            ++b.failures;
            const auto delay = std::min<std::chrono::milliseconds>(kMaxBackoff, 50ms * (1 << std::min(b.failures, 6)));
            b.next_attempt = Clock::now() + delay;
            set_error(e.what());
            return false;
        }
    }

    void connect_targets(const std::vector<std::string>& targets) {
        bool added = false;
        for (const std::string& ep : targets) {
            const bool connected = std::any_of(connections.begin(), connections.end(),
                                               [&](const auto& c) { return c->endpoint == ep; });
            if (!connected) added |= connect_one(ep);
        }
        if (added) publish_connection_count();
    }

    std::vector<std::string> discover() {
        std::vector<std::string> targets = options.endpoints;
        if (client) {
            try {
                for (const TopicEndpoint& e : client->query(topic)) targets.push_back(e.endpoint);
                std::lock_guard lock(status_mutex);
                status.daemon_reachable = true;
            } catch (const ConnectivityError& e) {
                std::lock_guard lock(status_mutex);
                status.daemon_reachable = false;
                status.last_error = e.what();
            }
        }
        std::sort(targets.begin(), targets.end());
        targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
        return targets;
    }

    void drop(std::size_t index, const std::string& why) {
        const std::string ep = connections[index]->endpoint;
        connections.erase(connections.begin() + static_cast<std::ptrdiff_t>(index));
        Backoff& b = backoff[ep];
        b.next_attempt = Clock::now() + 50ms;
        {
            std::lock_guard lock(status_mutex);
            ++status.connection_losses;
            status.last_error = ep + ": " + why;
        }
        publish_connection_count();
    }

    void run() {
        auto next_query = Clock::now() + options.requery_interval;
        while (!stopping) {
            const auto now = Clock::now();
            if (now >= next_query) {
                connect_targets(discover());
                next_query = Clock::now() + options.requery_interval;
            }
            std::vector<pollfd> fds{{wake.fd(), POLLIN, 0}};
            for (const auto& c : connections) fds.push_back({c->fd.get(), POLLIN, 0});
            const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(next_query - Clock::now());
            ::poll(fds.data(), fds.size(), static_cast<int>(std::max<long long>(wait.count(), 0) + 1));
            if (stopping) break;
            if ((fds[0].revents & POLLIN) != 0) wake.drain();
            for (std::size_t i = connections.size(); i-- > 0;) {
                if (fds[i + 1].revents == 0) continue;
                try {
                    if (!read_from(*connections[i])) drop(i, "connection closed");
                } catch (const Error& e) {
                    drop(i, e.what());
                }
            }
        }
    }
};

Subscriber::Subscriber(std::string topic, msg::MessageSchema expected, SubscriberOptions options)
    : impl_(std::make_unique<Impl>()) {
    validate_topic(topic);
    if (options.queue_capacity < 1) {
        throw ValidationError("subscriber queue capacity must be at least 1");
    }
    Impl& s = *impl_;
    s.topic = std::move(topic);
    s.schema = std::move(expected);
    s.options = std::move(options);
    std::vector<std::string> targets = s.options.endpoints;
    if (!s.options.daemonless) {
        s.client = std::make_unique<DiscoveryClient>(
            s.options.daemon.empty() ? default_discovery_address() : s.options.daemon);
        for (const TopicEndpoint& e : s.client->query(s.topic)) targets.push_back(e.endpoint);
    }
    s.connect_targets(targets);
    s.thread = std::thread([&s] { s.run(); });
}

Subscriber::~Subscriber() {
    if (!impl_) return;
    impl_->stopping = true;
    impl_->wake.notify();
    if (impl_->thread.joinable()) impl_->thread.join();
    impl_->queue_cv.notify_all();
}

Subscriber::Subscriber(Subscriber&&) noexcept = default;

Subscriber& Subscriber::operator=(Subscriber&& other) noexcept {
    if (this != &other) {
        Subscriber dying(std::move(*this));
        impl_ = std::move(other.impl_);
    }
    return *this;
}

std::optional<ReceivedFrame> Subscriber::receive_frame(std::chrono::microseconds timeout) {
    Impl& s = *impl_;
    std::unique_lock lock(s.queue_mutex);
    if (s.frames.empty()) {
        s.consumer_waiting = true;
        s.queue_cv.wait_for(lock, timeout, [&] { return !s.frames.empty(); });
        s.consumer_waiting = false;
        if (s.frames.empty()) return std::nullopt;
    }
    ReceivedFrame f = std::move(s.frames.front());
    s.frames.pop_front();
    return f;
}

std::optional<Received> Subscriber::receive(std::chrono::microseconds timeout) {
    auto frame = receive_frame(timeout);
    if (!frame) return std::nullopt;
    const msg::SchemaHash expected = impl_->schema.hash();
    if (frame->header.schema_hash != expected) {
        throw TypeMismatchError(expected.value, frame->header.schema_hash.value);
    }
    Received r;
    r.message = msg::deserialize(frame->payload, impl_->schema, frame->header.schema_hash);
    r.header = frame->header;
    r.receive_time_ns = frame->receive_time_ns;
    return r;
}

bool Subscriber::wait_for_publishers(std::size_t count, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(impl_->status_mutex);
    return impl_->status_cv.wait_for(lock, timeout, [&] { return impl_->status.connected_publishers >= count; });
}

SubscriberStatus Subscriber::status() const {
    SubscriberStatus out;
    {
        std::lock_guard lock(impl_->status_mutex);
        out = impl_->status;
    }
    out.frames_received = impl_->frames_received.load();
    std::lock_guard lock(impl_->queue_mutex);
    out.dropped = impl_->dropped;
    return out;
}

const std::string& Subscriber::topic() const { return impl_->topic; }
const msg::MessageSchema& Subscriber::schema() const { return impl_->schema; }

}  // namespace evsim::net
