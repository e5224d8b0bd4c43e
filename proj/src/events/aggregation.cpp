#include "evsim/events/aggregation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "evsim/common/error.hpp"
#include "evsim/events/pixel_kernel.hpp"

namespace evsim::events {

void ReservationCursor::reset(std::size_t capacity) {
    capacity_ = capacity;
    next_free_.store(0, std::memory_order_relaxed);
    reservations_.store(0, std::memory_order_relaxed);
}

ReservationCursor::Block ReservationCursor::reserve(std::size_t count) {
    if (count == 0) {
        const std::size_t at = next_free_.load(std::memory_order_acquire);
        return Block{at, 0, at > capacity_};
    }
    reservations_.fetch_add(1, std::memory_order_relaxed);
    const std::size_t base = next_free_.fetch_add(count, std::memory_order_acq_rel);
    if (base + count <= capacity_) {
        return Block{base, count, false};
    }
    const std::size_t granted = base < capacity_ ? capacity_ - base : 0;
    return Block{base, granted, true};
}

ChunkMask ChunkMask::from_counts(const std::array<std::uint32_t, kChunkWidth>& counts) {
    ChunkMask mask;
    mask.counts = counts;
    for (unsigned lane = 0; lane < kChunkWidth; ++lane) {
        if (counts[lane] > 0) {
            mask.bits |= (1U << lane);
        }
    }
    return mask;
}

std::uint32_t ChunkMask::total() const {
    std::uint32_t sum = 0;
    for (std::uint32_t c : counts) {
        sum += c;
    }
    return sum;
}

std::uint32_t ChunkMask::offset_of(unsigned lane) const {
    std::uint32_t preceding = bits & ((lane >= 32) ? ~0U : ((1U << lane) - 1U));
    std::uint32_t offset = 0;
    while (preceding != 0) {
        const int lower = std::countr_zero(preceding);
        offset += counts[static_cast<unsigned>(lower)];
        preceding &= preceding - 1;
    }
    return offset;
}

WorkerPool::WorkerPool(unsigned workers) : workers_(std::max(1U, workers)) {
    for (unsigned i = 1; i < workers_; ++i) {
        threads_.emplace_back([this, i] { loop(i); });
    }
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard lock(mutex_);
        stop_ = true;
    }
    start_cv_.notify_all();
    for (auto& t : threads_) {
        t.join();
    }
}

void WorkerPool::run(const std::function<void(unsigned)>& fn) {
    if (workers_ == 1) {
        fn(0);
        return;
    }
    {
        std::lock_guard lock(mutex_);
        job_ = &fn;
        pending_ = workers_ - 1;
        ++generation_;
    }
    start_cv_.notify_all();
    fn(0);
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
}

void WorkerPool::loop(unsigned index) {
    std::uint64_t seen = 0;
    for (;;) {
        const std::function<void(unsigned)>* job = nullptr;
        {
            std::unique_lock lock(mutex_);
            start_cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
            if (stop_) {
                return;
            }
            seen = generation_;
            job = job_;
        }
        (*job)(index);
        {
            std::lock_guard lock(mutex_);
            --pending_;
        }
        done_cv_.notify_one();
    }
}

ChunkedEventGenerator::ChunkedEventGenerator(unsigned workers) : pool_(workers) {}

void ChunkedEventGenerator::ensure_buffer(std::size_t capacity) {
    if (capacity > buffer_size_) {
        buffer_ = std::make_unique_for_overwrite<Event[]>(capacity);
        written_ = std::make_unique<std::atomic<std::uint8_t>[]>(capacity);
        buffer_size_ = capacity;
    }
}

std::size_t ChunkedEventGenerator::buffer_bound(const PixelStateGrid& state, const LogFrame& log_frame) const {
    std::size_t bound = 0;
    for (std::size_t i = 0; i < state.pixel_count(); ++i) {
        const double magnitude = std::abs(static_cast<double>(log_frame.values[i]) - state.ref_log[i]);
        const double threshold = std::min(state.thresholds_pos[i], state.thresholds_neg[i]);
        bound += static_cast<std::size_t>(std::floor((magnitude + detail::kCrossingTolerance) / threshold)) + 1;
    }
    return bound;
}

EventBatch ChunkedEventGenerator::generate(PixelStateGrid& state, const IntensityFrame& frame, Timestamp t_prev,
                                           Timestamp t_now, const EventCameraConfig& config) {
    if (state.width != frame.width || state.height != frame.height) {
        throw ValidationError("frame dimensions do not match pixel state");
    }
    return generate(state, log_transform(frame, config.log_eps), t_prev, t_now, config);
}

EventBatch ChunkedEventGenerator::generate(PixelStateGrid& state, const LogFrame& log_frame, Timestamp t_prev,
                                           Timestamp t_now, const EventCameraConfig& config) {
    if (t_now <= t_prev) {
        throw ValidationError("event interval must satisfy t_now > t_prev");
    }
    if (state.width != log_frame.width || state.height != log_frame.height) {
        throw ValidationError("frame dimensions do not match pixel state");
    }

    const std::size_t pixels = state.pixel_count();
    std::size_t capacity = config.capacity_for(state.width, state.height);
    if (capacity == kUnboundedCapacity) {
        capacity = buffer_bound(state, log_frame);
    }
    ensure_buffer(capacity);
    cursor_.reset(capacity);
    if (track_writes_) {
        for (std::size_t i = 0; i < capacity; ++i) {
            written_[i].store(0, std::memory_order_relaxed);
        }
    }

    const std::size_t chunks = (pixels + kChunkWidth - 1) / kChunkWidth;
    const unsigned workers = pool_.size();
    std::atomic<std::uint64_t> dropped{0};
    std::atomic<std::uint64_t> collisions{0};
    const std::uint32_t width = state.width;
    Event* const out = buffer_.get();

    pool_.run([&](unsigned worker) {
        const std::size_t first = chunks * worker / workers;
        const std::size_t last = chunks * (worker + 1) / workers;
        std::vector<Event> lanes;
        std::uint64_t local_dropped = 0;
        std::uint64_t local_collisions = 0;
        for (std::size_t chunk = first; chunk < last; ++chunk) {
            lanes.clear();
            std::array<std::uint32_t, kChunkWidth> counts{};
            const std::size_t base_pixel = chunk * kChunkWidth;
            const std::size_t lane_end = std::min(kChunkWidth, pixels - base_pixel);
            for (std::size_t lane = 0; lane < lane_end; ++lane) {
                const std::size_t i = base_pixel + lane;
                const auto x = static_cast<std::uint16_t>(i % width);
                const auto y = static_cast<std::uint16_t>(i / width);
                const std::size_t before = lanes.size();
                detail::step_pixel(state.ref_log[i], state.last_event_t[i], state.thresholds_pos[i],
                                   state.thresholds_neg[i], log_frame.values[i], t_prev, t_now,
                                   config.refractory_us, [&](Timestamp t, std::int8_t polarity) {
                                       lanes.push_back(Event{t, x, y, polarity});
                                   });
                counts[lane] = static_cast<std::uint32_t>(lanes.size() - before);
            }

            const ChunkMask mask = ChunkMask::from_counts(counts);
            const std::uint32_t total = mask.total();
            if (total == 0) {
                continue;
            }
            const ReservationCursor::Block block = cursor_.reserve(total);
            for (std::uint32_t active = mask.bits; active != 0; active &= active - 1) {
                const auto lane = static_cast<unsigned>(std::countr_zero(active));
                const std::uint32_t offset = mask.offset_of(lane);
                for (std::uint32_t j = 0; j < counts[lane]; ++j) {
                    const std::size_t slot = offset + j;
                    if (slot >= block.granted) {
                        ++local_dropped;
                        continue;
                    }
                    const std::size_t index = block.base + slot;
                    if (track_writes_ && written_[index].exchange(1, std::memory_order_relaxed) != 0) {
                        ++local_collisions;
                    }
                    out[index] = lanes[offset + j];
                }
            }
        }
        dropped.fetch_add(local_dropped, std::memory_order_relaxed);
        collisions.fetch_add(local_collisions, std::memory_order_relaxed);
    });

    const std::size_t written = std::min(cursor_.next_free(), capacity);
    EventBatch batch;
    batch.events.assign(out, out + written);
    batch.dropped_count = dropped.load();

    stats_.reservations = cursor_.reservation_count();
    stats_.events_emitted = written;
    stats_.dropped = batch.dropped_count;
    stats_.chunks = chunks;
    stats_.write_collisions = collisions.load();
    return batch;
}

EventBatch generate_events_parallel(PixelStateGrid& state, const IntensityFrame& frame, Timestamp t_prev,
                                    Timestamp t_now, const EventCameraConfig& config, unsigned workers,
                                    AggregationStats* stats) {
    if (workers == 0) {
        throw ValidationError("workers must be at least 1");
    }
    ChunkedEventGenerator generator(workers);
    EventBatch batch = generator.generate(state, frame, t_prev, t_now, config);
    if (stats != nullptr) {
        *stats = generator.last_stats();
    }
    return batch;
}

}  // namespace evsim::events
