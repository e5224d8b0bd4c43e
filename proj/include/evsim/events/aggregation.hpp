#pragma once

// Chunk-synchronous parallel event generation.
//
// Pixels are grouped into contiguous chunks of 32 lanes. Each lane runs the per-pixel
// contrast model, the chunk builds a mask of event-producing lanes plus their counts, and a
// single atomic reservation claims a contiguous block of the shared output buffer for the
// whole chunk. Every lane then writes at the block base plus the summed counts of the set
// lanes before it. Output matches generate_events_serial up to canonical_sort.

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "evsim/events/event_model.hpp"

namespace evsim::events {

inline constexpr std::size_t kChunkWidth = 32;

// Shared write cursor into a pre-allocated buffer.
class ReservationCursor {
public:
    struct Block {
        std::size_t base = 0;
        std::size_t granted = 0;  // slots actually usable, < count when saturated
        bool saturated = false;
    };

    explicit ReservationCursor(std::size_t capacity = 0) : capacity_(capacity) {}

    // Not thread-safe; call between frames.
    void reset(std::size_t capacity);

    Block reserve(std::size_t count);

    std::size_t next_free() const { return next_free_.load(std::memory_order_acquire); }
    std::size_t capacity() const { return capacity_; }
    // Number of atomic read-modify-write operations performed since reset.
    std::uint64_t reservation_count() const { return reservations_.load(std::memory_order_relaxed); }

private:
    std::atomic<std::size_t> next_free_{0};
    std::atomic<std::uint64_t> reservations_{0};
    std::size_t capacity_;
};

inline ReservationCursor::Block reserve_block(ReservationCursor& cursor, std::size_t count) {
    return cursor.reserve(count);
}

// Lane activity of one chunk: bit i set iff lane i emitted at least one event.
struct ChunkMask {
    std::uint32_t bits = 0;
    std::array<std::uint32_t, kChunkWidth> counts{};

    static ChunkMask from_counts(const std::array<std::uint32_t, kChunkWidth>& counts);

    std::uint32_t total() const;
    // Sum of the counts of set lanes below `lane`. Reduces to popcount when every count is 1.
    std::uint32_t offset_of(unsigned lane) const;
};

struct AggregationStats {
    std::uint64_t reservations = 0;
    std::uint64_t events_emitted = 0;
    std::uint64_t dropped = 0;
    std::uint64_t chunks = 0;
    std::uint64_t write_collisions = 0;  // only counted with write tracking enabled
};

// Fixed pool that runs `task_count` tasks over `workers` threads (the caller counts as one).
class WorkerPool {
public:
    explicit WorkerPool(unsigned workers);
    ~WorkerPool();
    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    unsigned size() const { return workers_; }
    // Blocks until fn(0) .. fn(workers - 1) have all returned.
    void run(const std::function<void(unsigned)>& fn);

private:
    void loop(unsigned index);

    unsigned workers_;
    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::condition_variable start_cv_;
    std::condition_variable done_cv_;
    const std::function<void(unsigned)>* job_ = nullptr;
    std::uint64_t generation_ = 0;
    unsigned pending_ = 0;
    bool stop_ = false;
};

class ChunkedEventGenerator {
public:
    explicit ChunkedEventGenerator(unsigned workers = 1);

    EventBatch generate(PixelStateGrid& state, const IntensityFrame& frame, Timestamp t_prev, Timestamp t_now,
                        const EventCameraConfig& config);
    EventBatch generate(PixelStateGrid& state, const LogFrame& log_frame, Timestamp t_prev, Timestamp t_now,
                        const EventCameraConfig& config);

    // Instrumentation for the most recent generate() call.
    const AggregationStats& last_stats() const { return stats_; }

    // Test hook: record every buffer slot written and count repeated writes.
    void set_write_tracking(bool enabled) { track_writes_ = enabled; }

    unsigned workers() const { return pool_.size(); }

private:
    std::size_t buffer_bound(const PixelStateGrid& state, const LogFrame& log_frame) const;
    void ensure_buffer(std::size_t capacity);

    WorkerPool pool_;
    ReservationCursor cursor_;
    std::unique_ptr<Event[]> buffer_;
    std::size_t buffer_size_ = 0;
    std::unique_ptr<std::atomic<std::uint8_t>[]> written_;
    bool track_writes_ = false;
    AggregationStats stats_;
};

// One-shot convenience wrapper around ChunkedEventGenerator.
EventBatch generate_events_parallel(PixelStateGrid& state, const IntensityFrame& frame, Timestamp t_prev,
                                    Timestamp t_now, const EventCameraConfig& config, unsigned workers,
                                    AggregationStats* stats = nullptr);

}  // namespace evsim::events
