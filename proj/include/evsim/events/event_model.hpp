#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace evsim::events {

using Timestamp = std::uint64_t;  // microseconds

struct Event {
    Timestamp t = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t polarity = 1;  // +1 or -1

    friend bool operator==(const Event&, const Event&) = default;
};

// Row-major linear intensity image, values in [0, 1].
struct IntensityFrame {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    Timestamp t = 0;
    std::vector<float> values;

    IntensityFrame() = default;
    IntensityFrame(std::uint32_t w, std::uint32_t h, Timestamp stamp, float fill = 0.0F)
        : width(w), height(h), t(stamp), values(static_cast<std::size_t>(w) * h, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    float& at(std::uint32_t x, std::uint32_t y) { return values[static_cast<std::size_t>(y) * width + x]; }
    float at(std::uint32_t x, std::uint32_t y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Row-major log-intensity grid produced by log_transform.
struct LogFrame {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<float> values;
};

inline constexpr std::size_t kUnboundedCapacity = std::numeric_limits<std::size_t>::max();

struct EventCameraConfig {
    double c_pos = 0.2;
    double c_neg = 0.2;
    double sigma_c = 0.0;
    Timestamp refractory_us = 0;
    double log_eps = 0.01;
    double noise_rate_hz = 0.0;
    // Unset means 8 x width x height. kUnboundedCapacity disables the bound.
    std::optional<std::size_t> max_events_per_frame;

    std::size_t capacity_for(std::uint32_t width, std::uint32_t height) const;
    void validate() const;
};

// Smallest effective per-pixel threshold after jitter.
inline constexpr float kMinThreshold = 0.01F;

struct PixelStateGrid {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<float> ref_log;
    // Signed so that frame0.t - refractory_us stays representable near t = 0.
    std::vector<std::int64_t> last_event_t;
    std::vector<float> thresholds_pos;
    std::vector<float> thresholds_neg;

    std::size_t pixel_count() const { return ref_log.size(); }

    friend bool operator==(const PixelStateGrid&, const PixelStateGrid&) = default;
};

struct EventBatch {
    std::vector<Event> events;
    std::uint64_t dropped_count = 0;

    friend bool operator==(const EventBatch&, const EventBatch&) = default;
};

// Throws ValidationError naming the first pixel that is non-finite or outside [0, 1].
void validate_frame(const IntensityFrame& frame);

LogFrame log_transform(const IntensityFrame& frame, double log_eps);

PixelStateGrid init_pixel_states(const IntensityFrame& frame0, const EventCameraConfig& config,
                                 std::uint64_t seed);

// Serial reference model. Events come out pixel-major, chronological within a pixel.
EventBatch generate_events_serial(PixelStateGrid& state, const IntensityFrame& frame, Timestamp t_prev,
                                  Timestamp t_now, const EventCameraConfig& config);

// Same model fed with an already log-transformed frame.
EventBatch generate_events_serial(PixelStateGrid& state, const LogFrame& log_frame, Timestamp t_prev,
                                  Timestamp t_now, const EventCameraConfig& config);

EventBatch inject_noise_events(std::uint32_t width, std::uint32_t height, Timestamp t_prev, Timestamp t_now,
                               double noise_rate_hz, std::uint64_t seed);

// Keeps at most floor(max_events_per_sec * window) earliest events in each window.
// Windows are aligned to multiples of window_us on the absolute time axis.
EventBatch limit_bandwidth(const EventBatch& batch, double max_events_per_sec, Timestamp window_us);

// Signed polarity sum per pixel over events with t in [t_end - window, t_end).
std::vector<std::int32_t> accumulate_events_to_image(const EventBatch& batch, Timestamp window_us,
                                                     Timestamp t_end, std::uint32_t width,
                                                     std::uint32_t height);

// Orders by (t, y, x, polarity), stable.
EventBatch canonical_sort(EventBatch batch);

bool is_time_sorted(std::span<const Event> events);

}  // namespace evsim::events
