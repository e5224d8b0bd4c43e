#include "evsim/events/event_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "evsim/common/error.hpp"
#include "evsim/events/pixel_kernel.hpp"

namespace evsim::events {

namespace {

void check_interval(Timestamp t_prev, Timestamp t_now) {
    if (t_now <= t_prev) {
        throw ValidationError("event interval must satisfy t_now > t_prev (got " + std::to_string(t_prev) +
                              ", " + std::to_string(t_now) + ")");
    }
}

void check_dims(const PixelStateGrid& state, std::uint32_t width, std::uint32_t height) {
    if (state.width != width || state.height != height) {
        throw ValidationError("frame is " + std::to_string(width) + "x" + std::to_string(height) +
                              " but pixel state is " + std::to_string(state.width) + "x" +
                              std::to_string(state.height));
    }
}

}  // namespace

std::size_t EventCameraConfig::capacity_for(std::uint32_t width, std::uint32_t height) const {
    if (max_events_per_frame) {
        return *max_events_per_frame;
    }
    return 8 * static_cast<std::size_t>(width) * height;
}

void EventCameraConfig::validate() const {
    if (!(c_pos > 0.0) || !(c_neg > 0.0)) {
        throw ValidationError("contrast thresholds must be positive");
    }
    if (!(sigma_c >= 0.0)) {
        throw ValidationError("sigma_c must be non-negative");
    }
    if (!(log_eps > 0.0)) {
        throw ValidationError("log_eps must be positive");
    }
    if (!(noise_rate_hz >= 0.0)) {
        throw ValidationError("noise_rate_hz must be non-negative");
    }
}

void validate_frame(const IntensityFrame& frame) {
    if (frame.values.size() != frame.pixel_count()) {
        throw ValidationError("frame holds " + std::to_string(frame.values.size()) + " values, expected " +
                              std::to_string(frame.pixel_count()));
    }
    for (std::size_t i = 0; i < frame.values.size(); ++i) {
        const float v = frame.values[i];
        if (!std::isfinite(v) || v < 0.0F || v > 1.0F) {
            throw ValidationError("intensity at pixel (" + std::to_string(i % frame.width) + ", " +
                                  std::to_string(i / frame.width) + ") is " + std::to_string(v) +
                                  ", expected a finite value in [0, 1]");
        }
    }
}

LogFrame log_transform(const IntensityFrame& frame, double log_eps) {
    if (!(log_eps > 0.0)) {
        throw ValidationError("log_eps must be positive");
    }
    validate_frame(frame);
    LogFrame out{frame.width, frame.height, std::vector<float>(frame.values.size())};
    for (std::size_t i = 0; i < frame.values.size(); ++i) {
        out.values[i] = static_cast<float>(std::log(static_cast<double>(frame.values[i]) + log_eps));
    }
    return out;
}

PixelStateGrid init_pixel_states(const IntensityFrame& frame0, const EventCameraConfig& config,
                                 std::uint64_t seed) {
    config.validate();
    LogFrame log0 = log_transform(frame0, config.log_eps);
    const std::size_t n = log0.values.size();

    PixelStateGrid state;
    state.width = frame0.width;
    state.height = frame0.height;
    state.ref_log = std::move(log0.values);
    state.last_event_t.assign(n, static_cast<std::int64_t>(frame0.t) - static_cast<std::int64_t>(config.refractory_us));
    state.thresholds_pos.resize(n);
    state.thresholds_neg.resize(n);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> pos(config.c_pos, config.sigma_c);
    std::normal_distribution<double> neg(config.c_neg, config.sigma_c);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = config.sigma_c > 0.0 ? pos(rng) : config.c_pos;
        const double m = config.sigma_c > 0.0 ? neg(rng) : config.c_neg;
        state.thresholds_pos[i] = std::max(static_cast<float>(p), kMinThreshold);
        state.thresholds_neg[i] = std::max(static_cast<float>(m), kMinThreshold);
    }
    return state;
}

EventBatch generate_events_serial(PixelStateGrid& state, const IntensityFrame& frame, Timestamp t_prev,
                                  Timestamp t_now, const EventCameraConfig& config) {
    check_dims(state, frame.width, frame.height);
    return generate_events_serial(state, log_transform(frame, config.log_eps), t_prev, t_now, config);
}

EventBatch generate_events_serial(PixelStateGrid& state, const LogFrame& log_frame, Timestamp t_prev,
                                  Timestamp t_now, const EventCameraConfig& config) {
    check_interval(t_prev, t_now);
    check_dims(state, log_frame.width, log_frame.height);

    const std::size_t capacity = config.capacity_for(state.width, state.height);
    EventBatch batch;
    const std::uint32_t width = state.width;
    for (std::size_t i = 0; i < state.pixel_count(); ++i) {
        const auto x = static_cast<std::uint16_t>(i % width);
        const auto y = static_cast<std::uint16_t>(i / width);
        detail::step_pixel(state.ref_log[i], state.last_event_t[i], state.thresholds_pos[i],
                           state.thresholds_neg[i], log_frame.values[i], t_prev, t_now, config.refractory_us,
                           [&](Timestamp t, std::int8_t polarity) {
                               if (batch.events.size() < capacity) {
                                   batch.events.push_back(Event{t, x, y, polarity});
                               } else {
                                   ++batch.dropped_count;
                               }
                           });
    }
    return batch;
}

EventBatch inject_noise_events(std::uint32_t width, std::uint32_t height, Timestamp t_prev, Timestamp t_now,
                               double noise_rate_hz, std::uint64_t seed) {
    if (!(noise_rate_hz >= 0.0)) {
        throw ValidationError("noise rate must be non-negative");
    }
    check_interval(t_prev, t_now);
    EventBatch batch;
    if (noise_rate_hz == 0.0) {
        return batch;
    }
    const double mean = noise_rate_hz * static_cast<double>(t_now - t_prev) * 1e-6;
    std::mt19937_64 rng(seed);
    std::poisson_distribution<std::uint32_t> count(mean);
    std::uniform_int_distribution<Timestamp> stamp(t_prev, t_now - 1);
    std::bernoulli_distribution sign(0.5);
    for (std::uint32_t y = 0; y < height; ++y) {
        for (std::uint32_t x = 0; x < width; ++x) {
            const std::uint32_t k = count(rng);
            for (std::uint32_t j = 0; j < k; ++j) {
                const Timestamp t = stamp(rng);
                const std::int8_t p = sign(rng) ? 1 : -1;
                batch.events.push_back(Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), p});
            }
        }
    }
    return canonical_sort(std::move(batch));
}

bool is_time_sorted(std::span<const Event> events) {
    return std::is_sorted(events.begin(), events.end(),
                          [](const Event& a, const Event& b) { return a.t < b.t; });
}

EventBatch limit_bandwidth(const EventBatch& batch, double max_events_per_sec, Timestamp window_us) {
    if (!is_time_sorted(batch.events)) {
        throw ValidationError("limit_bandwidth requires events sorted by timestamp");
    }
    if (window_us == 0 || !(max_events_per_sec >= 0.0)) {
        throw ValidationError("bandwidth window must be positive and rate non-negative");
    }
    const auto cap = static_cast<std::uint64_t>(std::floor(max_events_per_sec * static_cast<double>(window_us) * 1e-6));

    EventBatch out;
    out.dropped_count = batch.dropped_count;
    out.events.reserve(batch.events.size());
    Timestamp current_window = 0;
    std::uint64_t in_window = 0;
    bool first = true;
    for (const Event& e : batch.events) {
        const Timestamp w = e.t / window_us;
        if (first || w != current_window) {
            current_window = w;
            in_window = 0;
            first = false;
        }
        if (in_window < cap) {
            out.events.push_back(e);
            ++in_window;
        } else {
            ++out.dropped_count;
        }
    }
    return out;
}

std::vector<std::int32_t> accumulate_events_to_image(const EventBatch& batch, Timestamp window_us,
                                                     Timestamp t_end, std::uint32_t width,
                                                     std::uint32_t height) {
    std::vector<std::int32_t> image(static_cast<std::size_t>(width) * height, 0);
    const Timestamp t_begin = t_end > window_us ? t_end - window_us : 0;
    for (const Event& e : batch.events) {
        if (e.x >= width || e.y >= height) {
            throw ValidationError("event at (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                                  ") lies outside the " + std::to_string(width) + "x" + std::to_string(height) +
                                  " sensor");
        }
        if (e.t >= t_begin && e.t < t_end) {
            image[static_cast<std::size_t>(e.y) * width + e.x] += e.polarity;
        }
    }
    return image;
}

EventBatch canonical_sort(EventBatch batch) {
    std::stable_sort(batch.events.begin(), batch.events.end(), [](const Event& a, const Event& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.y != b.y) return a.y < b.y;
        if (a.x != b.x) return a.x < b.x;
        return a.polarity < b.polarity;
    });
    return batch;
}

}  // namespace evsim::events
