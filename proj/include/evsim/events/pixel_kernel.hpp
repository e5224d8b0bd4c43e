#pragma once

// Per-pixel contrast-threshold step shared by the serial and chunk-parallel generators.
// Both paths must call this exact function so their outputs agree bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "evsim/events/event_model.hpp"

namespace evsim::events::detail {

// Slack (log units) when deciding a crossing. Absorbs float rounding so that a ramp of
// exactly k thresholds yields k events however it is split across frames.
inline constexpr double kCrossingTolerance = 1e-5;

// Advances one pixel from its reference level to l_new. emit(t, polarity) is called for
// every event surviving the refractory filter, in chronological order.
template <class Emit>
inline void step_pixel(float& ref_log, std::int64_t& last_event_t, float thr_pos, float thr_neg, float l_new,
                       Timestamp t_prev, Timestamp t_now, Timestamp refractory_us, Emit&& emit) {
    const double start = ref_log;
    const double delta = static_cast<double>(l_new) - start;
    if (delta == 0.0) {
        return;
    }
    const std::int8_t polarity = delta > 0.0 ? 1 : -1;
    const double threshold = polarity > 0 ? thr_pos : thr_neg;
    const double magnitude = std::abs(delta);
    const double interval = static_cast<double>(t_now - t_prev);
    const auto refractory = static_cast<std::int64_t>(refractory_us);

    std::uint64_t crossings = 0;
    while (magnitude - static_cast<double>(crossings + 1) * threshold >= -kCrossingTolerance) {
        ++crossings;
        const double frac = std::min(static_cast<double>(crossings) * threshold / magnitude, 1.0);
        auto t = t_prev + static_cast<Timestamp>(std::floor(frac * interval));
        t = std::min(t, t_now - 1);
        const auto ts = static_cast<std::int64_t>(t);
        if (refractory > 0 && ts - last_event_t < refractory) {
            continue;
        }
        last_event_t = ts;
        emit(t, polarity);
    }
    if (crossings > 0) {
        ref_log = static_cast<float>(start + polarity * static_cast<double>(crossings) * threshold);
    }
}

}  // namespace evsim::events::detail
