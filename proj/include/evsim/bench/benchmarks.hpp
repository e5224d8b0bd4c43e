#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "evsim/bench/report.hpp"

namespace evsim::bench {

enum class Backend : std::uint8_t { serial, parallel };

struct EventsBenchOptions {
    std::uint32_t width = 640;
    std::uint32_t height = 480;
    std::size_t frames = 100;
    Backend backend = Backend::serial;
    unsigned workers = 4;
    std::uint64_t seed = 1;
};

// Per-frame event-generation latency over a pre-rendered moving-texture sequence.
BenchReport bench_events(const EventsBenchOptions& options);

struct MessagingBenchOptions {
    std::vector<std::size_t> payload_bytes{40};
    std::vector<std::size_t> subscribers{1};
    double duration_s = 2.0;
    std::string transport = "local";  // local | tcp
    std::size_t high_water_mark = 1000;
};

// One saturating publisher per (payload, subscriber count); samples are per-subscriber delivered rates.
BenchReport bench_messaging(const MessagingBenchOptions& options);

struct ClosedLoopBenchOptions {
    std::vector<double> rates_hz{50, 100, 200, 500, 1000, 2000};
    std::uint32_t width = 64;
    std::uint32_t height = 48;
    std::size_t ticks = 300;  // per rate
    std::string transport = "tcp";
    std::string daemon;       // empty: start a private daemon
    std::uint64_t seed = 0;
};

// Lockstep simulator with an echo controller replying at each control rate; samples are
// command-to-next-observation latencies.
BenchReport bench_closedloop(const ClosedLoopBenchOptions& options);

}  // namespace evsim::bench
