#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evsim/bench/benchmarks.hpp"
#include "evsim/common/error.hpp"

namespace {

using evsim::bench::BenchReport;

std::pair<std::uint32_t, std::uint32_t> parse_resolution(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw evsim::ValidationError("resolution must look like 640x480: " + text);
    return {static_cast<std::uint32_t>(std::stoul(text.substr(0, x))),
            static_cast<std::uint32_t>(std::stoul(text.substr(x + 1)))};
}

void emit(BenchReport& report, const std::string& csv, const std::string& json) {
    report.validate();
    std::cout << report.to_table();
    if (!csv.empty()) {
        std::ofstream(csv) << report.to_csv();
    }
    if (!json.empty()) {
        std::ofstream(json) << report.to_json().dump(2) << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-simulation, messaging and closed-loop benchmarks"};
    app.require_subcommand(1);
    std::string csv;
    std::string json;
    app.add_option("--csv", csv, "Write the report rows as CSV");
    app.add_option("--json", json, "Write the full report as JSON");

    auto* events = app.add_subcommand("events", "Per-frame event-generation latency");
    std::vector<std::string> resolutions{"64x48", "640x480"};
    std::size_t frames = 100;
    std::string backend = "both";
    unsigned workers = 4;
    std::uint64_t seed = 1;
    events->add_option("--resolution", resolutions, "WxH, repeatable")->delimiter(',');
    events->add_option("--frames", frames, "Frames per resolution");
    events->add_option("--backend", backend, "serial, parallel or both")
        ->check(CLI::IsMember({"serial", "parallel", "both"}));
    events->add_option("--workers", workers, "Worker threads for the parallel backend");
    events->add_option("--seed", seed, "Texture and threshold seed");

    auto* messaging = app.add_subcommand("messaging", "Saturated publish-subscribe rate and throughput");
    std::vector<std::size_t> payloads{40, 1024, 65536, 1048576};
    std::vector<std::size_t> subscribers{1};
    double duration = 2.0;
    std::string transport = "local";
    std::size_t hwm = 1000;
    messaging->add_option("--payload", payloads, "Payload bytes, comma separated")->delimiter(',');
    messaging->add_option("--subscribers", subscribers, "Subscriber counts, comma separated")->delimiter(',');
    messaging->add_option("--duration", duration, "Measurement window per row in seconds");
    messaging->add_option("--transport", transport, "local or tcp")->check(CLI::IsMember({"local", "tcp"}));
    messaging->add_option("--hwm", hwm, "Send and receive queue bound");

    auto* closedloop = app.add_subcommand("closedloop", "Lockstep command-to-observation latency");
    std::vector<double> rates{50, 100, 200, 500, 1000, 2000};
    std::string cl_resolution = "64x48";
    std::size_t ticks = 300;
    std::string cl_transport = "tcp";
    std::string daemon;
    closedloop->add_option("--rates", rates, "Controller rates in Hz, comma separated")->delimiter(',');
    closedloop->add_option("--resolution", cl_resolution, "Camera WxH");
    closedloop->add_option("--ticks", ticks, "Lockstep ticks per rate");
    closedloop->add_option("--transport", cl_transport, "local or tcp")->check(CLI::IsMember({"local", "tcp"}));
    closedloop->add_option("--daemon", daemon, "Discovery daemon host:port (default: private daemon)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (events->parsed()) {
            BenchReport merged;
            for (const std::string& res : resolutions) {
                const auto [w, h] = parse_resolution(res);
                std::vector<evsim::bench::Backend> backends;
                if (backend != "parallel") backends.push_back(evsim::bench::Backend::serial);
                if (backend != "serial") backends.push_back(evsim::bench::Backend::parallel);
                for (auto b : backends) {
                    BenchReport r = evsim::bench::bench_events({w, h, frames, b, workers, seed});
                    if (merged.rows.empty()) {
                        merged = r;
                        merged.parameters = {{"resolutions", resolutions}, {"frames", frames},
                                             {"backend", backend},         {"workers", workers},
                                             {"seed", seed}};
                    } else {
                        merged.rows.push_back(r.rows.front());
                    }
                }
            }
            emit(merged, csv, json);
        } else if (messaging->parsed()) {
            BenchReport r = evsim::bench::bench_messaging({payloads, subscribers, duration, transport, hwm});
            emit(r, csv, json);
        } else if (closedloop->parsed()) {
            const auto [w, h] = parse_resolution(cl_resolution);
            evsim::bench::ClosedLoopBenchOptions o;
            o.rates_hz = rates;
            o.width = w;
            o.height = h;
            o.ticks = ticks;
            o.transport = cl_transport;
            o.daemon = daemon;
            BenchReport r = evsim::bench::bench_closedloop(o);
            emit(r, csv, json);
        }
    } catch (const std::exception& e) {
        std::cerr << "bench: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
