#include <csignal>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "evsim/net/discovery.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Topic discovery daemon"};
    evsim::net::DaemonOptions options;
    app.add_option("--host", options.host, "Listen address");
    app.add_option("--port", options.port, "Listen port (0 picks a free one)");
    app.add_option("--lease-ttl", options.lease_ttl, "Lease lifetime in seconds");
    CLI11_PARSE(app, argc, argv);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    try {
        evsim::net::DiscoveryDaemon daemon(options);
        std::cout << "listening on " << daemon.address() << std::endl;
        while (g_stop == 0) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        daemon.stop();
    } catch (const std::exception& e) {
        std::cerr << "evsim-discoveryd: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
