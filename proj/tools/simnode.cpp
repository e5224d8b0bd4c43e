#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evsim/common/error.hpp"
#include "evsim/sim/config.hpp"
#include "evsim/sim/node.hpp"
#include "evsim/sim/simulator.hpp"
#include "evsim/sim/wire.hpp"

namespace {

evsim::sim::SimNode* g_node = nullptr;
volatile std::sig_atomic_t g_interrupted = 0;

void on_signal(int) {
    g_interrupted = 1;
    if (g_node != nullptr) g_node->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator node: renders, flies and publishes sensor bundles"};
    std::string config_path;
    std::string mode;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> ticks;
    std::string daemon;
    bool paced = false;
    bool offline = false;
    bool digest = false;
    bool dump_config = false;
    app.add_option("--config", config_path, "JSON config file (defaults apply to missing keys)");
    app.add_option("--mode", mode, "streaming or lockstep")->check(CLI::IsMember({"streaming", "lockstep"}));
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--ticks", ticks, "Stop after this many sensor ticks");
    app.add_option("--daemon", daemon, "Discovery daemon host:port");
    app.add_flag("--paced", paced, "Pace ticks to wall-clock time");
    app.add_flag("--offline", offline, "Run the tick loop without networking");
    app.add_flag("--digest", digest, "Print an FNV-1a digest of every serialized bundle (offline only)");
    app.add_flag("--dump-config", dump_config, "Print the effective config and exit");
    CLI11_PARSE(app, argc, argv);

    try {
        evsim::sim::SimConfig config = config_path.empty() ? evsim::sim::SimConfig{} : evsim::sim::load_config(config_path);
        if (mode == "streaming") config.mode = evsim::sim::RunMode::streaming;
        if (mode == "lockstep") config.mode = evsim::sim::RunMode::lockstep;
        if (seed) config.seed = *seed;
        if (!daemon.empty()) config.net.daemon = daemon;
        if (paced) config.paced = true;
        config.validate();
        if (dump_config) {
            std::cout << evsim::sim::config_to_json(config).dump(2) << '\n';
            return 0;
        }
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);

        if (offline || digest) {
            if (!ticks) throw evsim::ValidationError("--offline needs --ticks");
            evsim::sim::Simulator sim(config);
            std::uint64_t h = 0xcbf29ce484222325ULL;
            std::uint64_t events = 0;
            for (std::uint64_t k = 0; k < *ticks && g_interrupted == 0; ++k) {
                const evsim::sim::ObservationBundle b = sim.step_once();
                events += b.events.events.size();
                if (digest) h = evsim::sim::wire::bundle_digest(b, h);
            }
            if (digest) {
                std::printf("%016llx\n", static_cast<unsigned long long>(h));
            } else {
                std::printf("ticks %llu events %llu\n", static_cast<unsigned long long>(sim.next_step_id()),
                            static_cast<unsigned long long>(events));
            }
            return 0;
        }

        evsim::sim::NodeOptions options;
        options.max_ticks = ticks;
        evsim::sim::SimNode node(config, options);
        g_node = &node;
        const evsim::sim::NodeStats s = node.run();
        g_node = nullptr;
        nlohmann::json report = {{"ticks", s.ticks},
                                 {"wall_seconds", s.wall_seconds},
                                 {"commands_applied", s.commands_applied},
                                 {"zoh_activations", s.zoh_activations},
                                 {"stale_commands", s.stale_commands},
                                 {"future_commands", s.future_commands},
                                 {"command_errors", s.command_errors},
                                 {"publish_errors", s.publish_errors},
                                 {"overruns", s.overruns}};
        if (!s.last_error.empty()) report["last_error"] = s.last_error;
        std::cout << report.dump() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "simnode: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
