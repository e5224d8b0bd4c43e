#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace evsim::bench {

struct Summary {
    double mean = 0.0;
    double median = 0.0;
    double p99 = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 0;

    // Throws ValidationError on an empty sample set.
    static Summary of(const std::vector<double>& samples);
};

// One parameter combination: its per-trial samples plus derived metrics.
struct BenchRow {
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    std::vector<double> samples;
    Summary summary;
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
};

struct HostInfo {
    std::string hostname;
    std::string kernel;
    std::string cpu_model;
    unsigned hardware_threads = 0;
    std::string compiler;
    std::string build_type;
};

HostInfo host_fingerprint();

struct BenchReport {
    std::string benchmark;
    nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
    std::string units;  // unit of the samples
    std::vector<BenchRow> rows;
    HostInfo host;
    std::string note;

    // Throws ValidationError when a row has no samples or its summary disagrees with them.
    void validate() const;

    nlohmann::ordered_json to_json() const;
    std::string to_csv() const;
    std::string to_table() const;
};

BenchReport report_from_json(const nlohmann::ordered_json& j);

}  // namespace evsim::bench
