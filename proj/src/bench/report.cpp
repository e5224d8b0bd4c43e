#include "evsim/bench/report.hpp"

#include <sys/utsname.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "evsim/common/error.hpp"

namespace evsim::bench {

namespace {

using ojson = nlohmann::ordered_json;

std::string scalar_text(const ojson& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        std::ostringstream os;
        os << std::setprecision(10) << v.get<double>();
        return os.str();
    }
    return v.dump();
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

std::vector<std::string> column_names(const std::vector<BenchRow>& rows, bool params) {
    std::vector<std::string> names;
    std::set<std::string> seen;
    for (const BenchRow& r : rows) {
        for (const auto& [k, v] : (params ? r.params : r.metrics).items()) {
            if (seen.insert(k).second) names.push_back(k);
        }
    }
    return names;
}

}  // namespace

Summary Summary::of(const std::vector<double>& samples) {
    if (samples.empty()) throw ValidationError("summary of an empty sample set");
    std::vector<double> s = samples;
    std::sort(s.begin(), s.end());
    Summary out;
    out.count = s.size();
    double sum = 0.0;
    for (double v : s) sum += v;
    out.mean = sum / static_cast<double>(s.size());
    const std::size_t n = s.size();
    out.median = n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
    const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n)));
    out.p99 = s[std::max<std::size_t>(rank, 1) - 1];
    out.min = s.front();
    out.max = s.back();
    return out;
}

HostInfo host_fingerprint() {
    HostInfo h;
    char name[256] = {};
    if (::gethostname(name, sizeof(name) - 1) == 0) h.hostname = name;
    utsname u{};
    if (::uname(&u) == 0) h.kernel = std::string(u.sysname) + " " + u.release + " " + u.machine;
    std::ifstream cpu("/proc/cpuinfo");
    for (std::string line; std::getline(cpu, line);) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) h.cpu_model = line.substr(line.find_first_not_of(' ', colon + 1));
            break;
        }
    }
    h.hardware_threads = std::thread::hardware_concurrency();
#if defined(__clang__)
    h.compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
    h.compiler = "gcc " __VERSION__;
#endif
#ifdef NDEBUG
    h.build_type = "release";
#else
    h.build_type = "debug";
#endif
    return h;
}

void BenchReport::validate() const {
    if (rows.empty()) throw ValidationError(benchmark + ": report has no rows");
    for (const BenchRow& r : rows) {
        if (r.samples.empty()) throw ValidationError(benchmark + ": row " + r.params.dump() + " has no samples");
        const Summary s = Summary::of(r.samples);
        if (s.count != r.summary.count || !close(s.mean, r.summary.mean) || !close(s.median, r.summary.median) ||
            !close(s.p99, r.summary.p99)) {
            throw ValidationError(benchmark + ": summary of row " + r.params.dump() + " does not match its samples");
        }
    }
}

ojson BenchReport::to_json() const {
    ojson j;
    j["benchmark"] = benchmark;
    j["parameters"] = parameters;
    j["units"] = units;
    j["host"] = {{"hostname", host.hostname},       {"kernel", host.kernel},
                 {"cpu_model", host.cpu_model},     {"hardware_threads", host.hardware_threads},
                 {"compiler", host.compiler},       {"build_type", host.build_type}};
    if (!note.empty()) j["note"] = note;
    ojson rs = ojson::array();
    for (const BenchRow& r : rows) {
        rs.push_back({{"params", r.params},
                      {"summary",
                       {{"count", r.summary.count},
                        {"mean", r.summary.mean},
                        {"median", r.summary.median},
                        {"p99", r.summary.p99},
                        {"min", r.summary.min},
                        {"max", r.summary.max}}},
                      {"metrics", r.metrics},
                      {"samples", r.samples}});
    }
    j["rows"] = rs;
    return j;
}

BenchReport report_from_json(const ojson& j) {
    BenchReport r;
    r.benchmark = j.at("benchmark").get<std::string>();
    r.parameters = j.at("parameters");
    r.units = j.at("units").get<std::string>();
    const ojson& h = j.at("host");
    r.host.hostname = h.value("hostname", "");
    r.host.kernel = h.value("kernel", "");
    r.host.cpu_model = h.value("cpu_model", "");
    r.host.hardware_threads = h.value("hardware_threads", 0U);
    r.host.compiler = h.value("compiler", "");
    r.host.build_type = h.value("build_type", "");
    r.note = j.value("note", "");
    for (const ojson& rj : j.at("rows")) {
        BenchRow row;
        row.params = rj.at("params");
        row.metrics = rj.at("metrics");
        row.samples = rj.at("samples").get<std::vector<double>>();
        const ojson& s = rj.at("summary");
        row.summary.count = s.at("count").get<std::size_t>();
        row.summary.mean = s.at("mean").get<double>();
        row.summary.median = s.at("median").get<double>();
        row.summary.p99 = s.at("p99").get<double>();
        row.summary.min = s.at("min").get<double>();
        row.summary.max = s.at("max").get<double>();
        r.rows.push_back(std::move(row));
    }
    return r;
}

std::string BenchReport::to_csv() const {
    const auto params = column_names(rows, true);
    const auto metrics = column_names(rows, false);
    std::ostringstream os;
    os << "benchmark";
    for (const auto& p : params) os << ',' << p;
    os << ",count,mean,median,p99,min,max,units";
    for (const auto& m : metrics) os << ',' << m;
    os << '\n';
    os << std::setprecision(10);
    for (const BenchRow& r : rows) {
        os << benchmark;
        for (const auto& p : params) os << ',' << (r.params.contains(p) ? scalar_text(r.params[p]) : "");
        os << ',' << r.summary.count << ',' << r.summary.mean << ',' << r.summary.median << ',' << r.summary.p99 << ','
           << r.summary.min << ',' << r.summary.max << ',' << units;
        for (const auto& m : metrics) os << ',' << (r.metrics.contains(m) ? scalar_text(r.metrics[m]) : "");
        os << '\n';
    }
    return os.str();
}

std::string BenchReport::to_table() const {
    const auto params = column_names(rows, true);
    const auto metrics = column_names(rows, false);
    std::vector<std::string> header = params;
    for (const char* s : {"n", "mean", "median", "p99"}) header.emplace_back(s);
    header.insert(header.end(), metrics.begin(), metrics.end());

    auto fmt = [](double v) {
        std::ostringstream os;
        os << std::setprecision(6) << v;
        return os.str();
    };
    std::vector<std::vector<std::string>> cells;
    for (const BenchRow& r : rows) {
        std::vector<std::string> line;
        for (const auto& p : params) line.push_back(r.params.contains(p) ? scalar_text(r.params[p]) : "");
        line.push_back(std::to_string(r.summary.count));
        line.push_back(fmt(r.summary.mean));
        line.push_back(fmt(r.summary.median));
        line.push_back(fmt(r.summary.p99));
        for (const auto& m : metrics) {
            line.push_back(!r.metrics.contains(m)        ? ""
                           : r.metrics[m].is_number()   ? fmt(r.metrics[m].get<double>())
                                                        : scalar_text(r.metrics[m]));
        }
        cells.push_back(std::move(line));
    }
    std::vector<std::size_t> width(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) {
        width[i] = header[i].size();
        for (const auto& line : cells) width[i] = std::max(width[i], line[i].size());
    }
    std::ostringstream os;
    os << benchmark << " (samples in " << units << "; " << host.cpu_model << ", " << host.hardware_threads
       << " threads)\n";
    for (std::size_t i = 0; i < header.size(); ++i) os << std::setw(static_cast<int>(width[i]) + 2) << header[i];
    os << '\n';
    for (const auto& line : cells) {
        for (std::size_t i = 0; i < line.size(); ++i) os << std::setw(static_cast<int>(width[i]) + 2) << line[i];
        os << '\n';
    }
    return os.str();
}

}  // namespace evsim::bench
