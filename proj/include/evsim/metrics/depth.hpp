#pragma once

// Depth supervision math over disparity maps: median/MAD normalization, the scale-invariant
// log loss, a multi-scale gradient-matching regularizer, and their combination.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace evsim::metrics {

// Row-major map. As a disparity input every value must be positive and finite;
// normalized maps may hold any finite values.
struct DisparityMap {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<double> values;

    DisparityMap() = default;
    DisparityMap(std::uint32_t w, std::uint32_t h, double fill = 0.0)
        : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}
    DisparityMap(std::uint32_t w, std::uint32_t h, std::vector<double> v) : width(w), height(h), values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double at(std::uint32_t x, std::uint32_t y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    double& at(std::uint32_t x, std::uint32_t y) { return values[static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr unsigned kDefaultScales = 4;

double median(std::vector<double> values);

// (d - median) / mean|d - median|; a mean absolute deviation under 1e-12 divides by 1.
DisparityMap normalize_disparity(const DisparityMap& d);

// (1/n) sum x^2 - (1/(2 n^2)) (sum x)^2 with x = log(d / d_star).
double silog_loss(const DisparityMap& d, const DisparityMap& d_star);

// (1/|full res|) sum_s 4^s sum_u |grad d_s - grad d*_s|_1, forward differences, scale s taken by
// stride-2 subsampling of scale s-1. Scales smaller than 2x2 add nothing.
double gradient_regularizer(const DisparityMap& d_n, const DisparityMap& d_star_n, unsigned num_scales = kDefaultScales);

double depth_objective(const DisparityMap& d, const DisparityMap& d_star, double lambda = 1.0,
                       unsigned num_scales = kDefaultScales);

// Analytic (sub)gradient of depth_objective with respect to the prediction d.
DisparityMap depth_objective_gradient(const DisparityMap& d, const DisparityMap& d_star, double lambda = 1.0,
                                      unsigned num_scales = kDefaultScales);

// Text format: "width height" followed by width*height whitespace-separated values, row-major.
DisparityMap read_disparity_text(std::istream& in);
DisparityMap load_disparity_text(const std::string& path);
void write_disparity_text(std::ostream& out, const DisparityMap& map);

}  // namespace evsim::metrics
