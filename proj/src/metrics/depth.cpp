#include "evsim/metrics/depth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "evsim/common/error.hpp"

namespace evsim::metrics {

namespace {

constexpr double kDegenerateSpread = 1e-12;

void check_same_dims(const DisparityMap& a, const DisparityMap& b) {
    if (a.width != b.width || a.height != b.height || a.values.size() != b.values.size()) {
        throw ValidationError("disparity maps differ in size: " + std::to_string(a.width) + "x" +
                              std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                              std::to_string(b.height));
    }
    if (a.values.size() != static_cast<std::size_t>(a.width) * a.height) {
        throw ValidationError("disparity map value count does not match its dimensions");
    }
}

void check_positive(const DisparityMap& d, const char* which) {
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        const double v = d.values[i];
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw DomainError(std::string(which) + " disparity at pixel (" + std::to_string(i % d.width) + ", " +
                              std::to_string(i / d.width) + ") is " + std::to_string(v) +
                              "; expected a positive finite value");
        }
    }
}

DisparityMap subsample(const DisparityMap& m) {
    DisparityMap out((m.width + 1) / 2, (m.height + 1) / 2);
    for (std::uint32_t y = 0; y < out.height; ++y) {
        for (std::uint32_t x = 0; x < out.width; ++x) {
            out.at(x, y) = m.at(2 * x, 2 * y);
        }
    }
    return out;
}

// Median and the per-element derivative weight of the median.
struct MedianInfo {
    double value = 0.0;
    std::vector<double> weight;
};

MedianInfo median_info(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    MedianInfo info;
    info.weight.assign(n, 0.0);
    if (n % 2 == 1) {
        info.value = values[order[n / 2]];
        info.weight[order[n / 2]] = 1.0;
    } else {
        info.value = 0.5 * (values[order[n / 2 - 1]] + values[order[n / 2]]);
        info.weight[order[n / 2 - 1]] = 0.5;
        info.weight[order[n / 2]] = 0.5;
    }
    return info;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double median(std::vector<double> values) {
    if (values.empty()) {
        throw ValidationError("median of an empty set");
    }
    const std::size_t n = values.size();
    auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(values.begin(), mid, values.end());
    const double upper = *mid;
    if (n % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(values.begin(), mid);
    return 0.5 * (lower + upper);
}

DisparityMap normalize_disparity(const DisparityMap& d) {
    if (d.values.empty()) {
        throw ValidationError("cannot normalize an empty disparity map");
    }
    const double m = median(d.values);
    double spread = 0.0;
    for (double v : d.values) {
        spread += std::abs(v - m);
    }
    spread /= static_cast<double>(d.values.size());
    const double scale = spread < kDegenerateSpread ? 1.0 : spread;
    DisparityMap out(d.width, d.height);
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        out.values[i] = (d.values[i] - m) / scale;
    }
    return out;
}

double silog_loss(const DisparityMap& d, const DisparityMap& d_star) {
    check_same_dims(d, d_star);
    check_positive(d, "predicted");
    check_positive(d_star, "target");
    if (d.values.empty()) {
        throw ValidationError("silog loss over an empty map");
    }
    const auto n = static_cast<double>(d.values.size());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        const double x = std::log(d.values[i] / d_star.values[i]);
        sum += x;
        sum_sq += x * x;
    }
    return sum_sq / n - (sum * sum) / (2.0 * n * n);
}

double gradient_regularizer(const DisparityMap& d_n, const DisparityMap& d_star_n, unsigned num_scales) {
    check_same_dims(d_n, d_star_n);
    const auto full = static_cast<double>(d_n.values.size());
    if (full == 0.0) {
        return 0.0;
    }
    DisparityMap a = d_n;
    DisparityMap b = d_star_n;
    double total = 0.0;
    for (unsigned s = 0; s < num_scales; ++s) {
        if (s > 0) {
            a = subsample(a);
            b = subsample(b);
        }
        if (a.width < 2 || a.height < 2) {
            break;
        }
        double scale_sum = 0.0;
        for (std::uint32_t y = 0; y < a.height; ++y) {
            for (std::uint32_t x = 0; x < a.width; ++x) {
                if (x + 1 < a.width) {
                    scale_sum += std::abs((a.at(x + 1, y) - a.at(x, y)) - (b.at(x + 1, y) - b.at(x, y)));
                }
                if (y + 1 < a.height) {
                    scale_sum += std::abs((a.at(x, y + 1) - a.at(x, y)) - (b.at(x, y + 1) - b.at(x, y)));
                }
            }
        }
        total += std::ldexp(scale_sum, static_cast<int>(2 * s));
    }
    return total / full;
}

double depth_objective(const DisparityMap& d, const DisparityMap& d_star, double lambda, unsigned num_scales) {
    const double loss = silog_loss(d, d_star);
    if (lambda == 0.0) {
        return loss;
    }
    return loss + lambda * gradient_regularizer(normalize_disparity(d), normalize_disparity(d_star), num_scales);
}

DisparityMap depth_objective_gradient(const DisparityMap& d, const DisparityMap& d_star, double lambda,
                                      unsigned num_scales) {
    check_same_dims(d, d_star);
    check_positive(d, "predicted");
    check_positive(d_star, "target");
    const std::size_t count = d.values.size();
    const auto n = static_cast<double>(count);

    DisparityMap grad(d.width, d.height);
    double sum_x = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        sum_x += std::log(d.values[i] / d_star.values[i]);
    }
    for (std::size_t i = 0; i < count; ++i) {
        const double x = std::log(d.values[i] / d_star.values[i]);
        grad.values[i] = (2.0 * x / n - sum_x / (n * n)) / d.values[i];
    }
    if (lambda == 0.0) {
        return grad;
    }

    // Gradient of the regularizer with respect to the normalized prediction. A pixel of scale s
    // sits at full-resolution (x, y) * 2^s.
    const DisparityMap a0 = normalize_disparity(d);
    const DisparityMap b0 = normalize_disparity(d_star);
    DisparityMap g_norm(d.width, d.height);
    DisparityMap a = a0;
    DisparityMap b = b0;
    for (unsigned s = 0; s < num_scales; ++s) {
        if (s > 0) {
            a = subsample(a);
            b = subsample(b);
        }
        if (a.width < 2 || a.height < 2) {
            break;
        }
        const double w = std::ldexp(1.0, static_cast<int>(2 * s)) / n;
        const std::uint32_t stride = 1U << s;
        auto add = [&](std::uint32_t x, std::uint32_t y, double v) { g_norm.at(x * stride, y * stride) += v; };
        for (std::uint32_t y = 0; y < a.height; ++y) {
            for (std::uint32_t x = 0; x < a.width; ++x) {
                if (x + 1 < a.width) {
                    const double sg = sign((a.at(x + 1, y) - a.at(x, y)) - (b.at(x + 1, y) - b.at(x, y)));
                    add(x + 1, y, w * sg);
                    add(x, y, -w * sg);
                }
                if (y + 1 < a.height) {
                    const double sg = sign((a.at(x, y + 1) - a.at(x, y)) - (b.at(x, y + 1) - b.at(x, y)));
                    add(x, y + 1, w * sg);
                    add(x, y, -w * sg);
                }
            }
        }
    }

    // Chain through the normalization d~ = (d - m) / s.
    const MedianInfo med = median_info(d.values);
    double spread = 0.0;
    double sign_sum = 0.0;
    for (double v : d.values) {
        spread += std::abs(v - med.value);
        sign_sum += sign(v - med.value);
    }
    spread /= n;
    const bool degenerate = spread < kDegenerateSpread;
    const double scale = degenerate ? 1.0 : spread;

    double g_sum = 0.0;
    double g_dot_centered = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        g_sum += g_norm.values[i];
        g_dot_centered += g_norm.values[i] * (d.values[i] - med.value);
    }
    for (std::size_t j = 0; j < count; ++j) {
        double gj = (g_norm.values[j] - g_sum * med.weight[j]) / scale;
        if (!degenerate) {
            const double ds = (sign(d.values[j] - med.value) - sign_sum * med.weight[j]) / n;
            gj -= g_dot_centered / (scale * scale) * ds;
        }
        grad.values[j] += lambda * gj;
    }
    return grad;
}

DisparityMap read_disparity_text(std::istream& in) {
    DisparityMap map;
    if (!(in >> map.width >> map.height)) {
        throw ValidationError("disparity file must start with 'width height'");
    }
    const std::size_t n = static_cast<std::size_t>(map.width) * map.height;
    map.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(in >> map.values[i])) {
            throw ValidationError("disparity file ended after " + std::to_string(i) + " of " + std::to_string(n) +
                                  " values");
        }
    }
    return map;
}

DisparityMap load_disparity_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open disparity file " + path);
    }
    return read_disparity_text(in);
}

void write_disparity_text(std::ostream& out, const DisparityMap& map) {
    out << map.width << ' ' << map.height << '\n';
    out.precision(17);
    for (std::uint32_t y = 0; y < map.height; ++y) {
        for (std::uint32_t x = 0; x < map.width; ++x) {
            out << (x == 0 ? "" : " ") << map.at(x, y);
        }
        out << '\n';
    }
}

}  // namespace evsim::metrics
