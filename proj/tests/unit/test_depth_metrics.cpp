#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "evsim/common/error.hpp"
#include "evsim/metrics/depth.hpp"
#include "support/depth_oracle.hpp"

using namespace evsim::metrics;

namespace {

DisparityMap random_map(std::uint32_t w, std::uint32_t h, std::mt19937_64& rng, double lo = 0.2, double hi = 5.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    DisparityMap m(w, h);
    for (double& v : m.values) v = u(rng);
    return m;
}

evsim::testing::OracleMap to_oracle(const DisparityMap& m) {
    return {static_cast<int>(m.width), static_cast<int>(m.height), m.values};
}

}  // namespace

TEST_CASE("normalize_disparity hand values and degenerate branch") {
    const DisparityMap n = normalize_disparity(DisparityMap(4, 1, {1, 2, 3, 4}));
    CHECK(n.values == std::vector<double>{-1.5, -0.5, 0.5, 1.5});

    const DisparityMap flat = normalize_disparity(DisparityMap(3, 3, 2.5));
    for (double v : flat.values) CHECK(v == 0.0);

    CHECK_THROWS_AS(normalize_disparity(DisparityMap()), evsim::ValidationError);
}

TEST_CASE("normalize_disparity is invariant to positive scaling") {
    std::mt19937_64 rng(1);
    const DisparityMap d = random_map(8, 6, rng);
    const DisparityMap base = normalize_disparity(d);
    for (double s : {0.1, 1.0, 3.7, 100.0}) {
        DisparityMap scaled = d;
        for (double& v : scaled.values) v *= s;
        const DisparityMap n = normalize_disparity(scaled);
        for (std::size_t i = 0; i < n.size(); ++i) {
            CHECK(std::abs(n.values[i] - base.values[i]) < 1e-6);
        }
    }
}

TEST_CASE("silog_loss hand values") {
    const DisparityMap target(2, 1, {1.0, 2.0});
    CHECK(silog_loss(target, target) == 0.0);
    const DisparityMap both_e(2, 1, {std::exp(1.0), 2.0 * std::exp(1.0)});
    CHECK(std::abs(silog_loss(both_e, target) - 0.5) < 1e-9);
    const DisparityMap opposite(2, 1, {std::exp(1.0), 2.0 * std::exp(-1.0)});
    CHECK(std::abs(silog_loss(opposite, target) - 1.0) < 1e-9);
}

TEST_CASE("silog_loss domain and dimension errors") {
    const DisparityMap ok(2, 1, {1.0, 1.0});
    CHECK_THROWS_WITH_AS(silog_loss(DisparityMap(2, 1, {1.0, 0.0}), ok), doctest::Contains("(1, 0)"), evsim::DomainError);
    CHECK_THROWS_AS(silog_loss(ok, DisparityMap(2, 1, {-1.0, 1.0})), evsim::DomainError);
    CHECK_THROWS_AS(silog_loss(ok, DisparityMap(1, 2, {1.0, 1.0})), evsim::ValidationError);
}

TEST_CASE("silog_loss is non-negative and shifts exactly under prediction scaling") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const DisparityMap d = random_map(6, 5, rng);
        const DisparityMap t = random_map(6, 5, rng);
        const double base = silog_loss(d, t);
        CHECK(base >= 0.0);
        double xbar = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) xbar += std::log(d.values[i] / t.values[i]);
        xbar /= static_cast<double>(d.size());
        for (double s : {0.5, 2.0, 7.0}) {
            DisparityMap scaled = d;
            for (double& v : scaled.values) v *= s;
            const double ls = std::log(s);
            CHECK(silog_loss(scaled, t) - base == doctest::Approx(ls * xbar + 0.5 * ls * ls).epsilon(1e-9));
        }
    }
}

TEST_CASE("gradient_regularizer hand value and invariances") {
    const DisparityMap pred(2, 2, {0, 1, 0, 1});
    const DisparityMap zero(2, 2, 0.0);
    CHECK(gradient_regularizer(pred, zero, 1) == doctest::Approx(0.5));
    CHECK(gradient_regularizer(pred, zero) == doctest::Approx(0.5));  // coarser scales are below 2x2
    CHECK(gradient_regularizer(pred, pred) == 0.0);

    std::mt19937_64 rng(3);
    const DisparityMap a = random_map(9, 7, rng, -2, 2);
    const DisparityMap b = random_map(9, 7, rng, -2, 2);
    const double r = gradient_regularizer(a, b);
    DisparityMap a_shift = a;
    DisparityMap b_shift = b;
    for (double& v : a_shift.values) v += 3.25;
    for (double& v : b_shift.values) v -= 1.5;
    CHECK(gradient_regularizer(a_shift, b_shift) == doctest::Approx(r).epsilon(1e-12));
    CHECK(gradient_regularizer(b, a) == doctest::Approx(r).epsilon(1e-12));
    CHECK_THROWS_AS(gradient_regularizer(a, DisparityMap(7, 9)), evsim::ValidationError);
}

TEST_CASE("gradient_regularizer weights coarse scales by 4^s over full-resolution count") {
    // 4x4 map: scale 1 samples pixels (0,0), (2,0), (0,2), (2,2).
    DisparityMap a(4, 4, 0.0);
    a.at(2, 0) = 1.0;
    const DisparityMap zero(4, 4, 0.0);
    // Scale 0: |1-0| from (1,0)->(2,0), |0-1| from (2,0)->(3,0), |0-1| from (2,0)->(2,1) = 3.
    // Scale 1: (0,0)->(2,0) and (2,0)->(2,2) each differ by 1, weighted by 4.
    CHECK(gradient_regularizer(a, zero, 1) == doctest::Approx(3.0 / 16.0));
    CHECK(gradient_regularizer(a, zero, 2) == doctest::Approx((3.0 + 8.0) / 16.0));
}

TEST_CASE("depth_objective degenerate combinations") {
    std::mt19937_64 rng(4);
    const DisparityMap d = random_map(8, 8, rng);
    const DisparityMap t = random_map(8, 8, rng);
    CHECK(depth_objective(d, d) == 0.0);
    CHECK(depth_objective(d, t, 0.0) == silog_loss(d, t));
}

TEST_CASE("depth_objective matches the independent oracle on random 8x8 maps") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const DisparityMap d = random_map(8, 8, rng);
        const DisparityMap t = random_map(8, 8, rng);
        for (double lambda : {0.0, 0.5, 1.0, 2.0}) {
            const double expected = evsim::testing::oracle_objective(to_oracle(d), to_oracle(t), lambda, 4);
            CHECK(std::abs(depth_objective(d, t, lambda) - expected) < 1e-6);
        }
    }
}

TEST_CASE("analytic gradient agrees with central finite differences") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<std::size_t> pick(0, 63);
    for (int trial = 0; trial < 5; ++trial) {
        const DisparityMap d = random_map(8, 8, rng);
        const DisparityMap t = random_map(8, 8, rng);
        const DisparityMap g = depth_objective_gradient(d, t, 1.0);
        for (int k = 0; k < 16; ++k) {
            const std::size_t i = pick(rng);
            const double h = 1e-6 * d.values[i];
            DisparityMap plus = d;
            DisparityMap minus = d;
            plus.values[i] += h;
            minus.values[i] -= h;
            const double fd = (depth_objective(plus, t) - depth_objective(minus, t)) / (2.0 * h);
            CHECK_MESSAGE(std::abs(fd - g.values[i]) <= 1e-4 * std::max(std::abs(g.values[i]), 1e-3),
                          "pixel " << i << " fd " << fd << " analytic " << g.values[i]);
        }
    }
}

TEST_CASE("disparity text round trip") {
    std::mt19937_64 rng(7);
    const DisparityMap d = random_map(5, 3, rng);
    std::stringstream ss;
    write_disparity_text(ss, d);
    const DisparityMap back = read_disparity_text(ss);
    CHECK(back.width == 5);
    CHECK(back.height == 3);
    CHECK(back.values == d.values);
    std::stringstream bad("3 3 1 2");
    CHECK_THROWS_AS(read_disparity_text(bad), evsim::ValidationError);
}
