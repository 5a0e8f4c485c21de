#include "ccm/metrics.hpp"
#include "ccm/plant_models.hpp"
#include "ccm/spectrum.hpp"
#include "oracle_values.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace ccm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("settling and overshoot of a pole range") {
    CHECK_THAT(settling_of_pole(0.5352), WithinRel(oracle::settle_0p5352, 1e-12));
    CHECK_THAT(settling_of_pole(-0.5352), WithinRel(oracle::settle_0p5352, 1e-12));
    CHECK(settling_of_pole(0.0) == 0.0);
    CHECK_THROWS_AS(settling_of_pole(1.0), UnstableError);
    CHECK_THROWS_AS(settling_of_pole(-1.2), UnstableError);

    const auto r = make_pole_range(-0.3, 0.6);
    CHECK(r.stable());
    CHECK(settling_cycles(r) == settling_of_pole(0.6));
    CHECK(overshoot(r) == 0.3);
    CHECK(overshoot(make_pole_range(0.1, 0.6)) == 0.0);
    CHECK_FALSE(std::signbit(overshoot(make_pole_range(0.0, 0.6))));
    CHECK_FALSE(make_pole_range(-1.0, 0.2).stable());
    CHECK_THROWS_AS(make_pole_range(0.5, 0.1), ValidationError);
}

TEST_CASE("measured transient of geometric responses matches the pole metric") {
    for (double a : {-0.9, -0.6, -0.3, -0.1, 0.1, 0.3, 0.6, 0.9}) {
        std::vector<double> y(400, 0.0);
        // step from 0 to 1 at sample 10; error a^k after k cycles
        for (std::size_t i = 10; i < y.size(); ++i)
            y[i] = 1.0 - std::pow(a, static_cast<double>(i - 9));
        const auto m = measure_transient(y, 10, kSettlingBand, 1.0);
        CHECK_FALSE(m.saturated);
        // the geometric error crosses the band exactly at the pole settling time
        CHECK_THAT(m.n_settle_fractional, WithinAbs(settling_of_pole(a), 1e-9));
        CHECK(m.n_settle == static_cast<int>(std::floor(settling_of_pole(a))) + 1);
        CHECK_THAT(m.overshoot, WithinAbs(std::max(0.0, -a), 1e-12));
    }
}

TEST_CASE("measured transient edge cases") {
    const std::vector<double> deadbeat = {0.0, 0.0, 1.0, 1.0, 1.0};
    const auto d = measure_transient(deadbeat, 2);
    CHECK(d.n_settle == 1);
    CHECK(d.overshoot == 0.0);

    const std::vector<double> slow = {0.0, 0.5, 0.6, 0.7};
    CHECK(measure_transient(slow, 1, kSettlingBand, 1.0).saturated);

    const std::vector<double> flat = {1.0, 1.0, 1.0};
    CHECK_THROWS_AS(measure_transient(flat, 1), ValidationError);
    CHECK_THROWS_AS(measure_transient(flat, 0), ValidationError);
    CHECK_THROWS_AS(measure_transient(flat, 5), ValidationError);
}

TEST_CASE("transfer function basics") {
    const auto tf = make_tf({2.0, 1.0}, {2.0, -1.0, 0.24});
    CHECK(tf.den[0] == 1.0);
    CHECK(tf.num[0] == 1.0);
    const auto p = poles(tf);
    REQUIRE(p.size() == 2);
    CHECK_THAT(std::abs(p[0] * p[1]), WithinRel(0.12, 1e-12));
    CHECK_THAT(dc_gain(tf), WithinRel(3.0 / 1.24, 1e-12));
    CHECK_THROWS_AS(make_tf({1.0}, {0.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(make_tf({1.0, 1.0, 1.0, 1.0}, {1.0}), ValidationError);
}

TEST_CASE("step response recursion matches the partial-fraction form") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.95, 0.95);
    for (int trial = 0; trial < 100; ++trial) {
        const double p1 = u(rng), p2 = u(rng);
        if (std::abs(p1 - p2) < 1e-3) continue;
        const auto tf = make_tf({u(rng), u(rng), u(rng)}, {1.0, -(p1 + p2), p1 * p2});
        const auto rec = step_response(tf, 60);
        const auto cf = step_response_closed_form(tf, 60);
        for (std::size_t k = 0; k < rec.size(); ++k)
            CHECK_THAT(cf[k], WithinAbs(rec[k], 1e-9 * std::max(1.0, std::abs(rec[k]))));
        CHECK_THAT(step_response(tf, 2000).back(), WithinRel(dc_gain(tf), 1e-9));
    }
    // complex pair
    const auto osc = make_tf({0.5}, {1.0, -0.8, 0.64});
    const auto a = step_response(osc, 40);
    const auto b = step_response_closed_form(osc, 40);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK_THAT(b[k], WithinAbs(a[k], 1e-9));
    CHECK_THROWS_AS(step_response_closed_form(make_tf({1.0}, {1.0, -1.0, 0.25}), 5),
                    std::domain_error);
}

TEST_CASE("plant coefficients") {
    const auto a = appendix_a_coefficients({5.0, 200.0, 12.0}, 0.5, 1.2e-7);
    CHECK_THAT(a.a1, WithinRel(oracle::appa_a1, 1e-12));
    CHECK_THAT(a.b1, WithinRel(oracle::appa_b1, 1e-12));
    CHECK_THAT(a.b2, WithinRel(oracle::appa_b2, 1e-12));
    CHECK_THAT(a.g, WithinRel(oracle::appa_g, 1e-12));

    const auto b = appendix_b_coefficients({5.0, 200.0, 12.0}, 0.5, 0.2);
    CHECK_THAT(b.a1, WithinRel(oracle::appb_a1, 1e-12));
    CHECK_THAT(b.b1, WithinRel(oracle::appb_b1, 1e-12));
    CHECK_THAT(b.g, WithinRel(oracle::appb_g, 1e-12));

    const auto c = appendix_c_coefficients({1.0, 10.0, 2.0, 1.0, 1.0});
    CHECK_THAT(c.a1, WithinRel(oracle::appc_a1, 1e-12));
    CHECK_THAT(c.b1, WithinRel(oracle::appc_b1, 1e-12));
    CHECK_THAT(c.g, WithinRel(oracle::appc_g, 1e-12));

    // the prototype buck under constant on-time maps onto the same tuple
    const auto cfg = make_buck_config(12.0, 2.0, 240e-9, 100e-6, 0.2, 10e-3);
    const ModulationScheme cot{ConstantOnTime{100e-9}};
    const auto p = buck_plant_params(cfg, cot);
    CHECK_THAT(p.m_ratio, WithinRel(5.0, 1e-12));
    CHECK_THAT(p.tau1_hat, WithinRel(200.0, 1e-12));
    CHECK_THAT(p.tau2_hat, WithinRel(12.0, 1e-12));
    const auto tf = appendix_a_tf(cfg, cot, 0.5);
    CHECK_THAT(tf.num[0], WithinRel(oracle::appa_g, 1e-12));
    CHECK_THAT(tf.den[1], WithinRel(-oracle::appa_a1, 1e-12));
    CHECK_THAT(tf.sample_period, WithinRel(600e-9, 1e-12));
}

namespace {

// Triangle current with period 1; `mod` alternates the peak every other cycle.
std::vector<std::pair<double, double>> triangle(int cycles, double mod, int period = 2) {
    std::vector<std::pair<double, double>> pts;
    for (int n = 0; n < cycles; ++n) {
        const double peak = 1.0 + ((n % period) == 0 ? mod : 0.0);
        pts.emplace_back(n, 0.0);
        pts.emplace_back(n + 0.3, peak);
    }
    pts.emplace_back(cycles, 0.0);
    return pts;
}

}  // namespace

TEST_CASE("spectrum finds planted subharmonics and nothing on clean traces") {
    CHECK(spectrum(triangle(200, 0.0), 1.0).orders.empty());

    const auto half = spectrum(triangle(200, 0.2), 1.0);
    CHECK(half.orders == std::set<Order>{{1, 2}});

    const auto third = spectrum(triangle(300, 0.2, 3), 1.0);
    CHECK(third.orders == std::set<Order>{{1, 3}, {2, 3}});

    // a planted sinusoid at 3/7 of the switching rate
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i <= 200 * 64; ++i) {
        const double t = i / 64.0;
        pts.emplace_back(t, std::sin(2 * std::numbers::pi * t) +
                                0.05 * std::sin(2 * std::numbers::pi * 3.0 / 7.0 * t));
    }
    CHECK(spectrum(pts, 1.0).orders == std::set<Order>{{3, 7}});

    SpectrumOptions narrow;
    narrow.max_denominator = 5;
    CHECK(spectrum(pts, 1.0, narrow).orders.empty());

    CHECK_THROWS_AS(spectrum(triangle(10, 0.0), 1.0), ValidationError);
    CHECK_THROWS_AS(spectrum(triangle(100, 0.0), 0.0), ValidationError);
}
