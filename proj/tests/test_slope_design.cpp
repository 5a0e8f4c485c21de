#include "ccm/experiments.hpp"
#include "ccm/slope_design.hpp"
#include "oracle_values.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace ccm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("optimal slope balances the pole range") {
    const std::tuple<double, double, double, double> cases[] = {
        {0.05, oracle::opt_slope_0p05, oracle::nw_star_0p05, oracle::nw_star_cf_0p05},
        {0.15, oracle::opt_slope_0p15, oracle::nw_star_0p15, oracle::nw_star_cf_0p15},
        {0.3, oracle::opt_slope_0p3, oracle::nw_star_0p3, oracle::nw_star_cf_0p3},
        {0.75, oracle::opt_slope_0p75, oracle::nw_star_0p75, oracle::nw_star_cf_0p75},
    };
    for (const auto& [lambda, ms, nw, nw_cf] : cases) {
        CHECK_THAT(optimal_slope(lambda), WithinRel(ms, 1e-12));
        CHECK_THAT(n_w_star(lambda), WithinRel(nw, 1e-12));
        CHECK_THAT(n_w_star_closed_form(lambda), WithinRel(nw_cf, 1e-12));
        const auto r = pole_range_normalized(optimal_slope(lambda), lambda);
        CHECK_THAT(r.a_min + r.a_max, WithinAbs(0.0, 1e-14));
        // the closed form is not the settling of the balanced range
        CHECK(std::abs(n_w_star_closed_form(lambda) - n_w_star(lambda)) > 1.0);
    }
    CHECK(optimal_slope(0.0) == 0.0);
}

TEST_CASE("sweep minimum sits at the optimal slope") {
    for (double lambda : {0.05, 0.2, 0.45, 1.0, 1.5}) {
        std::vector<double> grid;
        const double h = 1e-3;
        for (int i = 0; i <= 3000; ++i) grid.push_back(i * h);
        const auto rows = slope_sweep(lambda, grid);
        const auto best = std::min_element(rows.begin(), rows.end(),
                                           [](const auto& a, const auto& b) { return a.n_w < b.n_w; });
        CHECK_THAT(best->m_s_hat, WithinAbs(optimal_slope(lambda), h));
        CHECK_THAT(best->n_w, WithinRel(n_w_star(lambda), 1e-2));
    }
}

TEST_CASE("overshoot grows with lambda and shrinks with slope") {
    for (double lambda : {0.1, 0.4, 0.9}) {
        double prev = std::numeric_limits<double>::infinity();
        for (double ms = 0.0; ms <= 3.0; ms += 0.05) {
            if (1.0 + ms <= lambda) continue;
            const double o = overshoot(pole_range_normalized(ms, lambda));
            CHECK(o <= prev);
            CHECK(o >= 0.0);
            prev = o;
        }
    }
    for (double ms : {0.0, 0.3, 1.0}) {
        double prev = -1.0;
        for (double lambda = 0.0; lambda < 0.9; lambda += 0.05) {
            const double o = overshoot(pole_range_normalized(ms, lambda));
            CHECK(o >= prev);
            prev = o;
        }
    }
}

TEST_CASE("certificates") {
    const auto spec = interference_bounds(0.1, 1.0, 0.6, 0.0);
    CHECK(continuity_check(1.0, 0.0, spec));
    CHECK_FALSE(stability_check(1.0, 0.0, spec));
    CHECK(stability_check(1.0, 0.11, spec));
    // equality is not enough
    CHECK_FALSE(stability_check(1.0, 0.1, spec));
    const auto steep = interference_bounds(0.1, 1.0, 1.5, 0.0);
    CHECK_FALSE(continuity_check(1.0, 0.5, steep));
    CHECK_THROWS_AS(stability_check(1.0, 0.5, steep), ValidationError);
    CHECK_THROWS_AS(continuity_check(1.0, -0.1, spec), ValidationError);
}

TEST_CASE("pole range with fall feedback") {
    // fixed-frequency peak control: (m_s - m2) / (m1 + m_s)
    const auto r = pole_range(1.0, 0.5, 0.0, 3.0);
    CHECK_THAT(r.a_min, WithinRel(-2.5 / 1.5, 1e-12));
    CHECK(r.a_min == r.a_max);
    CHECK_FALSE(r.stable());
    CHECK_FALSE(pole_range(1.0, 1.0, 0.0, 3.0).stable());
    CHECK(pole_range(1.0, 1.5, 0.0, 3.0).stable());
    CHECK_THROWS_AS(pole_range(1.0, 0.0, 1.0), ValidationError);
}

TEST_CASE("design report on a constant off-time loop") {
    const auto config = make_slope_config(1.0, 1.0);
    const ModulationScheme scheme{ConstantOffTime{1.0}};
    const auto spec = make_interference({Trapezoid{0.2, 9.42477796076938, 1.5, 0.0}});
    const auto rep = design_slope(config, scheme, spec, 0.0);
    // the edge slope 1.5 outruns the bare ramp
    CHECK_FALSE(rep.continuous);
    CHECK_FALSE(rep.gas_stable);
    CHECK_FALSE(rep.pole_range);
    CHECK(std::isinf(rep.n_w));
    CHECK_THAT(rep.m_s_star, WithinRel(std::sqrt(0.25 + 2.25) - 0.5, 1e-12));
    const auto at_star = design_slope(config, scheme, spec, rep.m_s_star);
    CHECK(at_star.gas_stable);
    CHECK_THAT(at_star.n_w, WithinRel(n_w_star(1.5), 1e-12));
    CHECK_THAT(at_star.o_w, WithinRel(-at_star.pole_range->a_min, 1e-12));

    const auto buck = make_buck_config(12.0, 2.0, 240e-9, 100e-6, 0.2, 10e-3);
    const auto valley = design_slope(buck, {ConstantOnTime{100e-9}},
                                     interference_bounds(0.1, 1e7, 4e6, 0.0), 0.0);
    // valley control compares against the falling slope m2
    CHECK_THAT(valley.m_s_star, WithinRel(optimal_slope(4e6 / buck.m2) * buck.m2, 1e-12));
}

TEST_CASE("simulated worst transient stays within the pole metric") {
    const auto config = make_slope_config(1.0, 1.0);
    const ModulationScheme scheme{ConstantOffTime{1.0}};
    const double lambda = 0.45, a = 0.1;
    const double omega = 0.8 * std::numbers::pi * lambda / (2.0 * a);
    for (double ms : {0.1, 0.3, 0.8}) {
        const auto metric = transient_metrics(pole_range_normalized(ms, lambda));
        double worst = 0.0;
        for (int k = 0; k < 8; ++k) {
            const auto spec = make_interference({Trapezoid{a, omega, lambda, k * 0.785}});
            const auto m = measure_step(config, scheme, spec, SlopeComp{ms}, 2.0, 0.1, 20, 60);
            REQUIRE_FALSE(m.transient.saturated);
            worst = std::max(worst, m.transient.n_settle_fractional);
        }
        CHECK(worst <= metric.n_w + 1.0);
    }
}
