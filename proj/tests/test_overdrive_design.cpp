#include "ccm/overdrive_design.hpp"
#include "oracle_values.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace ccm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double pi = std::numbers::pi;

const ConverterConfig unit = make_slope_config(1.0, 1.0);
const ModulationScheme cft{ConstantOffTime{1.0}};

}  // namespace

TEST_CASE("charge threshold bounds") {
    const auto spec = make_interference({Sinusoid{0.05, 62.832e6, 0.0}});
    CHECK_THAT(stability_bound(1e6, spec), WithinRel(oracle::od_stab_bound, 1e-12));
    const double q = 0.0116e-6 - b_functional(spec);
    CHECK_THAT(max_overdrive_delay(1e6, spec, q), WithinRel(oracle::od_tod_max, 1e-12));
    CHECK_THROWS_AS(max_overdrive_delay(1e6, spec, -1.0), ValidationError);
    CHECK_THROWS_AS(stability_bound(1e6, make_interference({DampedRing{0.1, 1e6, 1e3, 0.0}})),
                    SpectrumError);

    // the longest delay grows with the threshold
    double prev = 0.0;
    for (double qq = 0.0; qq < 1e-6; qq += 1e-8) {
        const double t = max_overdrive_delay(1e6, spec, qq);
        CHECK(t > prev);
        prev = t;
    }
}

TEST_CASE("psi range and its poles") {
    const auto r = psi_and_pole_range(1.0, 0.1, 2.0, 1.0);
    CHECK_THAT(r.psi_min, WithinRel(oracle::psi_min, 1e-12));
    CHECK_THAT(r.psi_max, WithinRel(oracle::psi_max, 1e-12));
    CHECK_THAT(r.poles.a_min, WithinRel(oracle::psi_a_min, 1e-12));
    CHECK_THAT(r.poles.a_max, WithinRel(oracle::psi_a_max, 1e-12));
    CHECK(r.small_signal_stable);
    CHECK_THROWS_AS(psi_and_pole_range(1.0, 0.1, 2.0, 0.05), InfeasibleError);
    CHECK(psi_and_pole_range(1.0, 0.0, 2.0, 0.5).poles.a_max == 0.0);
}

TEST_CASE("psi-range metrics improve with tau") {
    for (double a : {0.02, 0.1, 0.2}) {
        double prev_n = std::numeric_limits<double>::infinity();
        double prev_o = prev_n;
        const double floor = 1.01 * std::max(min_stable_tau_hat(a, 2.0), a / 2.0);
        for (double th = floor; th < 5.0; th *= 1.1) {
            const auto r = psi_and_pole_range(1.0, a, 2.0, th);
            if (!r.small_signal_stable) continue;
            const auto m = transient_metrics(r.poles);
            CHECK(m.n_w <= prev_n);
            CHECK(m.o_w <= prev_o);
            prev_n = m.n_w;
            prev_o = m.o_w;
        }
    }
}

TEST_CASE("numeric psi stays inside the bound") {
    for (double phase : {0.0, 0.7, 1.9, 3.0, 4.4, 5.5}) {
        const double a = 0.05, omega = 2 * pi * 2.0;
        const auto spec = make_interference({Sinusoid{a, omega, phase}});
        const OverdriveDelay od{0.08, 1.0, 0.0, 0.0};
        const double psi = numeric_psi(unit, cft, spec, od, 2.0);
        const auto r = psi_and_pole_range(1.0, a, 2.0, 2.0 * 0.08);
        CHECK(psi >= r.psi_min - 1e-6);
        CHECK(psi <= r.psi_max + 1e-6);
    }
}

TEST_CASE("comparator triggers stay inside the envelope") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto frame = make_frame(unit, cft);
    const ComparatorModel model{OverdriveDelay{0.15, 1.0, 0.0, 0.0}};
    const double omega_l = 2 * pi * 2.5;
    for (int trial = 0; trial < 60; ++trial) {
        const double a = 0.1 * u(rng);
        const double omega = omega_l * (1.0 + 3.0 * u(rng));
        const double s_min = 2.0 * a * omega / pi;
        const auto spec =
            make_interference({Trapezoid{a, omega, s_min * (1.0 + 4.0 * u(rng)), 2 * pi * u(rng)}});
        const double x = 1.0 - 0.3 * u(rng);
        auto ctx = detail::make_context(frame, unit, model.params, x, 2.0, cycle_waveform(spec, 0),
                                        0.0, 64);
        ctx.t_min = 0.0;
        const double t = overdrive_trigger_time(ctx, model.params).t;
        const auto [lo, hi] = model.trigger_envelope(1.0, x, 2.0, a, 1.0);
        CHECK(t >= lo - 1e-9);
        CHECK(t <= hi + 1e-9);
        const auto reg = model.regions(1.0, x, 2.0, a);
        CHECK(reg.t_b <= reg.t_d);
    }
    CHECK_THAT(model.ideal_delay(1.0, 1.0), WithinRel(std::sqrt(0.3), 1e-15));
}

TEST_CASE("sizing for speed") {
    const ModulationScheme scheme{ConstantOffTime{1.0}};
    const auto cls = make_interference({Trapezoid{0.1, 2 * pi * 2.5, 2.0, 0.0}});
    const auto rep = size_for_speed(unit, scheme, cls, 1.0, 0.05);
    CHECK_THAT(rep.stability_bound, WithinRel(oracle::size_bound, 1e-9));
    CHECK_THAT(rep.charge_threshold, WithinRel(oracle::size_q, 1e-9));
    CHECK_THAT(rep.tau_c, WithinRel(oracle::size_q, 1e-9));
    CHECK_THAT(rep.t_od_max, WithinRel(oracle::size_tod_max, 1e-9));
    CHECK(rep.t_on_min == rep.t_od_max);
    CHECK_THAT(rep.tau_hat, WithinRel(oracle::size_tau_hat, 1e-9));
    REQUIRE(rep.psi_range);
    CHECK_THAT(rep.psi_range->poles.a_min, WithinRel(oracle::size_a_min, 1e-9));
    CHECK_THAT(rep.psi_range->poles.a_max, WithinRel(oracle::size_a_max, 1e-9));
    // certified globally, yet the linearized worst case leaves the unit circle
    CHECK(rep.gas_stable);
    CHECK_FALSE(rep.psi_range->small_signal_stable);
    CHECK(std::isinf(rep.n_w));

    // the normalized boundary assumes a sinusoid; the trapezoid's wider
    // spectrum asks for more
    CHECK_THAT(min_stable_tau_hat(rep.a_hat, rep.omega_hat),
               WithinRel(8.0 * 0.01 + 0.1 / (pi * 2.5), 1e-12));
    CHECK(rep.tau_hat > min_stable_tau_hat(rep.a_hat, rep.omega_hat));

    const auto loud = make_interference({Trapezoid{0.45, 2 * pi * 2.5, 5.0, 0.0}});
    CHECK_THROWS_AS(size_for_speed(unit, scheme, loud, 1.0), InfeasibleError);
    CHECK_THROWS_AS(size_for_speed(unit, {FixedFrequency{2.0}}, cls, 1.0), ScopeError);
    CHECK_THROWS_AS(size_for_speed(unit, scheme, cls, 0.0), ValidationError);
}

TEST_CASE("datasheet fit") {
    const double p1 = 2e-12, p2 = 15e-9;
    std::vector<std::pair<double, double>> pts;
    for (double v : {2e-3, 5e-3, 10e-3, 20e-3, 50e-3, 100e-3}) pts.emplace_back(v, p1 / v + p2);
    const auto [f1, f2] = fit_datasheet_delay(pts);
    CHECK_THAT(f1, WithinRel(p1, 1e-9));
    CHECK_THAT(f2, WithinRel(p2, 1e-9));

    const std::vector<std::pair<double, double>> same = {{5e-3, 1e-9}, {5e-3, 2e-9}};
    CHECK_THROWS_AS(fit_datasheet_delay(same), ValidationError);
    const std::vector<std::pair<double, double>> neg = {{-5e-3, 1e-9}, {5e-3, 2e-9}};
    CHECK_THROWS_AS(fit_datasheet_delay(neg), ValidationError);
}

TEST_CASE("certificate names") {
    CHECK(to_string(Certificate::yes) == "true");
    CHECK(to_string(Certificate::not_evaluable) == "not-evaluable");
}
