#pragma once

#include "ccm/core.hpp"
#include "ccm/experiments.hpp"
#include "ccm/interference.hpp"
#include "ccm/metrics.hpp"
#include "ccm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

namespace ccm {

// ============================================================================
// Large-signal certificates (constant off-time only)
// ============================================================================

/// Normalized inputs of the filter certificates: amplitude and command over
/// m1*T_on, frequency as cycles per T_on, time constant and minimum on-time
/// over T_on.
struct FilterTheoremInputs {
    double a_hat = 0.0;
    double omega_hat = std::numeric_limits<double>::infinity();
    double i_max_hat = 0.0;
    double t_on_min_hat = 0.0;
    double tau_hat = 1.0;
};

struct FilterTheoremTerms {
    double b = 0.0;
    double d = 0.0;
    double k0 = 0.0, k1 = 0.0, k2 = 0.0, k3 = 0.0;
    double attenuation = 0.0;  ///< 1 / sqrt(1 + (2 pi omega tau)^2)
};

inline FilterTheoremTerms filter_theorem_terms(const FilterTheoremInputs& in) {
    using detail::require;
    require(in.tau_hat > 0.0 && std::isfinite(in.tau_hat), "tau_hat must be positive");
    require(in.a_hat >= 0.0 && in.i_max_hat >= 0.0, "a_hat and i_max_hat must be non-negative");
    require(in.t_on_min_hat >= 0.0, "t_on_min_hat must be non-negative");
    require(in.omega_hat > 0.0, "omega_hat must be positive");
    FilterTheoremTerms k;
    const double t_min_hat = in.t_on_min_hat + 1.0;
    k.b = std::exp(-t_min_hat / in.tau_hat);
    k.d = std::exp(-in.t_on_min_hat / in.tau_hat);
    const double g = 1.0 - k.d;
    k.k0 = k.d * (in.t_on_min_hat + in.tau_hat * k.d - in.tau_hat) / (g * g);
    k.k1 = 1.0 / g;
    k.k2 = 1.0 + (1.0 + k.d) * k.d / (g * g);
    k.k3 = (k.d - k.b) / (g * g);
    const double x = 2.0 * std::numbers::pi * in.omega_hat * in.tau_hat;
    k.attenuation = std::isfinite(x) ? 1.0 / std::sqrt(1.0 + x * x) : 0.0;
    return k;
}

/// Left-hand side of the continuity condition (certified when < 1). Infinite
/// when t_on_min is zero, since then d = 1.
inline double continuity_lhs(const FilterTheoremInputs& in) {
    const auto k = filter_theorem_terms(in);
    const double g = (1.0 - k.d) * in.tau_hat;
    if (g <= 0.0) return std::numeric_limits<double>::infinity();
    return in.a_hat / g * (1.0 + k.d * k.attenuation) + k.b * in.i_max_hat / g;
}

inline bool continuity_condition(const FilterTheoremInputs& in) { return continuity_lhs(in) < 1.0; }

/// Both left-hand sides of the stability condition (certified when each < 1/2).
inline std::pair<double, double> stability_lhs(const FilterTheoremInputs& in) {
    const auto k = filter_theorem_terms(in);
    if (k.d >= 1.0) {
        const double inf = std::numeric_limits<double>::infinity();
        return {inf, inf};
    }
    const double t = in.tau_hat;
    const double first = k.k0 / t + k.k1 * in.a_hat / t + k.k2 * in.a_hat * k.attenuation / t;
    const double second = k.k3 * in.i_max_hat / t + in.a_hat / t + in.a_hat * k.attenuation / t;
    return {first, second};
}

inline bool stability_condition(const FilterTheoremInputs& in) {
    const auto [first, second] = stability_lhs(in);
    return first < 0.5 && second < 0.5;
}

namespace detail {

inline FilterTheoremInputs theorem_inputs(const ConverterConfig& config,
                                          const ModulationScheme& scheme,
                                          const InterferenceSpec& interference, double tau,
                                          double i_max) {
    if (!std::holds_alternative<ConstantOffTime>(scheme.variant))
        throw ScopeError("out of theorem scope: filter certificates cover constant off-time only");
    validate(interference);
    require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
    require(i_max >= 0.0 && std::isfinite(i_max), "i_max must be non-negative");
    const ControlFrame frame = make_frame(config, scheme);
    const double t_on = frame.base_interval;
    const double ramp = frame.rise * t_on;
    FilterTheoremInputs in;
    in.a_hat = interference.a_ub / ramp;
    in.omega_hat = interference.omega_l * t_on / (2.0 * std::numbers::pi);
    in.i_max_hat = i_max / ramp;
    in.t_on_min_hat = scheme.t_on_min / t_on;
    in.tau_hat = tau / t_on;
    return in;
}

}  // namespace detail

inline bool continuity_condition(const ConverterConfig& config, const ModulationScheme& scheme,
                                 const InterferenceSpec& interference, double tau, double i_max) {
    return continuity_condition(detail::theorem_inputs(config, scheme, interference, tau, i_max));
}

/// Stability is only claimed on top of the continuity certificate.
inline bool stability_condition(const ConverterConfig& config, const ModulationScheme& scheme,
                                const InterferenceSpec& interference, double tau, double i_max) {
    const auto in = detail::theorem_inputs(config, scheme, interference, tau, i_max);
    return continuity_condition(in) && stability_condition(in);
}

/// tau_hat values in [lo, hi] where the stability verdict flips, located by a
/// log-spaced scan refined with bisection.
inline std::vector<double> stability_boundaries(FilterTheoremInputs in, double lo, double hi,
                                                int scan = 400) {
    detail::require(lo > 0.0 && hi > lo, "need 0 < lo < hi");
    auto verdict = [&](double t) {
        in.tau_hat = t;
        return stability_condition(in);
    };
    std::vector<double> edges;
    const double r = std::log(hi / lo);
    double prev_t = lo;
    bool prev = verdict(lo);
    for (int i = 1; i <= scan; ++i) {
        const double t = lo * std::exp(r * i / scan);
        const bool v = verdict(t);
        if (v != prev) {
            double a = prev_t, b = t;
            for (int k = 0; k < 100 && b - a > 1e-13 * b; ++k) {
                const double mid = 0.5 * (a + b);
                (verdict(mid) == prev ? a : b) = mid;
            }
            edges.push_back(0.5 * (a + b));
        }
        prev = v;
        prev_t = t;
    }
    return edges;
}

// ============================================================================
// Linearized loop
// ============================================================================

/// Small-signal loop around a periodic operating point. Frame quantities:
/// valley control is mirrored into peak control, so ramps are positive.
struct FilterLoopLinearization {
    double c1 = 0.0;       ///< 1 - d: sensitivity of the filter output to the start current
    double c2 = 0.0;       ///< sensitivity to the filter state carried into the interval
    double k_gain = 0.0;   ///< 1 / (1 - d)
    double d = 0.0;        ///< exp(-T / tau)
    double f_zero = 0.0;   ///< b = exp(-(T + other) / tau)
    double psi1 = 0.0;     ///< interference feedback, A/s
    double psi2 = 0.0;     ///< filter-state feedback, A/s
    double crossing_slope = 0.0;  ///< filtered-sensor slope at the trigger, A/s
    double pole = 0.0;     ///< a (first-order loops)
    double beta = 0.0;
    double i_start = 0.0;  ///< physical current at the start of the controlled interval
    bool consistent = true;  ///< the simulated trigger from this point lands on T
    DiscreteTF closed_loop;  ///< extremum current over command
};

namespace detail {

/// Start current (frame) of the periodic orbit whose trigger lands at T, given
/// the filter output equals c at every trigger.
inline double filter_orbit_start(const ControlFrame& frame, double tau, double c,
                                 const CycleWaveform& w) {
    const double t = frame.base_interval;
    const double d = std::exp(-t / tau);
    const double b = d * std::exp(-frame.other_length(t) / tau);
    const double y_w = w.empty() ? 0.0 : w.filtered(tau, 0.0, t);
    return (c * (1.0 - b) - frame.rise * (t - tau * (1.0 - d)) - y_w) / (1.0 - d);
}

}  // namespace detail

/// Linearizes the filter-conditioned loop about its periodic orbit for the
/// command `i_command`, under the interference of cycle 0 (held every cycle).
inline FilterLoopLinearization linearize(const ConverterConfig& config,
                                         const ModulationScheme& scheme,
                                         const InterferenceSpec& interference, double tau,
                                         double i_command) {
    using detail::require;
    require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
    require(std::isfinite(i_command), "i_command must be finite");
    validate(interference);
    const ControlFrame frame = make_frame(config, scheme);
    const CycleWaveform w = cycle_waveform(interference, 0, frame.sign);
    const double c = frame.sign * i_command;
    const double t = frame.base_interval;
    const double m = frame.rise;
    const double other = frame.other_length(t);
    const double x = detail::filter_orbit_start(frame, tau, c, w);

    FilterLoopLinearization lin;
    lin.d = std::exp(-t / tau);
    lin.f_zero = lin.d * std::exp(-other / tau);
    lin.c1 = 1.0 - lin.d;
    lin.c2 = lin.d;
    lin.k_gain = 1.0 / lin.c1;
    const double w_t = w.empty() ? 0.0 : w.value(t);
    const double y_w = w.empty() ? 0.0 : w.filtered(tau, 0.0, t);
    lin.psi1 = (w_t - y_w) / tau;
    lin.psi2 = (lin.d * x - lin.f_zero * c) / tau;
    lin.crossing_slope = m * lin.c1 + lin.psi1 + lin.psi2;
    lin.i_start = frame.sign * x;
    if (!(lin.crossing_slope > 0.0))
        throw UnstableError("operating point has no transversal trigger crossing");

    const double f = lin.crossing_slope;
    const double b = lin.f_zero;
    const double period = t + other;
    if (!frame.period) {
        lin.pole = 1.0 - m * lin.c1 / f;
        lin.beta = m / f;
        lin.closed_loop = make_tf({lin.beta, -lin.beta * b}, {1.0, -lin.pole}, period);
    } else {
        // the next interval's filter carry depends on this trigger instant
        const double g = b * c / tau;
        const double big_m = frame.rise + frame.fall;
        const double fall = frame.fall;
        lin.closed_loop = make_tf({m / f, (fall - b * m) / f, -b * fall / f},
                                  {1.0, ((1.0 - lin.d) * big_m - f + g) / f, -g / f}, period);
        const auto p = poles(lin.closed_loop);
        lin.pole = 0.0;
        for (const auto& z : p)
            if (std::abs(z) > std::abs(lin.pole)) lin.pole = z.real();
        lin.beta = m / f;
    }

    // check the orbit: the trigger from this start must land on T
    auto ctx = detail::make_context(frame, config, LowPassFilter{tau}, x, c, w,
                                    c * std::exp(-other / tau), 256);
    ctx.t_min = 0.0;
    ctx.cap_is_duty_limit = true;
    const double t_hit = find_trigger(ctx, LowPassFilter{tau}).t;
    lin.consistent = std::abs(t_hit - t) <= 1e-6 * t;
    return lin;
}

/// psi1 from the line spectrum of a sum of sinusoids (frame sign included),
/// Re[A e^{j phi} (j omega e^{j omega T} + d / tau) / (1 + j omega tau)].
inline double psi1_spectral(std::span<const Sinusoid> lines, double sign, double tau, double t) {
    using namespace std::complex_literals;
    const double d = std::exp(-t / tau);
    double sum = 0.0;
    for (const auto& s : lines) {
        const std::complex<double> a = s.amplitude * std::exp(1i * s.phase);
        sum += (a * (1i * s.omega * std::exp(1i * s.omega * t) + d / tau) /
                (1.0 + 1i * s.omega * tau))
                   .real();
    }
    return sign * sum;
}

// ============================================================================
// Design sweep
// ============================================================================

struct FilterSweepRow {
    double tau_hat = 0.0;
    double n_w = std::numeric_limits<double>::infinity();  ///< exact step response, worst phase
    double o_w = std::numeric_limits<double>::infinity();
    double n_w_pole = std::numeric_limits<double>::infinity();  ///< pole-only metrics
    double o_w_pole = std::numeric_limits<double>::infinity();
    std::optional<PoleRange> pole_range;
    bool stable = false;  ///< small-signal, every phase
    std::optional<bool> certified;  ///< large-signal certificate; empty outside its scope
};

struct FilterSweepOptions {
    int phases = 64;
    std::size_t response_length = 400;
};

namespace detail {

/// The interference with every component phase advanced by `shift`.
inline InterferenceSpec phase_shifted(InterferenceSpec spec, double shift) {
    for (auto& c : spec.waveform) {
        if (auto* s = std::get_if<Sinusoid>(&c)) s->phase += shift;
        else if (auto* z = std::get_if<Trapezoid>(&c)) z->phase += shift;
    }
    return spec;
}

/// A concrete worst-case representative when the interference holds bounds only.
inline InterferenceSpec representative(const InterferenceSpec& spec) {
    if (!spec.waveform.empty() || spec.a_ub == 0.0) return spec;
    require(std::isfinite(spec.omega_l), "bounds-only interference needs a finite omega_l");
    auto out = make_interference({Sinusoid{spec.a_ub, spec.omega_l, 0.0}});
    return out;
}

}  // namespace detail

/// Worst-case transient of the exact closed loop across interference phases
/// and the given operating points (commands).
inline FilterSweepRow filter_design_point(const ConverterConfig& config,
                                          const ModulationScheme& scheme,
                                          const InterferenceSpec& interference, double tau,
                                          std::span<const double> i_commands,
                                          const FilterSweepOptions& opt = {}) {
    detail::require(!i_commands.empty(), "need at least one operating point");
    const ControlFrame frame = make_frame(config, scheme);
    const InterferenceSpec rep = detail::representative(interference);
    const int phases = rep.waveform.empty() ? 1 : opt.phases;

    FilterSweepRow row;
    row.tau_hat = tau / frame.base_interval;
    double a_lo = std::numeric_limits<double>::infinity();
    double a_hi = -a_lo;
    double n_w = 0.0, o_w = 0.0;
    bool stable = true;
    for (double i_command : i_commands) {
        for (int k = 0; k < phases && stable; ++k) {
            const auto spec = detail::phase_shifted(rep, 2.0 * std::numbers::pi * k / phases);
            FilterLoopLinearization lin;
            try {
                lin = linearize(config, scheme, spec, tau, i_command);
            } catch (const UnstableError&) {
                stable = false;
                break;
            }
            for (const auto& p : poles(lin.closed_loop)) {
                if (std::abs(p) >= 1.0) stable = false;
                a_lo = std::min(a_lo, p.real());
                a_hi = std::max(a_hi, p.real());
            }
            if (!stable) break;
            const auto resp = step_response(lin.closed_loop, opt.response_length);
            const auto mt =
                measure_transient(resp, 0, kSettlingBand, dc_gain(lin.closed_loop), 0.0);
            n_w = std::max(n_w, mt.n_settle_fractional);
            o_w = std::max(o_w, mt.overshoot);
        }
    }
    row.stable = stable;
    if (stable) {
        row.n_w = n_w;
        row.o_w = o_w;
        row.pole_range = make_pole_range(a_lo, a_hi);
        row.n_w_pole = settling_cycles(*row.pole_range);
        row.o_w_pole = overshoot(*row.pole_range);
    }
    if (std::holds_alternative<ConstantOffTime>(scheme.variant)) {
        double i_max = 0.0;
        for (double i : i_commands) i_max = std::max(i_max, std::abs(i));
        row.certified = stability_condition(config, scheme, interference, tau, i_max);
    }
    return row;
}

inline FilterSweepRow filter_design_point(const ConverterConfig& config,
                                          const ModulationScheme& scheme,
                                          const InterferenceSpec& interference, double tau,
                                          double i_command, const FilterSweepOptions& opt = {}) {
    const double cmd[] = {i_command};
    return filter_design_point(config, scheme, interference, tau, cmd, opt);
}

/// Measured counterpart of filter_design_point: a small command step applied
/// to the simulator from the periodic orbit of each interference phase, worst
/// case over the phases.
struct SimulatedStep {
    double n_w = 0.0;
    double o_w = 0.0;
    bool saturated = false;  ///< some phase never settled or had no stable orbit
};

inline SimulatedStep simulated_worst_step(const ConverterConfig& config,
                                          const ModulationScheme& scheme,
                                          const InterferenceSpec& interference, double tau,
                                          double i_command, int phases = 16,
                                          double rel_step = 0.01, std::size_t n_pre = 50,
                                          std::size_t n_post = 300) {
    detail::require(phases >= 1, "phases must be at least 1");
    const ControlFrame frame = make_frame(config, scheme);
    const InterferenceSpec rep = detail::representative(interference);
    const int count = rep.waveform.empty() ? 1 : phases;
    SimulatedStep out;
    for (int k = 0; k < count; ++k) {
        const auto spec = detail::phase_shifted(rep, 2.0 * std::numbers::pi * k / count);
        FilterLoopLinearization lin;
        try {
            lin = linearize(config, scheme, spec, tau, i_command);
        } catch (const UnstableError&) {
            out.saturated = true;
            continue;
        }
        InitState init;
        init.i_start = lin.i_start;
        init.filter_output =
            frame.sign * detail::filter_carry(frame, tau, frame.sign * i_command, frame.base_interval);
        const auto m = measure_step(config, scheme, spec, LowPassFilter{tau}, i_command, rel_step,
                                    n_pre, n_post, init);
        out.saturated = out.saturated || m.transient.saturated;
        out.n_w = std::max(out.n_w, m.transient.n_settle_fractional);
        out.o_w = std::max(out.o_w, m.transient.overshoot);
    }
    return out;
}

inline std::vector<FilterSweepRow> design_sweep(const ConverterConfig& config,
                                                const ModulationScheme& scheme,
                                                const InterferenceSpec& interference,
                                                std::span<const double> tau_hat_grid,
                                                std::span<const double> i_commands,
                                                const FilterSweepOptions& opt = {}) {
    for (std::size_t i = 1; i < tau_hat_grid.size(); ++i)
        detail::require(tau_hat_grid[i] > tau_hat_grid[i - 1], "tau grid must be sorted ascending");
    const double t = make_frame(config, scheme).base_interval;
    std::vector<FilterSweepRow> rows;
    rows.reserve(tau_hat_grid.size());
    for (double th : tau_hat_grid)
        rows.push_back(filter_design_point(config, scheme, interference, th * t, i_commands, opt));
    return rows;
}

}  // namespace ccm
