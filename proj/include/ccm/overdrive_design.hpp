#pragma once

#include "ccm/core.hpp"
#include "ccm/interference.hpp"
#include "ccm/metrics.hpp"
#include "ccm/normalize.hpp"
#include "ccm/simulator.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ccm {

// All charges are referred to the sensed current: Q = v_trig * tau_c / r_sense
// in A*s, so the comparator threshold compares directly with the integral of
// the current error.

/// Time instants dividing one interval into the comparator regions: blanking
/// ends at t_a; the upper and lower interference envelopes reach the command at
/// t_b and t_d.
struct RegionBoundaries {
    double t_a = 0.0;
    double t_b = 0.0;
    double t_d = 0.0;
};

struct ComparatorModel {
    OverdriveDelay params;

    /// Region boundaries for an interval starting at i_start with ramp `ramp`
    /// toward `command` (frame currents), interference amplitude below a_ub.
    RegionBoundaries regions(double ramp, double i_start, double command, double a_ub) const {
        detail::require(ramp > 0.0, "ramp must be positive");
        const double t0 = (command - i_start) / ramp;
        RegionBoundaries r;
        r.t_a = params.blanking;
        r.t_b = std::max(r.t_a, t0 - a_ub / ramp);
        r.t_d = std::max(r.t_b, t0 + a_ub / ramp);
        return r;
    }

    /// Interference-free delay from the threshold crossing to the output edge.
    double ideal_delay(double ramp, double r_sense) const {
        return std::sqrt(2.0 * params.charge_threshold(r_sense) / ramp) + params.t_d;
    }

    /// Earliest and latest trigger under interference of amplitude a_ub: the
    /// ideal trigger shifted by a_ub / ramp either way.
    std::pair<double, double> trigger_envelope(double ramp, double i_start, double command,
                                               double a_ub, double r_sense) const {
        const double ideal = (command - i_start) / ramp + ideal_delay(ramp, r_sense);
        return {ideal - a_ub / ramp, ideal + a_ub / ramp};
    }
};

/// Trigger instant of one cycle under the comparator model; the same code path
/// the simulator uses.
inline TriggerResult overdrive_trigger_time(const CycleContext& ctx, const OverdriveDelay& od) {
    validate(ConditioningMethod{od});
    return detail::overdrive_trigger(ctx, od);
}

/// Smallest charge threshold (A*s) for global asymptotic stability:
/// 4 A^2 / m + B.
inline double stability_bound(double m, const InterferenceSpec& interference) {
    detail::require(m > 0.0, "m1 must be positive");
    validate(interference);
    const double a = interference.a_ub;
    return 4.0 * a * a / m + b_functional(interference);
}

/// Longest overdrive delay for a charge threshold q (A*s):
/// A/m + sqrt((A/m)^2 + (2/m)(q + B)).
inline double max_overdrive_delay(double m, const InterferenceSpec& interference, double q) {
    detail::require(m > 0.0, "m1 must be positive");
    detail::require(q >= 0.0 && std::isfinite(q), "charge threshold must be non-negative");
    validate(interference);
    const double s = interference.a_ub / m;
    return s + std::sqrt(s * s + 2.0 / m * (q + b_functional(interference)));
}

struct PsiRange {
    double psi_min = 0.0;
    double psi_max = 0.0;
    PoleRange poles;
    bool small_signal_stable = false;
};

/// Bounds on the interference feedback psi and the resulting pole interval,
/// a = psi / (m + psi).
inline PsiRange psi_and_pole_range(double m, double a_hat, double omega_hat, double tau_hat) {
    using detail::require;
    require(m > 0.0, "m1 must be positive");
    require(a_hat >= 0.0 && omega_hat > 0.0 && tau_hat > 0.0,
            "a_hat must be non-negative, omega_hat and tau_hat positive");
    PsiRange out;
    if (a_hat == 0.0) {
        out.poles = make_pole_range(0.0, 0.0);
        out.small_signal_stable = true;
        return out;
    }
    const double excess = tau_hat - a_hat / omega_hat;
    if (!(excess > 0.0))
        throw InfeasibleError("insufficient overdrive: tau_hat must exceed a_hat / omega_hat");
    const double root = std::sqrt(1.0 + excess / (a_hat * a_hat));
    out.psi_min = -2.0 * m / (1.0 + root);
    out.psi_max = 2.0 * m / (root - 1.0);
    out.poles = make_pole_range(out.psi_min / (m + out.psi_min), out.psi_max / (m + out.psi_max));
    out.small_signal_stable = out.poles.stable();
    return out;
}

/// Physical start current whose trigger lands on the steady-state interval,
/// with the interference of cycle 0 held every cycle.
inline double overdrive_orbit_start(const ConverterConfig& config, const ModulationScheme& scheme,
                                    const InterferenceSpec& interference,
                                    const OverdriveDelay& od, double i_command) {
    const ControlFrame frame = make_frame(config, scheme);
    const CycleWaveform w = cycle_waveform(interference, 0, frame.sign);
    const double c = frame.sign * i_command;
    const double base = frame.base_interval;
    auto trigger_at = [&](double x) {
        auto ctx = detail::make_context(frame, config, od, x, c, w, 0.0, 256);
        ctx.t_min = 0.0;
        ctx.t_cap = 20.0 * base;
        ctx.cap_is_duty_limit = true;
        return find_trigger(ctx, od).t;
    };
    // a larger start current raises the integrand everywhere, so the trigger
    // moves earlier: bisection on a monotone map
    const double ripple = frame.rise * base;
    double hi = c + interference.a_ub;
    double lo = c - 2.0 * ripple;
    for (int i = 0; i < 60 && trigger_at(hi) > base; ++i) hi += ripple;
    for (int i = 0; i < 60 && trigger_at(lo) < base; ++i) lo -= 2.0 * ripple * (i + 1);
    const double tol = 1e-14 * std::max(std::abs(c), ripple);
    for (int i = 0; i < 200 && hi - lo > tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        (trigger_at(mid) > base ? lo : hi) = mid;
    }
    return frame.sign * 0.5 * (lo + hi);
}

/// psi from a central secant of the trigger map around the periodic orbit:
/// the trigger moves by dt when the start current moves by dx, and
/// psi = -dx / dt - m.
inline double numeric_psi(const ConverterConfig& config, const ModulationScheme& scheme,
                          const InterferenceSpec& interference, const OverdriveDelay& od,
                          double i_command, double rel_step = 1e-6) {
    const ControlFrame frame = make_frame(config, scheme);
    const CycleWaveform w = cycle_waveform(interference, 0, frame.sign);
    const double c = frame.sign * i_command;
    const double x =
        frame.sign * overdrive_orbit_start(config, scheme, interference, od, i_command);
    const double dx = rel_step * frame.rise * frame.base_interval;
    auto trigger_at = [&](double xs) {
        auto ctx = detail::make_context(frame, config, od, xs, c, w, 0.0, 256);
        ctx.t_min = 0.0;
        ctx.cap_is_duty_limit = true;
        ctx.t_cap = 20.0 * frame.base_interval;
        return find_trigger(ctx, od).t;
    };
    const double dt = trigger_at(x + dx) - trigger_at(x - dx);
    return -2.0 * dx / dt - frame.rise;
}

/// Least-squares fit of t_od = p1 / v_od + p2 to datasheet points
/// (overdrive volts, delay seconds). Returns (p1 in V*s, p2 in s).
inline std::pair<double, double> fit_datasheet_delay(
    std::span<const std::pair<double, double>> samples) {
    using detail::require;
    require(samples.size() >= 2, "need at least two datasheet points");
    Eigen::MatrixXd a(samples.size(), 2);
    Eigen::VectorXd y(samples.size());
    double scale = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto [v, t] = samples[i];
        require(std::isfinite(v) && v > 0.0, "overdrive must be positive");
        require(std::isfinite(t), "delay must be finite");
        a(i, 0) = 1.0 / v;
        a(i, 1) = 1.0;
        y(i) = t;
        scale = std::max(scale, 1.0 / v);
    }
    // equilibrate the columns so the rank test is scale-free
    a.col(0) /= scale;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < 2) throw ValidationError("rank-deficient datasheet data: overdrives must differ");
    const Eigen::VectorXd p = qr.solve(y);
    return {p(0) / scale, p(1)};
}

enum class Certificate { yes, no, not_evaluable };

inline std::string to_string(Certificate c) {
    switch (c) {
        case Certificate::yes: return "true";
        case Certificate::no: return "false";
        case Certificate::not_evaluable: return "not-evaluable";
    }
    return "unknown";
}

struct OverdriveDesignReport {
    Certificate continuous_certified = Certificate::not_evaluable;
    bool gas_stable = false;
    double charge_threshold = 0.0;  ///< chosen Q, A*s
    double stability_bound = 0.0;   ///< Q at the stability boundary, A*s
    double tau_c = 0.0;
    double t_od_max = 0.0;
    double t_on_min = 0.0;
    double tau_hat = 0.0;
    double a_hat = 0.0;
    double omega_hat = 0.0;
    /// Empty when tau_hat does not exceed a_hat / omega_hat.
    std::optional<PsiRange> psi_range;
    double n_w = std::numeric_limits<double>::infinity();
    double o_w = std::numeric_limits<double>::infinity();
    OverdriveDelay method;
};

/// Sizes tau_c at the stability boundary plus `margin` and sets the minimum
/// on-time to the longest overdrive delay.
inline OverdriveDesignReport size_for_speed(const ConverterConfig& config,
                                            const ModulationScheme& scheme,
                                            const InterferenceSpec& interference, double v_trig,
                                            double margin = 0.05, double t_d = 0.0) {
    using detail::require;
    require(v_trig > 0.0 && std::isfinite(v_trig), "v_trig must be positive");
    require(margin >= 0.0 && std::isfinite(margin), "margin must be non-negative");
    require(t_d >= 0.0 && std::isfinite(t_d), "t_d must be non-negative");
    if (std::holds_alternative<FixedFrequency>(scheme.variant))
        throw ScopeError("out of theorem scope: comparator sizing covers constant on/off-time");
    const ControlFrame frame = make_frame(config, scheme);
    const double m = frame.rise;
    const double t = frame.base_interval;

    OverdriveDesignReport rep;
    rep.stability_bound = stability_bound(m, interference);
    rep.charge_threshold = (1.0 + margin) * rep.stability_bound;
    rep.tau_c = rep.charge_threshold * config.r_sense / v_trig;
    rep.gas_stable = true;
    rep.t_od_max = max_overdrive_delay(m, interference, rep.charge_threshold);
    rep.t_on_min = rep.t_od_max;
    rep.tau_hat = rep.charge_threshold / (0.5 * m * t * t);
    rep.a_hat = interference.a_ub / (m * t);
    rep.omega_hat = interference.omega_l * t / (2.0 * std::numbers::pi);
    rep.method = OverdriveDelay{rep.tau_c, v_trig, t_d, 0.0};
    if (!(rep.t_on_min < t))
        throw InfeasibleError("infeasible: required t_on_min " + std::to_string(rep.t_on_min) +
                              " s is not shorter than the steady-state interval " +
                              std::to_string(t) + " s");
    if (rep.tau_c == 0.0) {
        rep.psi_range = PsiRange{0.0, 0.0, make_pole_range(0.0, 0.0), true};
    } else if (rep.tau_hat > rep.a_hat / rep.omega_hat) {
        rep.psi_range = psi_and_pole_range(m, rep.a_hat, rep.omega_hat, rep.tau_hat);
    }
    if (rep.psi_range && rep.psi_range->small_signal_stable) {
        rep.n_w = settling_cycles(rep.psi_range->poles);
        rep.o_w = overshoot(rep.psi_range->poles);
    }
    return rep;
}

/// Normalized comparator time constant that puts the longest overdrive delay
/// at the steady-state interval: tau_hat < 1 - 2 a_hat - a_hat / (pi omega_hat)
/// keeps t_od_max < T.
inline double max_feasible_tau_hat(double a_hat, double omega_hat) {
    return 1.0 - 2.0 * a_hat - a_hat / (std::numbers::pi * omega_hat);
}

/// Stability boundary in normalized units: 8 a^2 + a / (pi omega).
inline double min_stable_tau_hat(double a_hat, double omega_hat) {
    return 8.0 * a_hat * a_hat + a_hat / (std::numbers::pi * omega_hat);
}

}  // namespace ccm
