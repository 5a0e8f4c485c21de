#pragma once

#include "ccm/errors.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>

namespace ccm {

// ============================================================================
// Converter
// ============================================================================

/// Buck power stage. All currents are amperes, slopes A/s.
struct ConverterConfig {
    double v_in = 0.0;
    double v_out = 0.0;
    double inductance = 0.0;
    double capacitance = 0.0;
    double r_load = 0.0;
    double r_sense = 0.0;
    double m1 = 0.0;  ///< inductor current slope while the high-side switch is on
    double m2 = 0.0;  ///< slope magnitude while it is off

    double load_current() const { return v_out / r_load; }
};

inline ConverterConfig make_buck_config(double v_in, double v_out, double inductance,
                                        double capacitance, double r_load, double r_sense) {
    using detail::require;
    require(std::isfinite(v_in) && v_in > 0.0, "v_in must be positive");
    require(std::isfinite(v_out) && v_out > 0.0, "v_out must be positive");
    require(v_in > v_out, "v_in must exceed v_out");
    require(std::isfinite(inductance) && inductance > 0.0, "inductance must be positive");
    require(std::isfinite(capacitance) && capacitance > 0.0, "capacitance must be positive");
    require(std::isfinite(r_load) && r_load > 0.0, "r_load must be positive");
    require(std::isfinite(r_sense) && r_sense > 0.0, "r_sense must be positive");

    ConverterConfig c;
    c.v_in = v_in;
    c.v_out = v_out;
    c.inductance = inductance;
    c.capacitance = capacitance;
    c.r_load = r_load;
    c.r_sense = r_sense;
    c.m1 = (v_in - v_out) / inductance;
    c.m2 = v_out / inductance;
    return c;
}

/// A buck whose ramps are exactly (m1, m2); L, C, R and the sense resistor are 1.
/// Handy for studies in normalized units.
inline ConverterConfig make_slope_config(double m1, double m2) {
    detail::require(m1 > 0.0, "m1 must be positive");
    detail::require(m2 > 0.0, "m2 must be positive");
    return make_buck_config(m1 + m2, m2, 1.0, 1.0, 1.0, 1.0);
}

/// Checks the invariants of a config built by hand (for example from JSON).
inline void validate(const ConverterConfig& c) {
    auto rebuilt = make_buck_config(c.v_in, c.v_out, c.inductance, c.capacitance, c.r_load,
                                    c.r_sense);
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::abs(b); };
    detail::require(close(c.m1, rebuilt.m1), "m1 disagrees with (v_in - v_out)/inductance");
    detail::require(close(c.m2, rebuilt.m2), "m2 disagrees with v_out/inductance");
}

// ============================================================================
// Modulation
// ============================================================================

enum class Extremum { peak, valley };

/// On-time fixed, off-time ends at the valley comparator event.
struct ConstantOnTime {
    double t_on = 0.0;
};

/// Off-time fixed, on-time ends at the peak comparator event.
struct ConstantOffTime {
    double t_off = 0.0;
};

/// Fixed period; the comparator ends the on-time (peak) or the off-time (valley).
struct FixedFrequency {
    double t_s = 0.0;
    Extremum extremum = Extremum::peak;
    /// Largest fraction of the period the comparator-terminated interval may take.
    double max_fraction = 0.9;
};

/// `t_on_min` floors the comparator-terminated interval (the on-time under peak
/// control, the off-time under valley control). Zero disables the floor.
struct ModulationScheme {
    std::variant<ConstantOnTime, ConstantOffTime, FixedFrequency> variant;
    double t_on_min = 0.0;
};

inline Extremum extremum_of(const ModulationScheme& s) {
    if (std::holds_alternative<ConstantOnTime>(s.variant)) return Extremum::valley;
    if (std::holds_alternative<ConstantOffTime>(s.variant)) return Extremum::peak;
    return std::get<FixedFrequency>(s.variant).extremum;
}

inline std::string scheme_name(const ModulationScheme& s) {
    if (std::holds_alternative<ConstantOnTime>(s.variant)) return "constant_on_time";
    if (std::holds_alternative<ConstantOffTime>(s.variant)) return "constant_off_time";
    return std::get<FixedFrequency>(s.variant).extremum == Extremum::peak
               ? "fixed_frequency_peak"
               : "fixed_frequency_valley";
}

/// The loop seen from the comparator. Valley control is mirrored into peak control
/// by negating currents: the interval ended by the comparator always ramps up at
/// `rise`, the other one ramps down at `fall`.
struct ControlFrame {
    double rise = 0.0;
    double fall = 0.0;
    double sign = 1.0;  ///< physical current = sign * frame current
    std::optional<double> other_interval;  ///< fixed length of the other interval
    std::optional<double> period;          ///< fixed-frequency period
    double t_min = 0.0;
    double t_max = std::numeric_limits<double>::infinity();  ///< duty limit, fixed frequency only
    double base_interval = 0.0;  ///< steady-state length of the comparator-terminated interval

    double other_length(double t_ctrl) const {
        return other_interval ? *other_interval : *period - t_ctrl;
    }
    double ripple() const { return rise * base_interval; }
};

inline ControlFrame make_frame(const ConverterConfig& c, const ModulationScheme& s) {
    using detail::require;
    require(std::isfinite(s.t_on_min) && s.t_on_min >= 0.0, "t_on_min must be non-negative");
    ControlFrame f;
    f.t_min = s.t_on_min;
    if (const auto* cot = std::get_if<ConstantOnTime>(&s.variant)) {
        require(std::isfinite(cot->t_on) && cot->t_on > 0.0, "t_on must be positive");
        f.rise = c.m2;
        f.fall = c.m1;
        f.sign = -1.0;
        f.other_interval = cot->t_on;
        f.base_interval = c.m1 * cot->t_on / c.m2;
    } else if (const auto* cft = std::get_if<ConstantOffTime>(&s.variant)) {
        require(std::isfinite(cft->t_off) && cft->t_off > 0.0, "t_off must be positive");
        f.rise = c.m1;
        f.fall = c.m2;
        f.sign = 1.0;
        f.other_interval = cft->t_off;
        f.base_interval = c.m2 * cft->t_off / c.m1;
    } else {
        const auto& ff = std::get<FixedFrequency>(s.variant);
        require(std::isfinite(ff.t_s) && ff.t_s > 0.0, "t_s must be positive");
        require(ff.max_fraction > 0.0 && ff.max_fraction < 1.0,
                "max_fraction must lie in (0, 1)");
        const bool peak = ff.extremum == Extremum::peak;
        f.rise = peak ? c.m1 : c.m2;
        f.fall = peak ? c.m2 : c.m1;
        f.sign = peak ? 1.0 : -1.0;
        f.period = ff.t_s;
        f.t_max = ff.max_fraction * ff.t_s;
        f.base_interval = f.fall * ff.t_s / (f.rise + f.fall);
        require(f.base_interval < f.t_max,
                "steady-state interval exceeds max_fraction of the period");
    }
    require(f.t_min < f.base_interval, "t_on_min must be shorter than the steady-state interval");
    return f;
}

// ============================================================================
// Conditioning
// ============================================================================

/// Adds m_s * t to the sensed current. m_s = 0 is the bare comparator.
struct SlopeComp {
    double m_s = 0.0;
};

/// First-order RC ahead of the comparator.
struct LowPassFilter {
    double tau = 0.0;
};

/// Comparator modeled as an integrator clamped at zero that fires when its charge
/// reaches v_trig * tau_c; output follows after a fixed delay t_d.
struct OverdriveDelay {
    double tau_c = 0.0;  ///< C_eff / G
    double v_trig = 0.0;
    double t_d = 0.0;
    double blanking = 0.0;  ///< integrator held in reset this long after the edge

    /// Charge threshold referred to the sensed current, in A*s.
    double charge_threshold(double r_sense) const { return v_trig * tau_c / r_sense; }
};

using ConditioningMethod = std::variant<SlopeComp, LowPassFilter, OverdriveDelay>;

inline void validate(const ConditioningMethod& m) {
    using detail::require;
    if (const auto* s = std::get_if<SlopeComp>(&m)) {
        require(std::isfinite(s->m_s) && s->m_s >= 0.0, "m_s must be non-negative");
    } else if (const auto* f = std::get_if<LowPassFilter>(&m)) {
        require(std::isfinite(f->tau) && f->tau > 0.0, "tau must be positive");
    } else {
        const auto& o = std::get<OverdriveDelay>(m);
        require(std::isfinite(o.tau_c) && o.tau_c > 0.0, "tau_c must be positive");
        require(std::isfinite(o.v_trig) && o.v_trig > 0.0, "v_trig must be positive");
        require(std::isfinite(o.t_d) && o.t_d >= 0.0, "t_d must be non-negative");
        require(std::isfinite(o.blanking) && o.blanking >= 0.0, "blanking must be non-negative");
    }
}

inline std::string method_name(const ConditioningMethod& m) {
    if (std::holds_alternative<SlopeComp>(m)) return "slope";
    if (std::holds_alternative<LowPassFilter>(m)) return "filter";
    return "overdrive";
}

}  // namespace ccm
