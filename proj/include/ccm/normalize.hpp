#pragma once

#include "ccm/core.hpp"
#include "ccm/interference.hpp"

#include <cmath>
#include <numbers>
#include <optional>

namespace ccm {

/// Dimensionless design quantities. The base time T is the steady-state length
/// of the comparator-terminated interval and the base slope m is its ramp, so
/// under constant on-time control m1 and T_on are replaced by m2 and T_off.
/// Entries that do not apply are empty rather than zero.
struct NormalizedQuantities {
    std::optional<double> m_s_hat;       ///< m_s / m
    std::optional<double> lambda_hat;    ///< lambda_ub / m
    std::optional<double> tau_hat;       ///< tau / T (filter) or tau_c / tau_b (comparator)
    std::optional<double> a_hat;         ///< a_ub / (m T)
    std::optional<double> omega_hat;     ///< omega_l T / (2 pi)
    std::optional<double> t_on_min_hat;  ///< t_on_min / T
};

/// Physical values recovered from normalized ones.
struct PhysicalQuantities {
    std::optional<double> m_s;
    std::optional<double> lambda_ub;
    std::optional<double> tau;    ///< filter time constant
    std::optional<double> tau_c;  ///< comparator C_eff / G
    std::optional<double> a_ub;
    std::optional<double> omega_l;
    std::optional<double> t_on_min;
};

/// Comparator base time constant r_sense * m * T^2 / (2 v_trig).
inline double comparator_base_tau(double r_sense, double ramp, double base_time, double v_trig) {
    return r_sense * ramp * base_time * base_time / (2.0 * v_trig);
}

inline NormalizedQuantities normalize(const ConverterConfig& config,
                                      const ModulationScheme& scheme,
                                      const InterferenceSpec& interference,
                                      const ConditioningMethod& method) {
    validate(method);
    validate(interference);
    const ControlFrame frame = make_frame(config, scheme);
    const double m = frame.rise;
    const double t = frame.base_interval;

    NormalizedQuantities hat;
    hat.lambda_hat = interference.lambda_ub / m;
    hat.a_hat = interference.a_ub / (m * t);
    if (std::isfinite(interference.omega_l))
        hat.omega_hat = interference.omega_l * t / (2.0 * std::numbers::pi);
    hat.t_on_min_hat = scheme.t_on_min / t;

    if (const auto* s = std::get_if<SlopeComp>(&method)) {
        hat.m_s_hat = s->m_s / m;
    } else if (const auto* f = std::get_if<LowPassFilter>(&method)) {
        hat.tau_hat = f->tau / t;
    } else {
        const auto& o = std::get<OverdriveDelay>(method);
        hat.tau_hat = o.tau_c / comparator_base_tau(config.r_sense, m, t, o.v_trig);
    }
    return hat;
}

/// Inverse of normalize. The method selects how tau_hat is read; for the
/// comparator its v_trig is used.
inline PhysicalQuantities denormalize(const NormalizedQuantities& hat,
                                      const ConverterConfig& config,
                                      const ModulationScheme& scheme,
                                      const ConditioningMethod& method) {
    const ControlFrame frame = make_frame(config, scheme);
    const double m = frame.rise;
    const double t = frame.base_interval;

    PhysicalQuantities out;
    if (hat.m_s_hat) out.m_s = *hat.m_s_hat * m;
    if (hat.lambda_hat) out.lambda_ub = *hat.lambda_hat * m;
    if (hat.a_hat) out.a_ub = *hat.a_hat * m * t;
    if (hat.omega_hat) out.omega_l = *hat.omega_hat * 2.0 * std::numbers::pi / t;
    if (hat.t_on_min_hat) out.t_on_min = *hat.t_on_min_hat * t;
    if (hat.tau_hat) {
        if (std::holds_alternative<LowPassFilter>(method)) {
            out.tau = *hat.tau_hat * t;
        } else if (const auto* o = std::get_if<OverdriveDelay>(&method)) {
            out.tau_c = *hat.tau_hat * comparator_base_tau(config.r_sense, m, t, o->v_trig);
        }
    }
    return out;
}

}  // namespace ccm
