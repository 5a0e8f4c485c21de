#pragma once

#include "ccm/core.hpp"
#include "ccm/interference.hpp"
#include "ccm/metrics.hpp"
#include "ccm/normalize.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace ccm {

// Slope compensation adds m_s * t to the sensed current. In the frame of the
// comparator-terminated interval the ramp is `m` (m1 for peak control, m2 for
// valley control).

/// The sensed ramp (m + m_s) t + w(t) is certified strictly increasing.
inline bool continuity_check(double m, double m_s, const InterferenceSpec& interference) {
    detail::require(m > 0.0, "m1 must be positive");
    detail::require(m_s >= 0.0, "m_s must be non-negative");
    return m + m_s > lipschitz_bound(interference);
}

/// Global asymptotic stability: lambda_ub < m/2 + m_s (strict).
inline bool stability_check(double m, double m_s, const InterferenceSpec& interference) {
    if (!continuity_check(m, m_s, interference))
        throw ValidationError("stability needs a continuous static mapping: m1 + m_s <= lambda_ub");
    return lipschitz_bound(interference) < m / 2.0 + m_s;
}

/// Pole interval of the linearized loop. `fall_feedback` is m2 under
/// fixed-frequency peak control (zero for constant on/off-time).
inline PoleRange pole_range(double m, double m_s, double lambda_ub, double fall_feedback = 0.0) {
    detail::require(m > 0.0 && m_s >= 0.0 && lambda_ub >= 0.0,
                    "slopes must be positive and lambda_ub non-negative");
    const double lo_den = m + m_s - lambda_ub;
    detail::require(lo_den > 0.0, "degenerate pole range: m1 + m_s must exceed lambda_ub");
    return make_pole_range((m_s - lambda_ub - fall_feedback) / lo_den,
                           (m_s + lambda_ub - fall_feedback) / (m + m_s + lambda_ub));
}

inline PoleRange pole_range_normalized(double m_s_hat, double lambda_hat) {
    return pole_range(1.0, m_s_hat, lambda_hat);
}

/// Normalized slope that balances a_min = -a_max.
inline double optimal_slope(double lambda_hat) {
    detail::require(lambda_hat >= 0.0, "lambda_hat must be non-negative");
    return std::sqrt(0.25 + lambda_hat * lambda_hat) - 0.5;
}

/// Worst-case settling at the optimal slope, from the pole range.
inline double n_w_star(double lambda_hat) {
    return settling_cycles(pole_range_normalized(optimal_slope(lambda_hat), lambda_hat));
}

/// The closed-form expression 4 / |ln|1 - (1 + sqrt(1/4 + L^2) + L)^-1||, kept
/// alongside n_w_star because the two do not agree.
inline double n_w_star_closed_form(double lambda_hat) {
    detail::require(lambda_hat >= 0.0, "lambda_hat must be non-negative");
    const double inner = 1.0 - 1.0 / (1.0 + std::sqrt(0.25 + lambda_hat * lambda_hat) + lambda_hat);
    return std::abs(4.0 / std::log(std::abs(inner)));
}

/// Plant from controlled-interval length to the extremum current.
inline DiscreteTF plant_tf(const ConverterConfig& config, const ModulationScheme& scheme) {
    if (std::holds_alternative<ConstantOffTime>(scheme.variant))
        return make_tf({1.0 / config.m1, -1.0 / config.m1}, {1.0});
    if (std::holds_alternative<ConstantOnTime>(scheme.variant))
        return make_tf({-1.0 / config.m2, 1.0 / config.m2}, {1.0});
    const auto& ff = std::get<FixedFrequency>(scheme.variant);
    if (ff.extremum == Extremum::peak)
        return make_tf({1.0, -1.0}, {config.m1, config.m2}, ff.t_s);
    return make_tf({-1.0, 1.0}, {config.m2, config.m1}, ff.t_s);
}

struct SlopeDesignReport {
    double m_s = 0.0;
    bool continuous = false;
    bool gas_stable = false;
    std::optional<PoleRange> pole_range;
    double n_w = std::numeric_limits<double>::infinity();
    double o_w = std::numeric_limits<double>::infinity();
    double m_s_star = 0.0;
    double n_w_star = 0.0;              ///< composed from the pole range
    double n_w_star_closed_form = 0.0;  ///< the closed-form expression, reported alongside
};

inline SlopeDesignReport design_slope(const ConverterConfig& config,
                                      const ModulationScheme& scheme,
                                      const InterferenceSpec& interference, double m_s) {
    validate(interference);
    const ControlFrame frame = make_frame(config, scheme);
    const double m = frame.rise;
    const double fall_feedback = frame.period ? frame.fall : 0.0;
    const double lambda_hat = interference.lambda_ub / m;

    SlopeDesignReport rep;
    rep.m_s = m_s;
    rep.continuous = continuity_check(m, m_s, interference);
    rep.gas_stable = rep.continuous && stability_check(m, m_s, interference);
    if (rep.continuous) {
        rep.pole_range = pole_range(m, m_s, interference.lambda_ub, fall_feedback);
        if (rep.pole_range->stable()) {
            rep.n_w = settling_cycles(*rep.pole_range);
            rep.o_w = overshoot(*rep.pole_range);
        }
    }
    rep.m_s_star = optimal_slope(lambda_hat) * m;
    rep.n_w_star = n_w_star(lambda_hat);
    rep.n_w_star_closed_form = n_w_star_closed_form(lambda_hat);
    return rep;
}

struct SlopeSweepRow {
    double m_s_hat = 0.0;
    double n_w = 0.0;
    double o_w = 0.0;
    bool stable = false;
};

/// Transient metrics across normalized slopes; rows outside the unit circle
/// carry infinite settling.
inline std::vector<SlopeSweepRow> slope_sweep(double lambda_hat, const std::vector<double>& grid) {
    std::vector<SlopeSweepRow> rows;
    rows.reserve(grid.size());
    for (double m_s_hat : grid) {
        SlopeSweepRow row{m_s_hat, std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity(), false};
        if (1.0 + m_s_hat > lambda_hat) {
            const PoleRange r = pole_range_normalized(m_s_hat, lambda_hat);
            if (r.stable()) {
                row.n_w = settling_cycles(r);
                row.o_w = overshoot(r);
                row.stable = true;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace ccm
