#pragma once

#include "ccm/core.hpp"
#include "ccm/metrics.hpp"

#include <cmath>

namespace ccm {

// Small-signal plant models for designing an outer voltage loop around the
// current loop. `lambda` is the load/duty parameter of the underlying
// sampled-data model; it has no default.

/// Coefficients shared by the buck models.
struct BuckPlantParams {
    double m_ratio = 0.0;  ///< m1 / m2
    double tau1_hat = 0.0; ///< R C / T_on
    double tau2_hat = 0.0; ///< (L / R) / T_on
};

inline double steady_on_time(const ConverterConfig& c, const ModulationScheme& s) {
    if (const auto* cot = std::get_if<ConstantOnTime>(&s.variant)) return cot->t_on;
    if (const auto* cft = std::get_if<ConstantOffTime>(&s.variant)) return c.m2 * cft->t_off / c.m1;
    const auto& ff = std::get<FixedFrequency>(s.variant);
    return c.m2 * ff.t_s / (c.m1 + c.m2);
}

inline double steady_period(const ConverterConfig& c, const ModulationScheme& s) {
    if (const auto* ff = std::get_if<FixedFrequency>(&s.variant)) return ff->t_s;
    return steady_on_time(c, s) * (c.m1 + c.m2) / c.m2;
}

inline BuckPlantParams buck_plant_params(const ConverterConfig& c, const ModulationScheme& s) {
    validate(c);
    make_frame(c, s);
    const double t_on = steady_on_time(c, s);
    return {c.m1 / c.m2, c.r_load * c.capacitance / t_on, c.inductance / c.r_load / t_on};
}

/// Off-time response to the valley command with a time-varying ramp:
/// g (1 - b1 z^-1 - b2 z^-2) / (1 - a1 z^-1), g = L / V_out.
struct AppendixACoefficients {
    double a1, b1, b2, g;
};

inline AppendixACoefficients appendix_a_coefficients(const BuckPlantParams& p, double lambda,
                                                     double g) {
    detail::require(p.m_ratio > 0.0 && p.tau1_hat > 0.0 && p.tau2_hat > 0.0,
                    "plant parameters must be positive");
    const double k = 1.0 + p.m_ratio;
    const double i1 = 1.0 / p.tau1_hat;
    const double i12 = i1 / p.tau2_hat;
    AppendixACoefficients out{};
    out.a1 = 1.0 - k * i1 - k / 2.0 * i12;
    out.b1 = 2.0 - k * i1 - (k * k / 2.0 + k * lambda) * i12;
    out.b2 = -1.0 + k * i1 - (k * k / 2.0 - k * lambda) * i12;
    out.g = g;
    return out;
}

inline DiscreteTF appendix_a_tf(const ConverterConfig& c, const ModulationScheme& s,
                                double lambda) {
    const auto k = appendix_a_coefficients(buck_plant_params(c, s), lambda,
                                           c.inductance / c.v_out);
    return make_tf({k.g, -k.g * k.b1, -k.g * k.b2}, {1.0, -k.a1}, steady_period(c, s));
}

/// Output voltage response to the valley command:
/// g (1 - b1 z^-1) z^-1 / (1 - a1 z^-1).
struct AppendixBCoefficients {
    double a1, b1, g;
};

inline AppendixBCoefficients appendix_b_coefficients(const BuckPlantParams& p, double lambda,
                                                     double r_load) {
    detail::require(p.m_ratio > 0.0 && p.tau1_hat > 0.0 && p.tau2_hat > 0.0,
                    "plant parameters must be positive");
    detail::require(lambda + p.m_ratio / 2.0 != 0.0, "lambda + m_ratio/2 must be nonzero");
    const double k = 1.0 + p.m_ratio;
    const double i1 = 1.0 / p.tau1_hat;
    AppendixBCoefficients out{};
    out.a1 = 1.0 - k * i1 - k / 2.0 * i1 / p.tau2_hat;
    out.g = r_load * (lambda + p.m_ratio / 2.0) * i1;
    out.b1 = -(1.0 - lambda + p.m_ratio / 2.0) / (lambda + p.m_ratio / 2.0);
    return out;
}

inline DiscreteTF appendix_b_plant(const ConverterConfig& c, const ModulationScheme& s,
                                   double lambda) {
    const auto k = appendix_b_coefficients(buck_plant_params(c, s), lambda, c.r_load);
    return make_tf({0.0, k.g, -k.g * k.b1}, {1.0, -k.a1}, steady_period(c, s));
}

/// Boost converter under fixed-frequency peak control, tau hats over T_s.
struct BoostPlantParams {
    double m_ratio = 0.0;
    double tau1_hat = 0.0;
    double tau2_hat = 0.0;
    double r_load = 1.0;
    double t_s = 1.0;
};

struct AppendixCCoefficients {
    double a1, b1, g;
};

inline AppendixCCoefficients appendix_c_coefficients(const BoostPlantParams& p) {
    detail::require(p.m_ratio > 0.0 && p.tau1_hat > 0.0 && p.tau2_hat > 0.0 && p.r_load > 0.0,
                    "plant parameters must be positive");
    const double m = p.m_ratio;
    const double k = m + 1.0;
    const double i1 = 1.0 / p.tau1_hat;
    AppendixCCoefficients out{};
    out.g = p.r_load * (-p.tau2_hat * i1 + (2.0 * m + 1.0) / (2.0 * k * k) * i1);
    out.a1 = 1.0 - (2.0 * m + 1.0) / k * i1 - (2.0 * m + 1.0) / (k * k * k) * i1 / p.tau2_hat;
    out.b1 = (2.0 * k * k * p.tau2_hat + (2.0 * m * m + 4.0 * m + 1.0)) /
             (2.0 * k * k * p.tau2_hat + (2.0 * m + 1.0));
    return out;
}

inline DiscreteTF appendix_c_boost_tf(const BoostPlantParams& p) {
    const auto k = appendix_c_coefficients(p);
    return make_tf({0.0, k.g, -k.g * k.b1}, {1.0, -k.a1}, p.t_s);
}

}  // namespace ccm
