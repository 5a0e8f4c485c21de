#pragma once

#include "ccm/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace ccm {

/// Closed-loop pole interval [a_min, a_max] on the real axis.
struct PoleRange {
    double a_min = 0.0;
    double a_max = 0.0;

    bool stable() const { return std::abs(a_min) < 1.0 && std::abs(a_max) < 1.0; }
};

inline PoleRange make_pole_range(double a_min, double a_max) {
    detail::require(std::isfinite(a_min) && std::isfinite(a_max), "pole range must be finite");
    detail::require(a_min <= a_max, "a_min must not exceed a_max");
    return {a_min, a_max};
}

/// Worst-case settling N_w (cycles) and overshoot O_w (fraction).
struct TransientMetrics {
    double n_w = 0.0;
    double o_w = 0.0;
};

/// Settling of a geometric error a^n to e^-4: 4 / |ln|a||, zero for a = 0.
inline double settling_of_pole(double a) {
    if (!(std::abs(a) < 1.0)) throw UnstableError("unstable: settling undefined for |a| >= 1");
    if (a == 0.0) return 0.0;
    return std::abs(4.0 / std::log(std::abs(a)));
}

inline double settling_cycles(const PoleRange& range) {
    return std::max(settling_of_pole(range.a_min), settling_of_pole(range.a_max));
}

inline double overshoot(const PoleRange& range) { return std::max(0.0, -range.a_min); }

inline TransientMetrics transient_metrics(const PoleRange& range) {
    return {settling_cycles(range), overshoot(range)};
}

/// Settling band of the 4-time-constant convention.
inline const double kSettlingBand = std::exp(-4.0);

/// Step-response measurement on a per-cycle sequence.
struct MeasuredTransient {
    int n_settle = 0;            ///< cycles until the error stays inside the band
    double n_settle_fractional = 0.0;  ///< log-interpolated crossing of the band
    double overshoot = 0.0;      ///< largest excursion beyond the final value, over the step
    bool saturated = false;      ///< never settled within the trace
};

/// Measures the response to a command step. `samples[step_index]` is the first
/// sample produced under the new command; the sample before it (or `initial`)
/// is the pre-step level. A deadbeat response settles in one cycle.
inline MeasuredTransient measure_transient(std::span<const double> samples,
                                           std::size_t step_index,
                                           double band = kSettlingBand,
                                           std::optional<double> final_value = std::nullopt,
                                           std::optional<double> initial = std::nullopt) {
    using detail::require;
    require(step_index < samples.size(), "step_index must lie inside the trace");
    require(step_index > 0 || initial.has_value(), "pre-step level unknown");
    require(band > 0.0 && band < 1.0, "band must lie in (0, 1)");
    const double before = initial ? *initial : samples[step_index - 1];
    const double after = final_value ? *final_value : samples.back();
    const double step = after - before;
    require(step != 0.0, "trace contains no step");

    // err[k] is the remaining fraction of the step after k cycles; err[0] = 1
    // before the step, and a negative value is an excursion past the final value.
    std::vector<double> err;
    err.reserve(samples.size() - step_index + 1);
    err.push_back(1.0);
    for (std::size_t i = step_index; i < samples.size(); ++i)
        err.push_back((after - samples[i]) / step);

    MeasuredTransient out;
    for (std::size_t k = 1; k < err.size(); ++k)
        out.overshoot = std::max(out.overshoot, -err[k]);

    std::size_t last_out = 0;  // last k with |err| > band
    for (std::size_t k = 0; k < err.size(); ++k)
        if (std::abs(err[k]) > band) last_out = k;

    if (last_out + 1 >= err.size()) {
        out.saturated = true;
        out.n_settle = static_cast<int>(err.size() - 1);
        out.n_settle_fractional = static_cast<double>(err.size() - 1);
        return out;
    }
    out.n_settle = static_cast<int>(std::max<std::size_t>(last_out + 1, 1));
    const double hi = std::log(std::abs(err[last_out]));
    const double next = std::abs(err[last_out + 1]);
    if (next == 0.0) {
        out.n_settle_fractional = static_cast<double>(last_out);
    } else {
        const double lo = std::log(next);
        out.n_settle_fractional = last_out + (hi - std::log(band)) / (hi - lo);
    }
    return out;
}

// ============================================================================
// Discrete transfer functions
// ============================================================================

/// H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
struct DiscreteTF {
    std::vector<double> num;  ///< coefficients of z^0, z^-1, ...
    std::vector<double> den;  ///< den[0] == 1
    double sample_period = 1.0;
};

inline DiscreteTF make_tf(std::vector<double> num, std::vector<double> den,
                          double sample_period = 1.0) {
    using detail::require;
    require(!num.empty() && num.size() <= 3, "numerator order must be at most 2");
    require(!den.empty() && den.size() <= 3, "denominator order must be at most 2");
    require(den[0] != 0.0, "denominator leading coefficient must be nonzero");
    const double lead = den[0];
    for (double& v : num) v /= lead;
    for (double& v : den) v /= lead;
    for (double v : num) require(std::isfinite(v), "numerator must be finite");
    for (double v : den) require(std::isfinite(v), "denominator must be finite");
    return {std::move(num), std::move(den), sample_period};
}

/// Roots in z of the denominator.
inline std::vector<std::complex<double>> poles(const DiscreteTF& tf) {
    std::vector<double> d = tf.den;
    while (d.size() > 1 && d.back() == 0.0) d.pop_back();
    if (d.size() == 1) return {};
    if (d.size() == 2) return {std::complex<double>(-d[1], 0.0)};
    // z^2 + a1 z + a2
    const std::complex<double> disc = std::sqrt(std::complex<double>(d[1] * d[1] - 4.0 * d[2], 0.0));
    return {(-d[1] + disc) / 2.0, (-d[1] - disc) / 2.0};
}

inline double dc_gain(const DiscreteTF& tf) {
    double n = 0.0, d = 0.0;
    for (double v : tf.num) n += v;
    for (double v : tf.den) d += v;
    return n / d;
}

/// Unit-step response by direct recursion, samples k = 0 .. count-1.
inline std::vector<double> step_response(const DiscreteTF& tf, std::size_t count) {
    std::vector<double> y(count, 0.0);
    for (std::size_t k = 0; k < count; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < tf.num.size() && i <= k; ++i) acc += tf.num[i];
        for (std::size_t i = 1; i < tf.den.size() && i <= k; ++i) acc -= tf.den[i] * y[k - i];
        y[k] = acc;
    }
    return y;
}

/// Unit-step response from the partial-fraction expansion of H(z)/(1 - z^-1).
/// Distinct poles only.
inline std::vector<double> step_response_closed_form(const DiscreteTF& tf, std::size_t count) {
    using cd = std::complex<double>;
    // Denominator of the step response in x = z^-1: den(x) * (1 - x).
    std::vector<double> q(tf.den.size() + 1, 0.0);
    for (std::size_t i = 0; i < tf.den.size(); ++i) {
        q[i] += tf.den[i];
        q[i + 1] -= tf.den[i];
    }
    while (q.size() > 1 && q.back() == 0.0) q.pop_back();

    // Polynomial division num = fir * q + rem in powers of x.
    std::vector<double> rem = tf.num;
    std::vector<double> fir;
    const std::size_t qdeg = q.size() - 1;
    if (rem.size() > qdeg) {
        fir.assign(rem.size() - qdeg, 0.0);
        for (std::size_t k = rem.size(); k-- > qdeg;) {
            const double c = rem[k] / q[qdeg];
            fir[k - qdeg] = c;
            for (std::size_t j = 0; j <= qdeg; ++j) rem[k - qdeg + j] -= c * q[j];
        }
        rem.resize(qdeg);
    }

    std::vector<cd> ps = poles(tf);
    ps.emplace_back(1.0, 0.0);
    std::vector<cd> nonzero;
    for (const cd& p : ps)
        if (std::abs(p) > 0.0) nonzero.push_back(p);
    for (std::size_t i = 0; i < nonzero.size(); ++i)
        for (std::size_t j = i + 1; j < nonzero.size(); ++j)
            if (std::abs(nonzero[i] - nonzero[j]) < 1e-9)
                throw std::domain_error("closed-form step response needs distinct poles");

    std::vector<cd> residues;
    for (std::size_t i = 0; i < nonzero.size(); ++i) {
        const cd x = 1.0 / nonzero[i];
        cd r = 0.0;
        for (std::size_t k = rem.size(); k-- > 0;) r = r * x + rem[k];
        for (std::size_t j = 0; j < nonzero.size(); ++j)
            if (j != i) r /= (1.0 - nonzero[j] / nonzero[i]);
        residues.push_back(r);
    }

    std::vector<double> y(count, 0.0);
    for (std::size_t k = 0; k < count; ++k) {
        cd acc = k < fir.size() ? fir[k] : 0.0;
        for (std::size_t i = 0; i < nonzero.size(); ++i)
            acc += residues[i] * std::pow(nonzero[i], static_cast<double>(k));
        y[k] = acc.real();
    }
    return y;
}

}  // namespace ccm
