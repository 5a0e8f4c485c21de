#pragma once

#include "ccm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <variant>
#include <vector>

namespace ccm {

// Interference is referred to the sensed current (amperes) and evaluated in
// cycle time: t = 0 is the start of the interval the comparator terminates.
//
// Fourier convention: w(t) = integral of W(omega) e^{j omega t} d omega, so a
// sinusoid A cos(omega0 t) contributes B = A / omega0 to the spectrum functional.

/// A cos(omega t + phase).
struct Sinusoid {
    double amplitude = 0.0;
    double omega = 0.0;
    double phase = 0.0;
};

/// Symmetric trapezoid between -A and +A with fundamental omega and edge slew
/// `slew` (A/s). Even about zero phase: the +A plateau is centered on theta = 0.
struct Trapezoid {
    double amplitude = 0.0;
    double omega = 0.0;
    double slew = 0.0;
    double phase = 0.0;

    /// Half the phase angle an edge spans.
    double edge_half_angle() const { return omega * amplitude / slew; }
};

/// A exp(-decay s) sin(omega s) for s = t - start_time >= 0, zero before.
struct DampedRing {
    double amplitude = 0.0;
    double omega = 0.0;
    double decay = 0.0;
    double start_time = 0.0;
};

using WaveformComponent = std::variant<Sinusoid, Trapezoid, DampedRing>;

/// A bounded interference class and, optionally, a concrete member of it.
/// Several components form a composite waveform; the bounds of a composite are
/// the sums of the component bounds.
struct InterferenceSpec {
    double a_ub = 0.0;
    double omega_l = std::numeric_limits<double>::infinity();
    double lambda_ub = 0.0;
    /// Absent when the waveform has no integrable line spectrum.
    std::optional<double> b_functional = 0.0;
    std::vector<WaveformComponent> waveform;
    /// Redraw sinusoid and trapezoid phases every cycle.
    bool random_phase = false;
    std::uint64_t seed = 0;
};

namespace detail {

inline constexpr double pi = std::numbers::pi;

inline double wrap_angle(double theta) {
    double r = std::remainder(theta, 2.0 * pi);
    return r;  // in [-pi, pi]
}

// Trapezoid shape on the unit phase circle; u = |theta| in [0, pi].
inline double trapezoid_shape(double u, double amplitude, double r) {
    const double rise_end = pi / 2.0 - r;
    const double fall_end = pi / 2.0 + r;
    if (u <= rise_end) return amplitude;
    if (u >= fall_end) return -amplitude;
    return amplitude * (pi / 2.0 - u) / r;
}

// Integral of the shape from 0 to u for u in [0, pi]. Zero at u = pi.
inline double trapezoid_primitive(double u, double amplitude, double r) {
    const double u1 = pi / 2.0 - r;
    const double u2 = pi / 2.0 + r;
    if (u <= u1) return amplitude * u;
    if (u <= u2)
        return amplitude * u1 + amplitude / r * ((pi / 2.0) * (u - u1) - 0.5 * (u * u - u1 * u1));
    return amplitude * u1 - amplitude * (u - u2);
}

inline double b_of_trapezoid(const Trapezoid& z) {
    // Odd cosine harmonics: a_k = 4A/(k pi) sin(k pi/2) sinc(k r).
    const double r = z.edge_half_angle();
    const double scale = 4.0 * z.amplitude / (pi * z.omega);
    double sum = 0.0;
    long k = 1;
    for (; k < 4'000'001; k += 2) {
        const double x = k * r;
        const double sinc = x == 0.0 ? 1.0 : std::sin(x) / x;
        sum += std::abs(sinc) / (static_cast<double>(k) * k);
        // tail beyond k is below scale * min(1/(2k), 1/(4 r k^2))
        const double tail = std::min(0.5 / k, 0.25 / (r * k * k));
        if (tail < 1e-14 * sum) break;
    }
    return scale * sum;
}

}  // namespace detail

inline double amplitude_of(const WaveformComponent& c) {
    return std::visit([](const auto& w) { return w.amplitude; }, c);
}

inline double lipschitz_of(const WaveformComponent& c) {
    if (const auto* s = std::get_if<Sinusoid>(&c)) return s->amplitude * s->omega;
    if (const auto* z = std::get_if<Trapezoid>(&c)) return z->amplitude > 0.0 ? z->slew : 0.0;
    const auto& d = std::get<DampedRing>(c);
    return d.amplitude * std::hypot(d.omega, d.decay);
}

inline void validate(const WaveformComponent& c) {
    using detail::require;
    const double a = amplitude_of(c);
    require(std::isfinite(a) && a >= 0.0, "amplitude must be non-negative");
    if (const auto* s = std::get_if<Sinusoid>(&c)) {
        require(std::isfinite(s->omega) && s->omega > 0.0, "omega must be positive");
        require(std::isfinite(s->phase), "phase must be finite");
    } else if (const auto* z = std::get_if<Trapezoid>(&c)) {
        require(std::isfinite(z->omega) && z->omega > 0.0, "omega must be positive");
        require(std::isfinite(z->slew) && z->slew > 0.0, "slew must be positive");
        require(std::isfinite(z->phase), "phase must be finite");
        require(z->edge_half_angle() <= detail::pi / 2.0 * (1.0 + 1e-12),
                "slew must be at least 2*amplitude*omega/pi for a trapezoid");
    } else {
        const auto& d = std::get<DampedRing>(c);
        require(std::isfinite(d.omega) && d.omega > 0.0, "omega must be positive");
        require(std::isfinite(d.decay) && d.decay >= 0.0, "decay must be non-negative");
        require(std::isfinite(d.start_time), "start_time must be finite");
    }
}

/// Builds an interference whose bounds are exactly those of the given waveform.
inline InterferenceSpec make_interference(std::vector<WaveformComponent> waveform,
                                          bool random_phase = false, std::uint64_t seed = 0) {
    InterferenceSpec spec;
    spec.random_phase = random_phase;
    spec.seed = seed;
    double b = 0.0;
    bool integrable = true;
    for (const auto& c : waveform) {
        validate(c);
        if (amplitude_of(c) == 0.0) continue;
        spec.a_ub += amplitude_of(c);
        spec.lambda_ub += lipschitz_of(c);
        const double omega = std::visit([](const auto& w) { return w.omega; }, c);
        spec.omega_l = std::min(spec.omega_l, omega);
        if (const auto* s = std::get_if<Sinusoid>(&c)) {
            b += s->amplitude / s->omega;
        } else if (const auto* z = std::get_if<Trapezoid>(&c)) {
            b += detail::b_of_trapezoid(*z);
        } else {
            integrable = false;
        }
    }
    spec.b_functional = integrable ? std::optional<double>(b) : std::nullopt;
    spec.waveform = std::move(waveform);
    return spec;
}

/// A class described by its bounds alone, for design calculations.
inline InterferenceSpec interference_bounds(double a_ub, double omega_l, double lambda_ub,
                                            double b_functional) {
    using detail::require;
    require(std::isfinite(a_ub) && a_ub >= 0.0, "a_ub must be non-negative");
    require(omega_l > 0.0, "omega_l must be positive");
    require(std::isfinite(lambda_ub) && lambda_ub >= 0.0, "lambda_ub must be non-negative");
    require(std::isfinite(b_functional) && b_functional >= 0.0,
            "b_functional must be non-negative");
    InterferenceSpec spec;
    spec.a_ub = a_ub;
    spec.omega_l = omega_l;
    spec.lambda_ub = lambda_ub;
    spec.b_functional = b_functional;
    return spec;
}

inline InterferenceSpec no_interference() { return InterferenceSpec{}; }

/// The class bounds of a single sinusoid of amplitude A and frequency omega.
inline InterferenceSpec sinusoid_class(double amplitude, double omega) {
    return make_interference({Sinusoid{amplitude, omega, 0.0}});
}

inline void validate(const InterferenceSpec& spec) {
    using detail::require;
    require(std::isfinite(spec.a_ub) && spec.a_ub >= 0.0, "a_ub must be non-negative");
    require(spec.omega_l > 0.0, "omega_l must be positive");
    require(std::isfinite(spec.lambda_ub) && spec.lambda_ub >= 0.0,
            "lambda_ub must be non-negative");
    require(!spec.b_functional || *spec.b_functional >= 0.0,
            "b_functional must be non-negative");
    double a = 0.0;
    double lambda = 0.0;
    for (const auto& c : spec.waveform) {
        validate(c);
        a += amplitude_of(c);
        lambda += lipschitz_of(c);
    }
    require(a <= spec.a_ub * (1.0 + 1e-12), "waveform amplitude exceeds a_ub");
    require(lambda <= spec.lambda_ub * (1.0 + 1e-12), "waveform slew exceeds lambda_ub");
}

inline double lipschitz_bound(const InterferenceSpec& spec) { return spec.lambda_ub; }

inline double b_functional(const InterferenceSpec& spec) {
    if (!spec.b_functional)
        throw SpectrumError("interference spectrum has no integrable B functional");
    return *spec.b_functional;
}

/// The waveform as seen in one cycle, with per-cycle phases drawn and an
/// optional sign flip (valley control works on negated currents).
class CycleWaveform {
public:
    CycleWaveform() = default;
    CycleWaveform(std::vector<WaveformComponent> parts, double sign)
        : parts_(std::move(parts)), sign_(sign) {}

    bool empty() const { return parts_.empty(); }
    const std::vector<WaveformComponent>& parts() const { return parts_; }

    double value(double t) const {
        double sum = 0.0;
        for (const auto& c : parts_) sum += value_of(c, t);
        return sign_ * sum;
    }

    /// Right-sided derivative.
    double slope(double t) const {
        double sum = 0.0;
        for (const auto& c : parts_) sum += slope_of(c, t);
        return sign_ * sum;
    }

    /// Integral over [t0, t1].
    double integral(double t0, double t1) const {
        double sum = 0.0;
        for (const auto& c : parts_) sum += primitive_of(c, t1) - primitive_of(c, t0);
        return sign_ * sum;
    }

    /// Output at t1 of the filter tau*y' = w - y started from y(t0) = 0.
    double filtered(double tau, double t0, double t1) const {
        double sum = 0.0;
        for (const auto& c : parts_) sum += filtered_of(c, tau, t0, t1);
        return sign_ * sum;
    }

    /// Points in (t0, t1) where the waveform slope jumps.
    void breakpoints(double t0, double t1, std::vector<double>& out) const {
        for (const auto& c : parts_) {
            if (const auto* z = std::get_if<Trapezoid>(&c)) {
                trapezoid_breaks(*z, t0, t1, out);
            } else if (const auto* d = std::get_if<DampedRing>(&c)) {
                if (d->start_time > t0 && d->start_time < t1) out.push_back(d->start_time);
            }
        }
    }

    /// Shortest period among the components, for step sizing.
    double min_period() const {
        double p = std::numeric_limits<double>::infinity();
        for (const auto& c : parts_) {
            const double omega = std::visit([](const auto& w) { return w.omega; }, c);
            p = std::min(p, 2.0 * detail::pi / omega);
        }
        return p;
    }

    /// Shortest trapezoid edge duration.
    double min_edge() const {
        double e = std::numeric_limits<double>::infinity();
        for (const auto& c : parts_)
            if (const auto* z = std::get_if<Trapezoid>(&c); z && z->amplitude > 0.0)
                e = std::min(e, 2.0 * z->amplitude / z->slew);
        return e;
    }

private:
    static double value_of(const WaveformComponent& c, double t) {
        if (const auto* s = std::get_if<Sinusoid>(&c))
            return s->amplitude * std::cos(s->omega * t + s->phase);
        if (const auto* z = std::get_if<Trapezoid>(&c)) {
            if (z->amplitude == 0.0) return 0.0;
            const double u = std::abs(detail::wrap_angle(z->omega * t + z->phase));
            return detail::trapezoid_shape(u, z->amplitude, z->edge_half_angle());
        }
        const auto& d = std::get<DampedRing>(c);
        const double s = t - d.start_time;
        if (s < 0.0) return 0.0;
        return d.amplitude * std::exp(-d.decay * s) * std::sin(d.omega * s);
    }

    static double slope_of(const WaveformComponent& c, double t) {
        if (const auto* s = std::get_if<Sinusoid>(&c))
            return -s->amplitude * s->omega * std::sin(s->omega * t + s->phase);
        if (const auto* z = std::get_if<Trapezoid>(&c)) {
            if (z->amplitude == 0.0) return 0.0;
            const double r = z->edge_half_angle();
            const double theta = detail::wrap_angle(z->omega * t + z->phase);
            const double u = std::abs(theta);
            // right-sided: moving forward in time increases theta
            const bool on_edge = theta >= 0.0 ? (u >= detail::pi / 2.0 - r && u < detail::pi / 2.0 + r)
                                              : (u > detail::pi / 2.0 - r && u <= detail::pi / 2.0 + r);
            if (!on_edge) return 0.0;
            return theta >= 0.0 ? -z->slew : z->slew;
        }
        const auto& d = std::get<DampedRing>(c);
        const double s = t - d.start_time;
        if (s < 0.0) return 0.0;
        return d.amplitude * std::exp(-d.decay * s) *
               (d.omega * std::cos(d.omega * s) - d.decay * std::sin(d.omega * s));
    }

    static double primitive_of(const WaveformComponent& c, double t) {
        if (const auto* s = std::get_if<Sinusoid>(&c))
            return s->amplitude / s->omega * std::sin(s->omega * t + s->phase);
        if (const auto* z = std::get_if<Trapezoid>(&c)) {
            if (z->amplitude == 0.0) return 0.0;
            const double theta = detail::wrap_angle(z->omega * t + z->phase);
            const double g = detail::trapezoid_primitive(std::abs(theta), z->amplitude,
                                                         z->edge_half_angle());
            return (theta >= 0.0 ? g : -g) / z->omega;
        }
        const auto& d = std::get<DampedRing>(c);
        const double s = std::max(0.0, t - d.start_time);
        const std::complex<double> lambda(-d.decay, d.omega);
        return d.amplitude * ((std::exp(lambda * s) - 1.0) / lambda).imag();
    }

    static double filtered_of(const WaveformComponent& c, double tau, double t0, double t1) {
        const double decay = std::exp(-(t1 - t0) / tau);
        if (const auto* s = std::get_if<Sinusoid>(&c)) {
            const std::complex<double> gain = 1.0 / std::complex<double>(1.0, s->omega * tau);
            auto particular = [&](double t) {
                return (s->amplitude * std::polar(1.0, s->omega * t + s->phase) * gain).real();
            };
            return particular(t1) - particular(t0) * decay;
        }
        if (const auto* z = std::get_if<Trapezoid>(&c)) {
            if (z->amplitude == 0.0) return 0.0;
            // Exact propagation across the linear pieces.
            std::vector<double> knots;
            trapezoid_breaks(*z, t0, t1, knots);
            std::sort(knots.begin(), knots.end());
            knots.push_back(t1);
            double y = 0.0;
            double a = t0;
            for (double b : knots) {
                const double span = b - a;
                if (span <= 0.0) continue;
                const double e = std::exp(-span / tau);
                const double v0 = value_of(c, a);
                const double k = (value_of(c, b) - v0) / span;
                y = y * e + v0 * (1.0 - e) + k * (span - tau * (1.0 - e));
                a = b;
            }
            return y;
        }
        const auto& d = std::get<DampedRing>(c);
        if (t1 <= d.start_time) return 0.0;
        const double from = std::max(t0, d.start_time);
        const std::complex<double> lambda(-d.decay, d.omega);
        const std::complex<double> gain = 1.0 / (1.0 + lambda * tau);
        auto particular = [&](double t) {
            return (d.amplitude * std::exp(lambda * (t - d.start_time)) * gain).imag();
        };
        return particular(t1) - particular(from) * std::exp(-(t1 - from) / tau);
    }

    static void trapezoid_breaks(const Trapezoid& z, double t0, double t1,
                                 std::vector<double>& out) {
        if (z.amplitude == 0.0) return;
        const double r = z.edge_half_angle();
        const double corners[4] = {detail::pi / 2.0 - r, detail::pi / 2.0 + r,
                                   -detail::pi / 2.0 - r, -detail::pi / 2.0 + r};
        const double period = 2.0 * detail::pi / z.omega;
        for (double corner : corners) {
            // times where omega t + phase = corner + 2 pi k
            const double base = (corner - z.phase) / z.omega;
            double k = std::ceil((t0 - base) / period);
            for (double t = base + k * period; t < t1; t += period)
                if (t > t0) out.push_back(t);
        }
    }

    std::vector<WaveformComponent> parts_;
    double sign_ = 1.0;
};

/// The waveform of cycle `cycle_index`, phases redrawn when the interference asks for it.
/// Draws depend only on (seed, cycle_index).
inline CycleWaveform cycle_waveform(const InterferenceSpec& spec, std::uint64_t cycle_index,
                                    double sign = 1.0) {
    std::vector<WaveformComponent> parts;
    parts.reserve(spec.waveform.size());
    for (const auto& c : spec.waveform)
        if (amplitude_of(c) > 0.0) parts.push_back(c);
    if (spec.random_phase && !parts.empty()) {
        std::seed_seq seq{static_cast<std::uint32_t>(spec.seed),
                          static_cast<std::uint32_t>(spec.seed >> 32),
                          static_cast<std::uint32_t>(cycle_index),
                          static_cast<std::uint32_t>(cycle_index >> 32)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> angle(0.0, 2.0 * detail::pi);
        for (auto& c : parts) {
            if (auto* s = std::get_if<Sinusoid>(&c)) s->phase += angle(rng);
            else if (auto* z = std::get_if<Trapezoid>(&c)) z->phase += angle(rng);
        }
    }
    return CycleWaveform(std::move(parts), sign);
}

/// w(t) in cycle `cycle_index`.
inline double sample(const InterferenceSpec& spec, double t, std::uint64_t cycle_index) {
    return cycle_waveform(spec, cycle_index).value(t);
}

}  // namespace ccm
