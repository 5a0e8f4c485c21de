#pragma once

#include "ccm/core.hpp"
#include "ccm/interference.hpp"
#include "ccm/metrics.hpp"
#include "ccm/simulator.hpp"
#include "ccm/spectrum.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <thread>
#include <vector>

namespace ccm {

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 picks the
/// hardware concurrency). Callers write results by index, so output order
/// does not depend on scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                         unsigned threads = 0) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned k = 0; k < threads; ++k)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n && !failed; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        if (!failed.exchange(true)) failure = std::current_exception();
                    }
                }
            });
    }
    if (failure) std::rethrow_exception(failure);
}

// ============================================================================
// Step responses
// ============================================================================

struct StepMeasurement {
    MeasuredTransient transient;
    Termination terminated_by = Termination::cycle_budget;
    std::vector<double> extrema;  ///< per-cycle extremum current after the step
};

/// Applies a relative command step after `n_pre` cycles at i_command and
/// measures the extremum-current transient over `n_post` cycles.
inline StepMeasurement measure_step(const ConverterConfig& config, const ModulationScheme& scheme,
                                    const InterferenceSpec& interference,
                                    const ConditioningMethod& method, double i_command,
                                    double rel_step, std::size_t n_pre, std::size_t n_post,
                                    const InitState& init = {}) {
    detail::require(n_pre >= 1 && n_post >= 2, "need cycles before and after the step");
    detail::require(rel_step != 0.0, "rel_step must be nonzero");
    std::vector<double> cmd(n_pre + n_post, i_command);
    std::fill(cmd.begin() + static_cast<std::ptrdiff_t>(n_pre), cmd.end(),
              i_command * (1.0 + rel_step));
    SimOptions opt;
    opt.record_deviation = false;
    const auto trace = run_cycles(config, scheme, interference, method, cmd, cmd.size(), init, opt);
    StepMeasurement out;
    out.terminated_by = trace.terminated_by;
    if (trace.terminated_by == Termination::diverged || trace.samples.size() < cmd.size()) {
        out.transient.saturated = true;
        return out;
    }
    std::vector<double> ext;
    ext.reserve(trace.samples.size());
    for (const auto& s : trace.samples) ext.push_back(s.i_extremum);
    out.transient = measure_transient(ext, n_pre);
    out.extrema.assign(ext.begin() + static_cast<std::ptrdiff_t>(n_pre), ext.end());
    return out;
}

// ============================================================================
// Orbit classification
// ============================================================================

struct OrbitClass {
    bool diverged = false;
    int period = 0;  ///< smallest repeating period over the window; 0 when none up to max_period
    bool period_one() const { return !diverged && period == 1; }
};

/// Classifies the tail of a per-cycle sequence. `tol` is absolute.
inline OrbitClass classify_orbit(std::span<const double> values, double tol,
                                 std::size_t window = 64, int max_period = 16) {
    OrbitClass out;
    if (values.size() < window + static_cast<std::size_t>(max_period)) {
        out.period = 0;
        return out;
    }
    const std::size_t end = values.size();
    for (int p = 1; p <= max_period; ++p) {
        bool ok = true;
        for (std::size_t i = end - window; i < end && ok; ++i)
            ok = std::abs(values[i] - values[i - static_cast<std::size_t>(p)]) <= tol;
        if (ok) {
            out.period = p;
            return out;
        }
    }
    return out;
}

/// Runs n_cycles at a fixed command and classifies the start-current orbit.
inline OrbitClass orbit_of(const ConverterConfig& config, const ModulationScheme& scheme,
                           const InterferenceSpec& interference, const ConditioningMethod& method,
                           double i_command, std::size_t n_cycles, const InitState& init = {}) {
    const double cmd[] = {i_command};
    constexpr std::size_t window = 64;
    constexpr double rel_tol = 1e-7;
    SimOptions opt;
    opt.record_deviation = false;
    // a start current that holds still for a whole window is a period-one orbit
    opt.converge_after = window;
    opt.converge_tol = rel_tol;
    SimTrace trace;
    try {
        trace = run_cycles(config, scheme, interference, method, cmd, n_cycles, init, opt);
    } catch (const StarvationError&) {
        return {true, 0};
    }
    if (trace.terminated_by == Termination::diverged) return {true, 0};
    if (trace.terminated_by == Termination::converged) return {false, 1};
    const ControlFrame frame = make_frame(config, scheme);
    std::vector<double> x;
    x.reserve(trace.samples.size());
    for (const auto& s : trace.samples) x.push_back(s.i_start);
    return classify_orbit(x, rel_tol * std::max(frame.ripple(), std::abs(i_command)), window);
}

/// Long-run behavior at a fixed command: the orbit class of the start current
/// and the subharmonic lines of the inductor current after `skip` cycles.
struct SteadyStateReport {
    Termination terminated_by = Termination::cycle_budget;
    OrbitClass orbit;
    SpectrumReport spectrum;  ///< empty when the run diverged
    double switching_hz = 0.0;
    SimTrace trace;
};

inline SteadyStateReport steady_state_report(const ConverterConfig& config,
                                             const ModulationScheme& scheme,
                                             const InterferenceSpec& interference,
                                             const ConditioningMethod& method, double i_command,
                                             std::size_t n_cycles, std::size_t skip,
                                             const SpectrumOptions& spectrum_opt = {}) {
    detail::require(skip < n_cycles, "skip must leave cycles to analyze");
    const double cmd[] = {i_command};
    SimOptions opt;
    opt.dense = true;
    opt.record_deviation = false;
    SteadyStateReport rep;
    rep.trace = run_cycles(config, scheme, interference, method, cmd, n_cycles, {}, opt);
    rep.terminated_by = rep.trace.terminated_by;
    if (rep.terminated_by == Termination::diverged) {
        rep.orbit = {true, 0};
        return rep;
    }
    std::vector<double> x;
    x.reserve(rep.trace.samples.size());
    for (const auto& s : rep.trace.samples) x.push_back(s.i_start);
    const ControlFrame frame = make_frame(config, scheme);
    rep.orbit = classify_orbit(x, 1e-7 * std::max(frame.ripple(), std::abs(i_command)));
    const auto& dense = *rep.trace.dense_waveform;
    rep.switching_hz = mean_switching_frequency(rep.trace, skip);
    const std::span<const std::pair<double, double>> tail(dense.begin() +
                                                              static_cast<std::ptrdiff_t>(2 * skip),
                                                          dense.end());
    rep.spectrum = spectrum(tail, rep.switching_hz, spectrum_opt);
    return rep;
}

// ============================================================================
// Monte Carlo probe
// ============================================================================

/// One member drawn from an interference class: a sinusoid or a trapezoid with
/// amplitude up to a_ub, frequency in [omega_l, omega_span * omega_l], a
/// synchronized (fixed per draw) phase, and slope within lambda_ub. Draws whose
/// spectrum functional exceeds the class bound are redrawn.
struct ProbeDraw {
    std::uint64_t index = 0;
    InterferenceSpec interference;
};

struct ProbeOptions {
    std::size_t n_draws = 1000;
    std::uint64_t seed = 0;
    std::size_t n_cycles = 600;
    double omega_span = 4.0;
    unsigned threads = 0;
};

inline ProbeDraw draw_member(const InterferenceSpec& cls, std::uint64_t seed, std::uint64_t index,
                             double omega_span) {
    using detail::require;
    require(std::isfinite(cls.omega_l) && cls.a_ub > 0.0,
            "probe needs a class with finite omega_l and positive a_ub");
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      0x70726f62u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double b_ub = cls.b_functional.value_or(std::numeric_limits<double>::infinity());
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const double a = cls.a_ub * (0.5 + 0.5 * u(rng));
        const double omega = cls.omega_l * (1.0 + (omega_span - 1.0) * u(rng));
        const double phase = 2.0 * std::numbers::pi * u(rng);
        const bool trapezoid = u(rng) < 0.5;
        WaveformComponent c = Sinusoid{a, omega, phase};
        if (trapezoid) {
            // slew between a sine-like edge and the class slope bound
            const double s_min = 2.0 * omega * a / std::numbers::pi;
            const double s_max = std::max(s_min, cls.lambda_ub);
            c = Trapezoid{a, omega, s_min + (s_max - s_min) * u(rng), phase};
        }
        auto spec = make_interference({c});
        if (spec.lambda_ub > cls.lambda_ub * (1.0 + 1e-12)) continue;
        if (spec.b_functional && *spec.b_functional > b_ub * (1.0 + 1e-12)) continue;
        spec.a_ub = cls.a_ub;
        spec.omega_l = cls.omega_l;
        spec.lambda_ub = cls.lambda_ub;
        spec.b_functional = cls.b_functional;
        return {index, std::move(spec)};
    }
    throw ValidationError("interference class admits no drawable member");
}

struct ProbeFailure {
    ProbeDraw draw;
    OrbitClass orbit;
};

struct ProbeReport {
    std::size_t n_draws = 0;
    std::size_t diverged = 0;
    std::size_t subharmonic = 0;  ///< settled on a period > 1 or never repeated
    std::vector<ProbeFailure> failures;  ///< sorted by draw index

    double failure_fraction() const {
        return n_draws ? static_cast<double>(diverged + subharmonic) / n_draws : 0.0;
    }
};

inline ProbeReport probe(const ConverterConfig& config, const ModulationScheme& scheme,
                         const InterferenceSpec& interference_class,
                         const ConditioningMethod& method, double i_command,
                         const ProbeOptions& opt = {}) {
    detail::require(opt.n_draws >= 1, "n_draws must be at least 1");
    validate(interference_class);
    validate(method);
    std::vector<OrbitClass> orbits(opt.n_draws);
    std::vector<ProbeDraw> draws(opt.n_draws);
    for (std::size_t i = 0; i < opt.n_draws; ++i)
        draws[i] = draw_member(interference_class, opt.seed, i, opt.omega_span);
    parallel_for(
        opt.n_draws,
        [&](std::size_t i) {
            orbits[i] = orbit_of(config, scheme, draws[i].interference, method, i_command,
                                 opt.n_cycles);
        },
        opt.threads);
    ProbeReport rep;
    rep.n_draws = opt.n_draws;
    for (std::size_t i = 0; i < opt.n_draws; ++i) {
        if (orbits[i].period_one()) continue;
        (orbits[i].diverged ? rep.diverged : rep.subharmonic) += 1;
        rep.failures.push_back({draws[i], orbits[i]});
    }
    return rep;
}

}  // namespace ccm
