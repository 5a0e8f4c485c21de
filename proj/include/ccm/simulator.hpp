#pragma once

#include "ccm/core.hpp"
#include "ccm/errors.hpp"
#include "ccm/interference.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ccm {

enum class Termination { converged, cycle_budget, diverged };

inline std::string to_string(Termination t) {
    switch (t) {
        case Termination::converged: return "converged";
        case Termination::cycle_budget: return "cycle_budget";
        case Termination::diverged: return "diverged";
    }
    return "unknown";
}

/// One switching cycle. Times and currents are physical; `t_on` is the
/// comparator-terminated interval (the off-time under valley control).
struct CycleSample {
    std::size_t n = 0;
    double t_on = 0.0;
    double i_extremum = 0.0;
    double i_command = 0.0;
    double trigger_time_deviation = 0.0;  ///< t_on minus the interference-free trigger
    double i_start = 0.0;                 ///< current when the interval began
    bool limited = false;                 ///< minimum-interval floor or duty limit engaged
};

struct SimTrace {
    std::vector<CycleSample> samples;
    /// Inductor current vertices (t, i); piecewise linear between them.
    std::optional<std::vector<std::pair<double, double>>> dense_waveform;
    Termination terminated_by = Termination::cycle_budget;
    double elapsed = 0.0;
};

/// Overrides for the starting point; by default the run starts from the
/// interference-free periodic steady state of the first command.
struct InitState {
    std::optional<double> i_start;        ///< physical current at the first interval start
    std::optional<double> filter_output;  ///< physical filter output at that instant
};

struct SimOptions {
    bool dense = false;
    bool record_deviation = true;
    int steps_per_interval = 64;
    /// Stop once the start current has stayed put this many cycles (0 disables).
    std::size_t converge_after = 0;
    double converge_tol = 1e-12;
};

/// Everything the trigger search needs for one cycle, in the control frame
/// (valley control negated into peak control).
struct CycleContext {
    double i_start = 0.0;
    double command = 0.0;
    double ramp = 0.0;
    CycleWaveform interference;
    double t_min = 0.0;
    double t_cap = 0.0;
    bool cap_is_duty_limit = false;  ///< hitting t_cap ends the interval instead of failing
    double step = 0.0;               ///< search grid
    double filter_initial = 0.0;     ///< filter output at t = 0
    double r_sense = 1.0;
    double base = 1.0;               ///< steady-state interval, sets tolerances
};

struct TriggerResult {
    double t = 0.0;
    bool limited = false;
};

namespace detail {

inline double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                          double tol) {
    auto done = [tol](double a, double b) { return b - a <= tol; };
    std::uintmax_t iters = 200;
    auto r = boost::math::tools::bisect(f, lo, hi, done, iters);
    return r.second;
}

inline std::vector<double> search_nodes(const CycleContext& ctx, double from, double to) {
    std::vector<double> nodes;
    const double h = ctx.step;
    const auto count = static_cast<std::size_t>(std::ceil((to - from) / h));
    nodes.reserve(count + 8);
    for (std::size_t i = 0; i <= count; ++i) nodes.push_back(std::min(to, from + h * i));
    ctx.interference.breakpoints(from, to, nodes);
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    return nodes;
}

/// First t in [lo, hi] with f(t) >= 0, given f and its derivative. Interior
/// maxima between grid nodes are located so a brief excursion is not missed.
inline std::optional<double> first_crossing(const std::function<double(double)>& f,
                                            const std::function<double(double)>& df,
                                            std::span<const double> nodes, double tol) {
    if (f(nodes.front()) >= 0.0) return nodes.front();
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const double a = nodes[i];
        const double b = nodes[i + 1];
        if (b <= a) continue;
        const double eps = 1e-9 * (b - a);
        const double da = df(a + eps);
        const double db = df(b - eps);
        double left = a;
        if (da > 0.0 && db < 0.0) {
            const double tm = bisect_root([&](double t) { return -df(t); }, a + eps, b - eps, tol);
            if (f(tm) >= 0.0) return bisect_root(f, a, tm, tol);
            left = tm;
        } else if (da < 0.0 && db > 0.0) {
            left = bisect_root(df, a + eps, b - eps, tol);
        }
        if (f(b) >= 0.0) {
            if (f(left) >= 0.0) left = a;
            return bisect_root(f, left, b, tol);
        }
    }
    return std::nullopt;
}

inline TriggerResult finish(const CycleContext& ctx, std::optional<double> t,
                            const char* what) {
    if (!t || *t > ctx.t_cap) {
        if (ctx.cap_is_duty_limit) return {ctx.t_cap, true};
        throw StarvationError(std::string("trigger starvation: ") + what +
                              " never reached the command within the cycle span cap");
    }
    if (*t <= ctx.t_min) return {ctx.t_min, ctx.t_min > 0.0};
    return {*t, false};
}

inline TriggerResult slope_trigger(const CycleContext& ctx, double m_s) {
    const double k = ctx.ramp + m_s;
    const auto& w = ctx.interference;
    auto f = [&](double t) { return ctx.i_start + k * t + w.value(t) - ctx.command; };
    const double tol = 1e-13 * ctx.base;
    if (w.empty()) {
        // exact ramp crossing
        return finish(ctx, (ctx.command - ctx.i_start) / k, "sensed current");
    }
    auto df = [&](double t) { return k + w.slope(t); };
    const auto nodes = search_nodes(ctx, ctx.t_min, ctx.t_cap);
    return finish(ctx, first_crossing(f, df, nodes, tol), "sensed current");
}

/// Filter output at t for tau*y' = u - y, u = x + m t + w(t), y(0) = y0.
inline double filter_output(const CycleContext& ctx, double tau, double t) {
    const double e = std::exp(-t / tau);
    double y = ctx.filter_initial * e + ctx.i_start * (1.0 - e) +
               ctx.ramp * (t - tau * (1.0 - e));
    if (!ctx.interference.empty()) y += ctx.interference.filtered(tau, 0.0, t);
    return y;
}

inline TriggerResult filter_trigger(const CycleContext& ctx, double tau) {
    const auto& w = ctx.interference;
    auto f = [&](double t) { return filter_output(ctx, tau, t) - ctx.command; };
    auto df = [&](double t) {
        return (ctx.i_start + ctx.ramp * t + w.value(t) - filter_output(ctx, tau, t)) / tau;
    };
    const double tol = 1e-13 * ctx.base;
    // The comparator acts on a crossing: when the filter output starts at or
    // past the command (valley control carries a state that decayed toward
    // zero), it is armed only once the output has dropped below the command.
    double from = ctx.t_min;
    if (f(from) >= 0.0) {
        const auto below = first_crossing([&](double t) { return -f(t); },
                                          [&](double t) { return -df(t); },
                                          search_nodes(ctx, from, ctx.t_cap), tol);
        if (!below) return finish(ctx, from, "filtered sensor");
        from = *below + std::max(tol, 1e-9 * ctx.base);
        while (from < ctx.t_cap && f(from) >= 0.0) from += std::max(tol, 1e-9 * ctx.base);
        if (from >= ctx.t_cap) return finish(ctx, ctx.t_min, "filtered sensor");
    }
    const auto nodes = search_nodes(ctx, from, ctx.t_cap);
    return finish(ctx, first_crossing(f, df, nodes, tol), "filtered sensor");
}

/// Saturating integrator: V(t) = E(t) - min E over [t_b, t], E the integral of
/// the overdrive x + m t + w(t) - c from the end of blanking. Fires when V
/// reaches the charge threshold; the output follows t_d later.
inline std::optional<double> overdrive_crossing(const CycleContext& ctx, double threshold,
                                                double blanking) {
    const auto& w = ctx.interference;
    const double tb = blanking;
    const double x = ctx.i_start, m = ctx.ramp, c = ctx.command;
    auto e = [&](double t) { return x + m * t + (w.empty() ? 0.0 : w.value(t)) - c; };
    auto de = [&](double t) { return m + (w.empty() ? 0.0 : w.slope(t)); };
    auto big_e = [&](double t) {
        double v = (x - c) * (t - tb) + 0.5 * m * (t * t - tb * tb);
        if (!w.empty()) v += w.integral(tb, t);
        return v;
    };
    const double tol = 1e-13 * ctx.base;
    const double limit = ctx.t_cap;
    if (tb >= limit) return std::nullopt;

    double e_min = 0.0;  // E(tb) = 0
    auto handle_piece = [&](double p, double q) -> std::optional<double> {
        if (q <= p) return std::nullopt;
        const double mid = 0.5 * (p + q);
        if (e(mid) >= 0.0) {
            if (big_e(q) - e_min >= threshold) {
                if (big_e(p) - e_min >= threshold) return p;
                return bisect_root([&](double t) { return big_e(t) - e_min - threshold; }, p, q,
                                   tol);
            }
        } else {
            e_min = std::min(e_min, big_e(q));
        }
        return std::nullopt;
    };

    if (threshold <= 0.0 && e(tb) >= 0.0) return tb;
    std::vector<double> nodes;
    if (w.empty()) {
        nodes = {tb};
        const double t0 = (c - x) / m;
        if (t0 > tb && t0 < limit) nodes.push_back(t0);
        nodes.push_back(limit);
    } else {
        nodes = search_nodes(ctx, tb, limit);
    }
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const double a = nodes[i];
        const double b = nodes[i + 1];
        if (b <= a) continue;
        // split at an interior extremum of e, then at sign changes of e
        std::vector<double> cuts{a};
        const double eps = 1e-9 * (b - a);
        if (!w.empty()) {
            const double da = de(a + eps), db = de(b - eps);
            if ((da > 0.0) != (db > 0.0) && da != 0.0 && db != 0.0)
                cuts.push_back(bisect_root(
                    [&](double t) { return da > 0.0 ? -de(t) : de(t); }, a + eps, b - eps, tol));
        }
        cuts.push_back(b);
        for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
            const double p = cuts[j], q = cuts[j + 1];
            const double ep = e(p), eq = e(q);
            double split = q;
            if ((ep < 0.0) != (eq < 0.0)) {
                split = bisect_root([&](double t) { return ep < 0.0 ? e(t) : -e(t); }, p, q, tol);
            }
            if (auto hit = handle_piece(p, split)) return hit;
            if (auto hit = handle_piece(split, q)) return hit;
        }
    }
    return std::nullopt;
}

inline TriggerResult overdrive_trigger(const CycleContext& ctx, const OverdriveDelay& od) {
    const double q = od.charge_threshold(ctx.r_sense);
    CycleContext search = ctx;
    search.t_cap = ctx.t_cap - od.t_d;
    std::optional<double> hit;
    if (search.t_cap > od.blanking) hit = overdrive_crossing(search, q, od.blanking);
    if (!hit) return finish(ctx, std::nullopt, "comparator integrator");
    return finish(ctx, *hit + od.t_d, "comparator integrator");
}

}  // namespace detail

/// Trigger instant of one cycle under the given conditioning (first event, latched).
inline TriggerResult find_trigger(const CycleContext& ctx, const ConditioningMethod& method) {
    if (const auto* s = std::get_if<SlopeComp>(&method)) return detail::slope_trigger(ctx, s->m_s);
    if (const auto* f = std::get_if<LowPassFilter>(&method)) return detail::filter_trigger(ctx, f->tau);
    return detail::overdrive_trigger(ctx, std::get<OverdriveDelay>(method));
}

namespace detail {

inline double search_step(const ControlFrame& frame, const CycleWaveform& w,
                          const ConditioningMethod& method, int steps_per_interval) {
    double h = frame.base_interval / steps_per_interval;
    if (!w.empty()) {
        h = std::min(h, w.min_period() / 200.0);
        h = std::min(h, w.min_edge() / 8.0);
    }
    if (const auto* f = std::get_if<LowPassFilter>(&method)) h = std::min(h, f->tau / 8.0);
    return std::max(h, frame.base_interval / 65536.0);
}

inline CycleContext make_context(const ControlFrame& frame, const ConverterConfig& config,
                                 const ConditioningMethod& method, double x, double c,
                                 CycleWaveform w, double y0, int steps_per_interval) {
    CycleContext ctx;
    ctx.i_start = x;
    ctx.command = c;
    ctx.ramp = frame.rise;
    ctx.t_min = frame.t_min;
    ctx.cap_is_duty_limit = frame.period.has_value();
    ctx.t_cap = ctx.cap_is_duty_limit ? frame.t_max : 20.0 * frame.base_interval;
    ctx.filter_initial = y0;
    ctx.r_sense = config.r_sense;
    ctx.base = frame.base_interval;
    ctx.step = search_step(frame, w, method, steps_per_interval);
    ctx.interference = std::move(w);
    return ctx;
}

/// Filter output at the start of an interval that follows a trigger at y_trig.
inline double filter_carry(const ControlFrame& frame, double tau, double y_trig, double t_ctrl) {
    return y_trig * std::exp(-frame.other_length(t_ctrl) / tau);
}

/// Frame start current of the interference-free periodic steady state.
inline double steady_start(const ControlFrame& frame, const ConverterConfig& config,
                           const ConditioningMethod& method, double c) {
    const double base = frame.base_interval;
    if (const auto* s = std::get_if<SlopeComp>(&method)) return c - (frame.rise + s->m_s) * base;
    const auto* lpf = std::get_if<LowPassFilter>(&method);
    auto trigger_at = [&](double x) {
        const double y0 = lpf ? filter_carry(frame, lpf->tau, c, base) : 0.0;
        auto ctx = make_context(frame, config, method, x, c, {}, y0, 64);
        ctx.t_cap = 20.0 * base;
        ctx.cap_is_duty_limit = true;
        ctx.t_min = 0.0;
        return find_trigger(ctx, method).t;
    };
    // trigger time decreases as x rises; bracket the x that gives exactly `base`
    const double ripple = frame.rise * base;
    double hi = c;
    double lo = c - 2.0 * ripple;
    if (trigger_at(hi) > base)
        throw ValidationError("conditioning delay alone exceeds the steady-state interval");
    for (int i = 0; i < 60 && trigger_at(lo) < base; ++i) lo -= 2.0 * ripple * (i + 1);
    const double tol = 1e-15 * std::max(std::abs(c), ripple);
    for (int i = 0; i < 200 && hi - lo > tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        (trigger_at(mid) > base ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Physical current at the start of the comparator-terminated interval in the
/// interference-free periodic steady state for command `i_command`.
inline double steady_state_start(const ConverterConfig& config, const ModulationScheme& scheme,
                                 const ConditioningMethod& method, double i_command) {
    validate(method);
    const ControlFrame frame = make_frame(config, scheme);
    return frame.sign * detail::steady_start(frame, config, method, frame.sign * i_command);
}

inline SimTrace run_cycles(const ConverterConfig& config, const ModulationScheme& scheme,
                           const InterferenceSpec& interference,
                           const ConditioningMethod& method,
                           std::span<const double> i_command_sequence, std::size_t n_cycles,
                           const InitState& init = {}, const SimOptions& opt = {}) {
    using detail::require;
    require(n_cycles >= 1, "n_cycles must be at least 1");
    require(i_command_sequence.size() == 1 || i_command_sequence.size() == n_cycles,
            "i_command_sequence must hold 1 or n_cycles values");
    for (double v : i_command_sequence) require(std::isfinite(v), "i_command must be finite");
    validate(method);
    validate(interference);
    const ControlFrame frame = make_frame(config, scheme);
    const double sign = frame.sign;
    auto command_at = [&](std::size_t n) {
        return sign * i_command_sequence[i_command_sequence.size() == 1 ? 0 : n];
    };

    const auto* lpf = std::get_if<LowPassFilter>(&method);
    const double c0 = command_at(0);
    double x = init.i_start ? sign * *init.i_start : detail::steady_start(frame, config, method, c0);
    double y = 0.0;
    if (lpf)
        y = init.filter_output ? sign * *init.filter_output
                               : detail::filter_carry(frame, lpf->tau, c0, frame.base_interval);

    SimTrace trace;
    trace.samples.reserve(n_cycles);
    if (opt.dense) trace.dense_waveform.emplace().reserve(2 * n_cycles + 1);
    const double scale_floor = frame.rise * frame.base_interval;
    double t_abs = 0.0;
    std::size_t still = 0;

    for (std::size_t n = 0; n < n_cycles; ++n) {
        const double c = command_at(n);
        auto ctx = detail::make_context(frame, config, method, x, c,
                                        cycle_waveform(interference, n, sign), y,
                                        opt.steps_per_interval);
        const TriggerResult trig = find_trigger(ctx, method);
        const double t = trig.t;

        CycleSample s;
        s.n = n;
        s.t_on = t;
        s.i_start = sign * x;
        s.i_extremum = sign * (x + frame.rise * t);
        s.i_command = sign * c;
        s.limited = trig.limited;
        if (opt.record_deviation) {
            auto clean = ctx;
            clean.interference = CycleWaveform{};
            clean.cap_is_duty_limit = true;
            s.trigger_time_deviation = t - find_trigger(clean, method).t;
        }
        trace.samples.push_back(s);

        const double other = frame.other_length(t);
        if (opt.dense) {
            trace.dense_waveform->emplace_back(t_abs, sign * x);
            trace.dense_waveform->emplace_back(t_abs + t, sign * (x + frame.rise * t));
        }
        t_abs += t + other;
        if (lpf) y = detail::filter_carry(frame, lpf->tau, detail::filter_output(ctx, lpf->tau, t), t);
        const double x_next = x + frame.rise * t - frame.fall * other;

        const double scale = std::max(std::abs(c), scale_floor);
        if (!std::isfinite(x_next) || std::abs(x_next) > 1e3 * scale) {
            trace.terminated_by = Termination::diverged;
            x = x_next;
            break;
        }
        if (opt.converge_after > 0) {
            still = std::abs(x_next - x) <= opt.converge_tol * scale ? still + 1 : 0;
            if (still >= opt.converge_after) {
                x = x_next;
                trace.terminated_by = Termination::converged;
                break;
            }
        }
        x = x_next;
    }
    if (opt.dense && trace.terminated_by != Termination::diverged)
        trace.dense_waveform->emplace_back(t_abs, sign * x);
    trace.elapsed = t_abs;
    return trace;
}

/// Command-to-trigger mapping from a fixed interval start current (physical),
/// cycle 0's interference. The filter starts from its steady-state carry.
inline std::vector<std::pair<double, double>> static_mapping(
    const ConverterConfig& config, const ModulationScheme& scheme,
    const InterferenceSpec& interference, const ConditioningMethod& method,
    std::span<const double> i_c_grid, double i_start, int steps_per_interval = 256) {
    for (std::size_t i = 1; i < i_c_grid.size(); ++i)
        detail::require(i_c_grid[i] >= i_c_grid[i - 1], "i_c grid must be sorted ascending");
    validate(method);
    const ControlFrame frame = make_frame(config, scheme);
    const auto* lpf = std::get_if<LowPassFilter>(&method);
    const CycleWaveform w = cycle_waveform(interference, 0, frame.sign);
    std::vector<std::pair<double, double>> out;
    out.reserve(i_c_grid.size());
    for (double ic : i_c_grid) {
        const double c = frame.sign * ic;
        const double y0 = lpf ? detail::filter_carry(frame, lpf->tau, c, frame.base_interval) : 0.0;
        auto ctx = detail::make_context(frame, config, method, frame.sign * i_start, c, w, y0,
                                        steps_per_interval);
        out.emplace_back(ic, find_trigger(ctx, method).t);
    }
    return out;
}

/// Mean switching frequency over the trace.
inline double mean_switching_frequency(const SimTrace& trace, std::size_t skip = 0) {
    detail::require(trace.dense_waveform && trace.dense_waveform->size() > 2 * skip + 2,
                    "trace has no dense waveform");
    const auto& d = *trace.dense_waveform;
    const std::size_t cycles = (d.size() - 1) / 2 - skip;
    return static_cast<double>(cycles) / (d.back().first - d[2 * skip].first);
}

}  // namespace ccm
