#pragma once

#include "ccm/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numeric>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ccm {

/// A subharmonic order k/q in lowest terms.
struct Order {
    int k = 0;
    int q = 1;
    double value() const { return static_cast<double>(k) / q; }
    friend bool operator<(const Order& a, const Order& b) {
        return a.k * b.q < b.k * a.q;
    }
    friend bool operator==(const Order& a, const Order& b) { return a.k == b.k && a.q == b.q; }
};

struct SpectrumOptions {
    int samples_per_period = 64;
    int min_periods = 64;
    int max_denominator = 8;
    double floor_factor = 10.0;      ///< line must exceed this multiple of the median bin
    double relative_floor = 1e-3;    ///< and this fraction of the strongest line
};

struct SpectrumReport {
    std::vector<double> frequency_hz;
    std::vector<double> magnitude;
    std::set<Order> orders;
    double fundamental_hz = 0.0;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Linear interpolation of a time-monotone polyline.
inline double polyline_at(std::span<const std::pair<double, double>> pts, std::size_t& cursor,
                          double t) {
    while (cursor + 1 < pts.size() && pts[cursor + 1].first < t) ++cursor;
    if (cursor + 1 >= pts.size()) return pts.back().second;
    const auto& [t0, y0] = pts[cursor];
    const auto& [t1, y1] = pts[cursor + 1];
    if (t1 <= t0) return y1;
    return y0 + (y1 - y0) * (t - t0) / (t1 - t0);
}

}  // namespace detail

/// Magnitude spectrum of a uniformly sampled record, mean removed,
/// 4-term Blackman-Harris window. Returns |X_k| for k = 0 .. n/2.
inline std::vector<double> windowed_magnitude(std::span<const double> x) {
    const std::size_t n = x.size();
    detail::require(n >= 8, "record too short for a spectrum");
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    std::vector<double> in(n);
    constexpr double a0 = 0.35875, a1 = 0.48829, a2 = 0.14128, a3 = 0.01168;
    const double w = 2.0 * std::numbers::pi / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = w * static_cast<double>(i);
        const double win = a0 - a1 * std::cos(p) + a2 * std::cos(2 * p) - a3 * std::cos(3 * p);
        in[i] = (x[i] - mean) * win;
    }
    std::vector<fftw_complex> out(n / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    std::vector<double> mag(n / 2 + 1);
    const double scale = 2.0 / (a0 * static_cast<double>(n));
    for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = scale * std::hypot(out[k][0], out[k][1]);
    return mag;
}

/// Spectrum of a piecewise-linear waveform (time, current) and the subharmonic
/// orders found in it. The record is resampled on a grid locked to the
/// fundamental, over a whole number of periods.
inline SpectrumReport spectrum(std::span<const std::pair<double, double>> waveform,
                               double fundamental_hz, const SpectrumOptions& opt = {}) {
    using detail::require;
    require(fundamental_hz > 0.0 && std::isfinite(fundamental_hz),
            "fundamental frequency must be positive");
    require(waveform.size() >= 2, "waveform needs at least two points");
    for (std::size_t i = 1; i < waveform.size(); ++i)
        require(waveform[i].first >= waveform[i - 1].first, "waveform time must be monotone");
    const double t0 = waveform.front().first;
    const double span = waveform.back().first - t0;
    const int periods = static_cast<int>(std::floor(span * fundamental_hz * (1.0 + 1e-12)));
    require(periods >= opt.min_periods, "trace too short: need at least " +
                                            std::to_string(opt.min_periods) +
                                            " fundamental periods");

    const std::size_t n = static_cast<std::size_t>(periods) * opt.samples_per_period;
    const double dt = 1.0 / (fundamental_hz * opt.samples_per_period);
    std::vector<double> x(n);
    std::size_t cursor = 0;
    // sample from the end of the record so the start-up transient is dropped first
    const double start = waveform.back().first - static_cast<double>(n) * dt;
    for (std::size_t i = 0; i < n; ++i)
        x[i] = detail::polyline_at(waveform, cursor, start + static_cast<double>(i) * dt);

    SpectrumReport rep;
    rep.fundamental_hz = fundamental_hz;
    rep.magnitude = windowed_magnitude(x);
    const double df = 1.0 / (static_cast<double>(n) * dt);
    rep.frequency_hz.resize(rep.magnitude.size());
    for (std::size_t k = 0; k < rep.magnitude.size(); ++k) rep.frequency_hz[k] = df * k;

    const auto& mag = rep.magnitude;
    std::vector<double> sorted(mag.begin() + 1, mag.end());
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double strongest = *std::max_element(mag.begin() + 1, mag.end());
    const double threshold = std::max(opt.floor_factor * median, opt.relative_floor * strongest);

    std::vector<Order> candidates;
    for (int q = 2; q <= opt.max_denominator; ++q)
        for (int k = 1; k < q; ++k)
            if (std::gcd(k, q) == 1) candidates.push_back({k, q});

    const double bin_in_orders = df / fundamental_hz;
    for (std::size_t k = 1; k + 1 < mag.size(); ++k) {
        if (!(mag[k] > mag[k - 1] && mag[k] >= mag[k + 1] && mag[k] > threshold)) continue;
        // parabolic interpolation on log magnitude
        const double l = std::log(mag[k - 1]), c = std::log(mag[k]), r = std::log(mag[k + 1]);
        const double denom = l - 2.0 * c + r;
        const double shift = denom != 0.0 ? 0.5 * (l - r) / denom : 0.0;
        const double ratio = (static_cast<double>(k) + shift) * bin_in_orders;
        const double frac = ratio - std::floor(ratio);
        double best = std::min(frac, 1.0 - frac);  // distance to a harmonic
        const Order* hit = nullptr;
        for (const auto& o : candidates) {
            const double d = std::abs(frac - o.value());
            if (d < best) {
                best = d;
                hit = &o;
            }
        }
        if (hit && best <= 0.75 * bin_in_orders) rep.orders.insert(*hit);
    }
    return rep;
}

}  // namespace ccm
