#pragma once

#include "ccm/core.hpp"
#include "ccm/experiments.hpp"
#include "ccm/filter_design.hpp"
#include "ccm/interference.hpp"
#include "ccm/metrics.hpp"
#include "ccm/overdrive_design.hpp"
#include "ccm/slope_design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace ccm {

/// One design evaluated in the (settling, overshoot) plane.
struct TradeoffPoint {
    std::string method;
    double parameter = 0.0;  ///< m_s_hat, filter tau_hat or comparator tau_hat
    double n_w = 0.0;
    double o_w = 0.0;
};

struct CompareGrids {
    std::vector<double> slope_m_s_hat;
    std::vector<double> filter_tau_hat;
    std::vector<double> overdrive_tau_hat;
};

inline std::vector<double> linear_grid(double lo, double hi, int n) {
    detail::require(n >= 2 && hi > lo, "grid needs n >= 2 and hi > lo");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
    return g;
}

inline std::vector<double> log_grid(double lo, double hi, int n) {
    detail::require(n >= 2 && lo > 0.0 && hi > lo, "grid needs n >= 2 and 0 < lo < hi");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    return g;
}

inline CompareGrids default_compare_grids() {
    return {linear_grid(0.0, 3.0, 151), log_grid(0.02, 5.0, 120), log_grid(1e-3, 1.0, 120)};
}

/// The filter's loop depends on the current level, so its worst case is taken
/// over commands spread across [i_min_hat, i_max_hat] (over m1 * T_on). The
/// default runs from the continuous-conduction boundary to four ripples.
struct CompareOptions {
    double i_min_hat = 1.0;
    double i_max_hat = 4.0;
    int operating_points = 7;
    FilterSweepOptions filter;
};

/// Point clouds of the three methods on a normalized constant off-time loop
/// (m1 = m2 = 1, T_on = T_off = 1) under a sinusoid of amplitude a_hat and
/// frequency omega_hat. Unstable designs are dropped; comparator designs are
/// kept only while the longest overdrive delay fits inside T_on.
inline std::vector<TradeoffPoint> compare_methods(double a_hat, double omega_hat,
                                                  const CompareGrids& grids,
                                                  const CompareOptions& opt = {}) {
    using detail::require;
    require(a_hat >= 0.0 && std::isfinite(a_hat), "a_hat must be non-negative");
    require(omega_hat > 0.0 && std::isfinite(omega_hat), "omega_hat must be positive");
    const double omega = 2.0 * std::numbers::pi * omega_hat;
    const double lambda_hat = a_hat * omega;
    std::vector<TradeoffPoint> out;

    for (const auto& row : slope_sweep(lambda_hat, grids.slope_m_s_hat))
        if (row.stable) out.push_back({"slope", row.m_s_hat, row.n_w, row.o_w});

    const ConverterConfig config = make_slope_config(1.0, 1.0);
    const ModulationScheme scheme{ConstantOffTime{1.0}, 0.0};
    const InterferenceSpec interference =
        a_hat > 0.0 ? sinusoid_class(a_hat, omega) : no_interference();
    require(opt.operating_points >= 1 && opt.i_max_hat >= opt.i_min_hat && opt.i_min_hat > 0.0,
            "operating range must be positive and ordered");
    const std::vector<double> commands =
        opt.operating_points == 1 || opt.i_max_hat == opt.i_min_hat
            ? std::vector<double>{opt.i_min_hat}
            : linear_grid(opt.i_min_hat, opt.i_max_hat, opt.operating_points);
    std::vector<FilterSweepRow> rows(grids.filter_tau_hat.size());
    parallel_for(rows.size(), [&](std::size_t i) {
        rows[i] = filter_design_point(config, scheme, interference, grids.filter_tau_hat[i],
                                      commands, opt.filter);
    });
    for (const auto& row : rows)
        if (row.stable) out.push_back({"filter", row.tau_hat, row.n_w, row.o_w});

    const double tau_cap = max_feasible_tau_hat(a_hat, omega_hat);
    for (double th : grids.overdrive_tau_hat) {
        if (!(th < tau_cap)) continue;
        if (a_hat > 0.0 && !(th > a_hat / omega_hat)) continue;
        const auto r = psi_and_pole_range(1.0, a_hat, omega_hat, th);
        if (!r.small_signal_stable) continue;
        out.push_back({"overdrive", th, settling_cycles(r.poles), overshoot(r.poles)});
    }
    return out;
}

inline bool dominates(const TradeoffPoint& a, const TradeoffPoint& b) {
    return a.n_w <= b.n_w && a.o_w <= b.o_w && (a.n_w < b.n_w || a.o_w < b.o_w);
}

/// Points not dominated by any other point of the set.
inline std::vector<TradeoffPoint> pareto_front(const std::vector<TradeoffPoint>& pts) {
    std::vector<TradeoffPoint> front;
    for (const auto& p : pts) {
        const bool beaten =
            std::any_of(pts.begin(), pts.end(), [&](const auto& q) { return dominates(q, p); });
        if (!beaten) front.push_back(p);
    }
    return front;
}

/// Front membership per method, over the union of the named methods' points.
inline std::map<std::string, int> pareto_counts(const std::vector<TradeoffPoint>& pts,
                                                const std::vector<std::string>& methods) {
    std::vector<TradeoffPoint> subset;
    for (const auto& p : pts)
        if (std::find(methods.begin(), methods.end(), p.method) != methods.end())
            subset.push_back(p);
    std::map<std::string, int> counts;
    for (const auto& m : methods) counts[m] = 0;
    for (const auto& p : pareto_front(subset)) ++counts[p.method];
    return counts;
}

/// Share of x's own front that stays on the front of x and y together.
/// Membership counts alone depend on how densely each method was sampled; the
/// share does not.
inline double front_share(const std::vector<TradeoffPoint>& pts, const std::string& x,
                          const std::string& y) {
    std::vector<TradeoffPoint> own;
    for (const auto& p : pts)
        if (p.method == x) own.push_back(p);
    const auto own_front = pareto_front(own);
    if (own_front.empty()) return 0.0;
    const auto counts = pareto_counts(pts, {x, y});
    return static_cast<double>(counts.at(x)) / static_cast<double>(own_front.size());
}

/// `better` keeps a larger share of its front than `worse` when the two
/// point clouds are pooled.
inline bool pairwise_dominates(const std::vector<TradeoffPoint>& pts, const std::string& better,
                               const std::string& worse) {
    return front_share(pts, better, worse) > front_share(pts, worse, better);
}

}  // namespace ccm
