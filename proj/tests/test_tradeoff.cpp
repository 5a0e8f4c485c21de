#include "ccm/tradeoff.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ccm;
using Catch::Matchers::WithinRel;

TEST_CASE("grids") {
    const auto lin = linear_grid(0.0, 1.0, 5);
    CHECK(lin == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    const auto lg = log_grid(0.01, 1.0, 3);
    CHECK_THAT(lg[1], WithinRel(0.1, 1e-12));
    CHECK(lg.back() == 1.0);
}

TEST_CASE("dominance and fronts") {
    const std::vector<TradeoffPoint> pts = {
        {"slope", 0.0, 5.0, 0.1}, {"slope", 1.0, 3.0, 0.4}, {"slope", 2.0, 6.0, 0.5},
        {"filter", 0.5, 4.0, 0.05}, {"filter", 1.0, 2.0, 0.6},
    };
    CHECK(dominates(pts[0], pts[2]));
    CHECK_FALSE(dominates(pts[0], pts[1]));
    CHECK_FALSE(dominates(pts[0], pts[0]));

    const auto front = pareto_front(pts);
    CHECK(front.size() == 3);  // (3, .4), (4, .05), (2, .6)

    const auto counts = pareto_counts(pts, {"slope", "filter"});
    CHECK(counts.at("slope") == 1);
    CHECK(counts.at("filter") == 2);
    // slope's own front is {(5, .1), (3, .4)}; half survives pooling
    CHECK(front_share(pts, "slope", "filter") == 0.5);
    CHECK(front_share(pts, "filter", "slope") == 1.0);
    CHECK(pairwise_dominates(pts, "filter", "slope"));
    CHECK_FALSE(pairwise_dominates(pts, "slope", "filter"));
    CHECK(front_share(pts, "overdrive", "slope") == 0.0);
}

TEST_CASE("method comparison on a coarse grid") {
    CompareGrids grids{linear_grid(0.0, 2.0, 21), log_grid(0.1, 2.0, 6), log_grid(0.01, 0.9, 10)};
    CompareOptions opt;
    opt.operating_points = 2;
    opt.filter.phases = 8;
    const auto pts = compare_methods(0.01, 3.0, grids, opt);
    std::map<std::string, int> per;
    for (const auto& p : pts) {
        ++per[p.method];
        CHECK(std::isfinite(p.n_w));
        CHECK(p.o_w >= 0.0);
    }
    CHECK(per["slope"] == 21);
    CHECK(per["filter"] > 0);
    CHECK(per["overdrive"] > 0);
    for (const char* m : {"slope", "filter", "overdrive"}) {
        const double share = front_share(pts, m, "slope");
        CHECK(share >= 0.0);
        CHECK(share <= 1.0);
    }

    // without interference slope compensation is deadbeat at zero slope
    const auto clean = compare_methods(0.0, 3.0, grids, opt);
    const auto best = std::min_element(clean.begin(), clean.end(),
                                       [](const auto& a, const auto& b) { return a.n_w < b.n_w; });
    CHECK(best->n_w == 0.0);
    CHECK_THROWS_AS(compare_methods(-0.1, 3.0, grids, opt), ValidationError);
}
