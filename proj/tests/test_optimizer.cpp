#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "nfloc/metric.hpp"
#include "nfloc/optimizer.hpp"

using namespace nfloc;
using optimizer::Selection;

namespace {

// n choose k without overflow for the sizes used here.
double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double result = 1.0;
    for (int i = 0; i < k; ++i) result = result * (n - i) / (i + 1);
    return result;
}

// Small grid on the default hull: two roof singles and three mirrored pairs.
optimizer::Grid toy_grid() {
    const auto full = optimizer::default_grid();
    optimizer::Grid toy;
    int id = 0;
    for (const int source : {1, 2, 7, 11, 15}) {
        optimizer::GridPoint p = full.points[static_cast<std::size_t>(source)];
        p.id = id++;
        toy.points.push_back(std::move(p));
    }
    return toy;
}

metric::PoseSamplingSpec coarse_sampling(const ScenarioConfig& scenario) {
    metric::PoseSamplingSpec spec = metric::default_sampling(scenario);
    spec.n_r = 3;
    spec.r_min_m = 10.0;
    spec.r_step_m = 20.0;
    spec.n_phi = 4;
    spec.phi_step_rad = M_PI / 2.0 / 4.0;
    return spec;
}

ScenarioConfig fast_scenario() {
    ScenarioConfig s;
    s.waveform.n_subcarriers = 48;
    return s;
}

}  // namespace

TEST_CASE("default grid structure") {
    const auto grid = optimizer::default_grid();
    grid.validate();
    CHECK(grid.size() == 20);
    int singles = 0, pairs = 0;
    for (const auto& p : grid.points) (p.mirrored ? pairs : singles) += 1;
    CHECK(singles == 6);
    CHECK(pairs == 14);
    CHECK(grid.capacity() == 34);

    // Placements sit on the default hull surface.
    for (const auto& p : grid.points)
        for (const auto& placement : p.placements) {
            const bool on_face = std::abs(std::abs(placement.x()) - 2.0) < 1e-12 ||
                                 std::abs(std::abs(placement.y()) - 0.9) < 1e-12 ||
                                 std::abs(placement.z() - 1.5) < 1e-12;
            CHECK(on_face);
        }
}

TEST_CASE("selection enumeration counts") {
    const auto grid = optimizer::default_grid();

    SUBCASE("matches the binomial convolution for every k") {
        std::size_t total = 0;
        for (int k = 1; k <= grid.capacity(); ++k) {
            const auto selections = optimizer::enumerate_selections(grid, k);
            double expected = 0.0;
            for (int j = 0; 2 * j <= k; ++j) expected += binomial(14, j) * binomial(6, k - 2 * j);
            CHECK(static_cast<double>(selections.size()) == expected);
            total += selections.size();

            if (k == 12) CHECK(selections.size() == 48412);
            if (k == 6) CHECK(selections.size() == 1940);
            if (k == 1) CHECK(selections.size() == 6);
        }
        CHECK(total == 1048575);  // every nonempty subset of 20 points
    }

    SUBCASE("no duplicates, deterministic lexicographic order") {
        const auto selections = optimizer::enumerate_selections(grid, 6);
        std::set<Selection> unique(selections.begin(), selections.end());
        CHECK(unique.size() == selections.size());
        for (std::size_t i = 1; i < selections.size(); ++i)
            CHECK(optimizer::selection_lex_less(selections[i - 1], selections[i]));
        for (const Selection mask : selections)
            CHECK(optimizer::selection_count(grid, mask) == 6);
    }

    SUBCASE("capacity-sized selection is unique") {
        const auto all = optimizer::enumerate_selections(grid, grid.capacity());
        REQUIRE(all.size() == 1);
        CHECK(all[0] == (Selection{1} << 20) - 1);
    }

    SUBCASE("infeasible k yields an empty sequence") {
        optimizer::Grid pairs_only;
        int id = 0;
        for (const auto& p : optimizer::default_grid().points) {
            if (!p.mirrored) continue;
            optimizer::GridPoint q = p;
            q.id = id++;
            pairs_only.points.push_back(std::move(q));
        }
        CHECK(optimizer::enumerate_selections(pairs_only, 13).empty());
    }
}

TEST_CASE("selections realize mirror-closed deployments") {
    const auto grid = optimizer::default_grid();
    const auto elements = make_element_layout(4, 0.0107);
    for (const Selection mask : {Selection{0b1011}, Selection{0b1100011}, Selection{1} << 19}) {
        const auto deployment = optimizer::realize_deployment(grid, mask, elements);
        CHECK(static_cast<int>(deployment.size()) ==
              optimizer::selection_count(grid, mask));
        // Multiset of placements is invariant under the center-plane mirror.
        std::multiset<std::string> placements, mirrored;
        for (const auto& sub : deployment) {
            char buf[64];
            const auto key = [&](const Eigen::Vector3d& v) {
                std::snprintf(buf, sizeof(buf), "%.9f,%.9f,%.9f", v.x(), v.y(), v.z());
                return std::string(buf);
            };
            placements.insert(key(sub.placement));
            mirrored.insert(key(geometry::mirror_across_center_plane(sub.placement)));
        }
        CHECK(placements == mirrored);
    }
}

TEST_CASE("selection lexicographic order") {
    // Subsets as ascending id sequences: {0,2} < {1,2}, {0} < {1}.
    CHECK(optimizer::selection_lex_less(0b101, 0b110));
    CHECK_FALSE(optimizer::selection_lex_less(0b110, 0b101));
    CHECK(optimizer::selection_lex_less(0b001, 0b010));
    CHECK_FALSE(optimizer::selection_lex_less(0b001, 0b001));
}

TEST_CASE("exhaustive search on a toy grid against re-evaluation") {
    const ScenarioConfig scenario = fast_scenario();
    const auto body = geometry::default_vehicle_body();
    const auto grid = toy_grid();
    const auto elements = make_element_layout(4, scenario.waveform.wavelength());
    const auto sampling = coarse_sampling(scenario);

    const auto result = optimizer::exhaustive_search(grid, 4, scenario, Mode::coherent, sampling,
                                                     elements, body, {2});
    CHECK(result.counts.total == 6);  // 2 singles + 1 pair, or 2 pairs
    CHECK(result.counts.total == result.counts.identifiable + result.counts.discarded);
    CHECK(result.realized_k == 4);

    // Independent re-evaluation through the general metric path.
    double best_rho = std::numeric_limits<double>::infinity();
    Selection best_mask = 0;
    for (const Selection mask : optimizer::enumerate_selections(grid, 4)) {
        const auto deployment = optimizer::realize_deployment(grid, mask, elements);
        const auto map =
            metric::sample_peb_map(deployment, sampling, scenario, Mode::coherent, body, {2});
        if (map.n_ok() < map.n_cells()) continue;
        const double rho = metric::rho(map, scenario.peb_percentile_epsilon);
        if (rho < best_rho) {
            best_rho = rho;
            best_mask = mask;
        }
    }
    CHECK(result.best == best_mask);
    CHECK(result.best_rho == doctest::Approx(best_rho).epsilon(1e-12));

    // Whole ranking agrees with the independent route.
    for (const auto& [mask, rho] : result.ranking) {
        const auto deployment = optimizer::realize_deployment(grid, mask, elements);
        const auto map =
            metric::sample_peb_map(deployment, sampling, scenario, Mode::coherent, body, {2});
        CHECK(rho ==
              doctest::Approx(metric::rho(map, scenario.peb_percentile_epsilon)).epsilon(1e-12));
    }
    for (std::size_t i = 1; i < result.ranking.size(); ++i)
        CHECK(result.ranking[i - 1].second <= result.ranking[i].second);
}

TEST_CASE("greedy search") {
    const ScenarioConfig scenario = fast_scenario();
    const auto body = geometry::default_vehicle_body();
    const auto grid = toy_grid();
    const auto elements = make_element_layout(4, scenario.waveform.wavelength());
    const auto sampling = coarse_sampling(scenario);

    SUBCASE("k equal to the initial size returns the initial selection") {
        const Selection initial = Selection{1} << 2;  // one mirrored pair
        const auto result = optimizer::greedy_search(grid, 2, scenario, Mode::coherent, sampling,
                                                     elements, body, initial, {2});
        CHECK(result.best == initial);
        CHECK(result.evaluations == 1);
        CHECK(result.greedy_trace.size() == 1);
    }

    SUBCASE("trace is non-increasing and never beats exhaustive") {
        const auto greedy = optimizer::greedy_search(grid, 6, scenario, Mode::coherent, sampling,
                                                     elements, body, std::nullopt, {2});
        for (std::size_t i = 1; i < greedy.greedy_trace.size(); ++i)
            CHECK(greedy.greedy_trace[i] <= greedy.greedy_trace[i - 1] * (1.0 + 1e-9));
        CHECK(greedy.realized_k == 6);

        const auto exhaustive = optimizer::exhaustive_search(grid, 6, scenario, Mode::coherent,
                                                             sampling, elements, body, {2});
        CHECK(greedy.best_rho >= exhaustive.best_rho * (1.0 - 1e-12));
    }

    SUBCASE("default initial selection is the roof pair nearest the center") {
        const auto full = optimizer::default_grid();
        CHECK(optimizer::default_greedy_initial(full) == Selection{1} << 7);
        CHECK(optimizer::default_greedy_initial(grid) == Selection{1} << 2);
    }
}

TEST_CASE("infeasible trials throw") {
    const ScenarioConfig scenario = fast_scenario();
    const auto body = geometry::default_vehicle_body();
    const auto elements = make_element_layout(4, scenario.waveform.wavelength());
    const auto sampling = coarse_sampling(scenario);

    optimizer::Grid pairs_only;
    int id = 0;
    for (const int source : {7, 11, 15}) {
        optimizer::GridPoint p = optimizer::default_grid().points[static_cast<std::size_t>(source)];
        p.id = id++;
        pairs_only.points.push_back(std::move(p));
    }
    CHECK_THROWS_AS(optimizer::exhaustive_search(pairs_only, 3, scenario, Mode::coherent,
                                                 sampling, elements, body, {1}),
                    optimizer::InfeasibleTrialError);
    CHECK_THROWS_AS(optimizer::greedy_search(pairs_only, 7, scenario, Mode::coherent, sampling,
                                             elements, body, std::nullopt, {1}),
                    optimizer::InfeasibleTrialError);
}
