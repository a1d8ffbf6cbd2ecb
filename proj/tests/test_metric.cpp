#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "nfloc/metric.hpp"
#include "nfloc/optimizer.hpp"

using namespace nfloc;

namespace {

metric::PebMap synthetic_map(const std::vector<double>& cells, int n_phi, int n_r) {
    REQUIRE(static_cast<int>(cells.size()) == n_phi * n_r);
    metric::PebMap map;
    map.sampling.n_phi = n_phi;
    map.sampling.n_r = n_r;
    map.peb.resize(n_phi, n_r);
    map.ok.resize(n_phi, n_r);
    int i = 0;
    for (int p = 0; p < n_phi; ++p)
        for (int r = 0; r < n_r; ++r, ++i) {
            map.peb(p, r) = cells[static_cast<std::size_t>(i)];
            map.ok(p, r) = std::isfinite(cells[static_cast<std::size_t>(i)]) ? 1 : 0;
        }
    return map;
}

}  // namespace

TEST_CASE("default sampling design") {
    const ScenarioConfig scenario;
    const auto spec = metric::default_sampling(scenario);
    CHECK(spec.n_phi == 60);
    CHECK(spec.n_r == 20);
    CHECK(spec.n_cells() == 1200);
    CHECK(spec.r_at(0) == doctest::Approx(5.0));
    CHECK(spec.r_at(19) == doctest::Approx(73.4));
    CHECK(spec.phi_at(0) == doctest::Approx(-M_PI / 2.0));
    CHECK(spec.phi_at(59) == doctest::Approx(87.0 * M_PI / 180.0));
    CHECK(spec.vehicle_z_m == doctest::Approx(-19.8));
}

TEST_CASE("rho nearest-rank percentile") {
    std::vector<double> cells(100);
    for (int i = 0; i < 100; ++i) cells[static_cast<std::size_t>(i)] = i + 1.0;
    std::shuffle(cells.begin(), cells.end(), std::mt19937_64(2));
    const auto map = synthetic_map(cells, 10, 10);

    CHECK(metric::rho(map, 0.1) == doctest::Approx(90.0));
    CHECK(metric::rho(map, 0.0) == doctest::Approx(100.0));

    SUBCASE("constant map") {
        const auto flat = synthetic_map(std::vector<double>(100, 7.25), 10, 10);
        for (const double eps : {0.0, 0.05, 0.5, 0.99})
            CHECK(metric::rho(flat, eps) == doctest::Approx(7.25));
    }
    SUBCASE("monotone non-increasing in epsilon") {
        double last = metric::rho(map, 0.0);
        for (double eps = 0.05; eps < 1.0; eps += 0.05) {
            const double value = metric::rho(map, eps);
            CHECK(value <= last + 1e-12);
            last = value;
        }
    }
    SUBCASE("permutation invariance") {
        std::vector<double> shuffled = cells;
        std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));
        const auto permuted = synthetic_map(shuffled, 10, 10);
        for (const double eps : {0.0, 0.1, 0.37})
            CHECK(metric::rho(permuted, eps) == doctest::Approx(metric::rho(map, eps)));
    }
    SUBCASE("non-identifiable cells dominate") {
        std::vector<double> mixed(100, 1.0);
        for (int i = 0; i < 15; ++i)
            mixed[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();
        const auto bad = synthetic_map(mixed, 10, 10);
        CHECK(std::isinf(metric::rho(bad, 0.1)));   // 15% bad > epsilon
        CHECK(metric::rho(bad, 0.2) == doctest::Approx(1.0));
    }
}

TEST_CASE("eccdf") {
    SUBCASE("single cell steps from one to zero") {
        const auto map = synthetic_map({3.5}, 1, 1);
        const auto curve = metric::eccdf(map);
        REQUIRE(curve.size() == 1);
        CHECK(curve[0].first == doctest::Approx(3.5));
        CHECK(curve[0].second == doctest::Approx(0.0));
    }
    SUBCASE("matches a sort-and-count oracle and bounds rho") {
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> value(0.1, 10.0);
        std::vector<double> cells(1200);
        for (auto& c : cells) c = value(rng);
        cells[17] = cells[18];  // duplicated values collapse to one step
        const auto map = synthetic_map(cells, 60, 20);
        const auto curve = metric::eccdf(map);

        double prev = 1.0;
        for (const auto& [threshold, fraction] : curve) {
            int above = 0;
            for (const double c : cells) above += c > threshold ? 1 : 0;
            CHECK(fraction == doctest::Approx(above / 1200.0));
            CHECK(fraction <= prev + 1e-12);
            prev = fraction;
        }

        // Quantile/ECCDF duality at the rho value.
        const double eps = 0.1;
        const double rho = metric::rho(map, eps);
        int above = 0;
        for (const double c : cells) above += c > rho ? 1 : 0;
        CHECK(above / 1200.0 <= eps);
    }
}

TEST_CASE("PEB map sampling") {
    ScenarioConfig scenario;
    scenario.waveform.n_subcarriers = 64;
    const auto body = geometry::default_vehicle_body();
    const auto grid = optimizer::default_grid();
    const auto elements = make_element_layout(4, scenario.waveform.wavelength());
    const geometry::Deployment deployment = optimizer::realize_deployment(
        grid, (optimizer::Selection{1} << 7) | (optimizer::Selection{1} << 4) | 1, elements);

    metric::PoseSamplingSpec spec = metric::default_sampling(scenario);
    spec.n_r = 4;
    spec.n_phi = 6;

    const auto map = metric::sample_peb_map(deployment, spec, scenario, Mode::coherent, body,
                                            {/*threads=*/2});
    CHECK(map.peb.rows() == 6);
    CHECK(map.peb.cols() == 4);
    CHECK(map.n_ok() > 0);

    SUBCASE("stored cells reproduce a from-scratch FIM evaluation") {
        for (int i = 0; i < spec.n_phi; ++i)
            for (int j = 0; j < spec.n_r; ++j) {
                if (!map.ok(i, j)) continue;
                const auto fr = fim::position_fim(deployment, spec.pose_at(i, j), scenario,
                                                  Mode::coherent, body);
                CHECK(map.peb(i, j) == doctest::Approx(fim::peb(fr)).epsilon(1e-12));
            }
    }

    SUBCASE("thread count does not change the result") {
        const auto serial =
            metric::sample_peb_map(deployment, spec, scenario, Mode::coherent, body, {1});
        for (int i = 0; i < spec.n_phi; ++i)
            for (int j = 0; j < spec.n_r; ++j) {
                CHECK(serial.ok(i, j) == map.ok(i, j));
                if (map.ok(i, j)) CHECK(serial.peb(i, j) == map.peb(i, j));
            }
    }

    SUBCASE("ground reflection toggle changes the map") {
        ScenarioConfig los_only = scenario;
        los_only.ground_reflection = false;
        const auto map_los =
            metric::sample_peb_map(deployment, spec, scenario, Mode::incoherent, body, {2});
        const auto map_gr =
            metric::sample_peb_map(deployment, spec, los_only, Mode::incoherent, body, {2});
        bool differs = false;
        for (int i = 0; i < spec.n_phi && !differs; ++i)
            for (int j = 0; j < spec.n_r && !differs; ++j)
                if (map_los.ok(i, j) && map_gr.ok(i, j) &&
                    std::abs(map_los.peb(i, j) - map_gr.peb(i, j)) >
                        1e-6 * map_los.peb(i, j))
                    differs = true;
        CHECK(differs);
    }
}

TEST_CASE("mirror-symmetric deployments give mirror-symmetric maps") {
    // The scene reflection pairs heading phi with pi - phi at the sampled
    // positions [0, r, z]: reflecting across the global x-z plane negates both
    // the heading and the position's y, and a half-turn about the z-axis
    // brings the position back.
    ScenarioConfig scenario;
    scenario.waveform.n_subcarriers = 64;
    const auto body = geometry::default_vehicle_body();
    const auto grid = optimizer::default_grid();
    const auto elements = make_element_layout(4, scenario.waveform.wavelength());
    const geometry::Deployment deployment = optimizer::realize_deployment(
        grid, (optimizer::Selection{1} << 13) | (optimizer::Selection{1} << 6) | (1 << 4),
        elements);

    metric::PoseSamplingSpec spec = metric::default_sampling(scenario);
    spec.n_r = 2;
    spec.n_phi = 8;
    const auto map =
        metric::sample_peb_map(deployment, spec, scenario, Mode::coherent, body, {2});

    for (int i = 0; i < spec.n_phi; ++i)
        for (int j = 0; j < spec.n_r; ++j) {
            if (!map.ok(i, j)) continue;
            const geometry::Pose mirrored{
                {0.0, spec.r_at(j), spec.vehicle_z_m},
                geometry::heading_rotation(M_PI - spec.phi_at(i))};
            const auto fr =
                fim::position_fim(deployment, mirrored, scenario, Mode::coherent, body);
            REQUIRE(fr.identifiable);
            CHECK(map.peb(i, j) == doctest::Approx(fim::peb(fr)).epsilon(1e-9));
        }
}

TEST_CASE("single roof sub-array: PEB grows with range") {
    ScenarioConfig scenario;
    scenario.ground_reflection = false;  // LOS-only variant
    const auto body = geometry::default_vehicle_body();
    const auto grid = optimizer::default_grid();
    const auto elements = make_element_layout(4, scenario.waveform.wavelength());
    const geometry::Deployment roof = optimizer::realize_deployment(grid, 1 << 1, elements);

    metric::PoseSamplingSpec spec = metric::default_sampling(scenario);
    spec.n_phi = 1;
    spec.phi_start_rad = 0.0;
    spec.n_r = 10;
    spec.r_min_m = 12.0;
    spec.r_step_m = 6.0;

    const auto map = metric::sample_peb_map(roof, spec, scenario, Mode::coherent, body, {2});
    REQUIRE(map.n_ok() == 10);
    for (int j = 1; j < spec.n_r; ++j) CHECK(map.peb(0, j) > map.peb(0, j - 1));
}
