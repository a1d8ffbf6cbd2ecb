#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>

#include "nfloc/channel.hpp"
#include "nfloc/geometry.hpp"
#include "nfloc/scenario.hpp"
#include "oracles.hpp"

using namespace nfloc;

namespace {

// Impedance-style Fresnel formulation (eta2/eta1 = 1/sqrt(eps), non-magnetic);
// algebraically equal to the refraction-index form used by the library but
// computed through a different route. Signs follow the propagation convention
// where both polarizations approach -1 at grazing incidence.
std::complex<double> fresnel_impedance_form(double incidence, std::complex<double> eps,
                                            Polarization pol) {
    const double ci = std::cos(incidence);
    const double si = std::sin(incidence);
    const std::complex<double> eta_ratio = 1.0 / std::sqrt(eps);  // eta2 / eta1
    const std::complex<double> ct = std::sqrt(1.0 - si * si / eps);
    if (pol == Polarization::perpendicular)
        return (eta_ratio * ci - ct) / (eta_ratio * ci + ct);
    return (ci - eta_ratio * ct) / (ci + eta_ratio * ct);
}

}  // namespace

TEST_CASE("element gain pattern") {
    const GainModel model;

    SUBCASE("boresight value") {
        CHECK(channel::element_gain(0.0, 0.0, model) ==
              doctest::Approx(std::pow(10.0, 0.8) + 1e-4).epsilon(1e-12));
    }
    SUBCASE("zero outside the field of view") {
        CHECK(channel::element_gain(100.0 * M_PI / 180.0, 0.0, model) == 0.0);
        CHECK(channel::element_gain(0.0, -100.0 * M_PI / 180.0, model) == 0.0);
    }
    SUBCASE("half-power beamwidth fixes beta") {
        const double half = std::pow(std::cos(32.5 * M_PI / 180.0), 2.0 * model.beta);
        CHECK(half > 0.49);
        CHECK(half < 0.51);
        CHECK(model.beta == doctest::Approx(2.03).epsilon(0.01));
        CHECK(beta_for_half_power_beamwidth(65.0 * M_PI / 180.0) ==
              doctest::Approx(model.beta).epsilon(1e-12));
    }
    SUBCASE("even and continuous inside the field of view") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> ang(-M_PI / 2.0 + 1e-3, M_PI / 2.0 - 1e-3);
        for (int i = 0; i < 100; ++i) {
            const double az = ang(rng), el = ang(rng);
            CHECK(channel::element_gain(az, el, model) ==
                  doctest::Approx(channel::element_gain(-az, el, model)).epsilon(1e-12));
            CHECK(channel::element_gain(az, el, model) ==
                  doctest::Approx(channel::element_gain(az, -el, model)).epsilon(1e-12));
            const double here = channel::element_gain(az, el, model);
            const double near = channel::element_gain(az + 1e-9, el, model);
            CHECK(std::abs(here - near) < 1e-6);
        }
    }
}

TEST_CASE("fresnel coefficient") {
    GroundModel ground;

    SUBCASE("vacuum gives no reflection") {
        ground.permittivity = {1.0, 0.0};
        for (const auto pol : {Polarization::perpendicular, Polarization::parallel}) {
            ground.polarization = pol;
            CHECK(std::abs(channel::fresnel_coefficient(0.3, ground)) < 1e-14);
        }
    }
    SUBCASE("grazing limit approaches -1 for both polarizations") {
        for (const auto pol : {Polarization::perpendicular, Polarization::parallel}) {
            ground.polarization = pol;
            const auto gamma = channel::fresnel_coefficient(M_PI / 2.0 - 1e-7, ground);
            CHECK(std::abs(gamma - std::complex<double>(-1.0, 0.0)) < 1e-3);
        }
    }
    SUBCASE("matches the impedance formulation") {
        for (const auto pol : {Polarization::perpendicular, Polarization::parallel}) {
            ground.polarization = pol;
            for (double angle = 0.0; angle < M_PI / 2.0; angle += 0.01) {
                const auto a = channel::fresnel_coefficient(angle, ground);
                const auto b = fresnel_impedance_form(angle, ground.permittivity, pol);
                CHECK(std::abs(a - b) < 1e-12);
                CHECK(std::abs(a) <= 1.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("path gain") {
    GainModel unity;
    unity.tx_gain = 1.0;
    unity.max_gain = 1.0;
    unity.min_gain = 1e-300;  // negligible floor for the normalization check
    const double lambda = 0.0107;

    CHECK(channel::path_gain(lambda / (4.0 * M_PI), 0, unity, 0.0, 0.0, 1.0, lambda) ==
          doctest::Approx(1.0).epsilon(1e-9));

    const double a1 = channel::path_gain(10.0, 0, unity, 0.0, 0.0, 1.0, lambda);
    const double a2 = channel::path_gain(20.0, 0, unity, 0.0, 0.0, 1.0, lambda);
    CHECK(a1 == doctest::Approx(2.0 * a2).epsilon(1e-12));

    CHECK_THROWS_AS(channel::path_gain(0.0, 0, unity, 0.0, 0.0, 1.0, lambda),
                    std::invalid_argument);

    SUBCASE("link-budget oracle at 25 m") {
        const ScenarioConfig scenario;  // reference constants
        const double d = 25.0;
        const double wavelength = scenario.waveform.wavelength();
        const double alpha = channel::path_gain(d, 0, scenario.gains, 0.0, 0.0, 1.0, wavelength);
        // Friis: Pr = Ptx * Gtx * Grx * (lambda / (4 pi d))^2.
        const double g_rx = scenario.gains.max_gain + scenario.gains.min_gain;
        const double pr = scenario.waveform.tx_power_w * scenario.gains.tx_gain * g_rx *
                          std::pow(wavelength / (4.0 * M_PI * d), 2.0);
        CHECK(alpha * alpha * scenario.waveform.tx_power_w == doctest::Approx(pr).epsilon(1e-12));
    }
}

TEST_CASE("spatial steering") {
    const double lambda = 0.0107;
    SUBCASE("single element at the origin") {
        const auto a = channel::spatial_steering({Eigen::Vector3d::Zero()}, 0.7, -0.2, lambda);
        REQUIRE(a.size() == 1);
        CHECK(std::abs(a[0] - std::complex<double>(1.0, 0.0)) < 1e-15);
    }
    SUBCASE("boresight gives all ones for a y-z layout") {
        const auto elements = make_element_layout(8, lambda);
        const auto a = channel::spatial_steering(elements, 0.0, 0.0, lambda);
        for (Eigen::Index i = 0; i < a.size(); ++i)
            CHECK(std::abs(a[i] - std::complex<double>(1.0, 0.0)) < 1e-12);
    }
    SUBCASE("half-wavelength endfire pair flips sign") {
        const std::vector<Eigen::Vector3d> pair{{0.0, 0.0, 0.0}, {0.0, lambda / 2.0, 0.0}};
        const auto a = channel::spatial_steering(pair, M_PI / 2.0, 0.0, lambda);
        CHECK(std::abs(a[1] - std::complex<double>(-1.0, 0.0)) < 1e-12);
    }
    SUBCASE("unit modulus everywhere") {
        std::mt19937_64 rng(23);
        std::uniform_real_distribution<double> ang(-M_PI, M_PI);
        const auto elements = make_element_layout(4, lambda);
        for (int i = 0; i < 50; ++i) {
            const auto a = channel::spatial_steering(elements, ang(rng), ang(rng) / 2.0, lambda);
            for (Eigen::Index m = 0; m < a.size(); ++m)
                CHECK(std::abs(std::abs(a[m]) - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("frequency steering") {
    Waveform wf;
    wf.n_subcarriers = 16;

    const auto ones = channel::frequency_steering(0.0, wf);
    for (Eigen::Index n = 0; n < ones.size(); ++n)
        CHECK(std::abs(ones[n] - std::complex<double>(1.0, 0.0)) < 1e-15);

    const auto any = channel::frequency_steering(123.456, wf);
    CHECK(std::abs(any[0] - std::complex<double>(1.0, 0.0)) < 1e-15);
    for (Eigen::Index n = 0; n < any.size(); ++n)
        CHECK(std::abs(std::abs(any[n]) - 1.0) < 1e-12);

    const double half_cycle = kSpeedOfLight / (2.0 * wf.subcarrier_spacing_hz);
    const auto flip = channel::frequency_steering(half_cycle, wf);
    CHECK(std::abs(flip[1] - std::complex<double>(-1.0, 0.0)) < 1e-12);
}

TEST_CASE("phase response") {
    const double fc = 28.0e9;
    const double one_wavelength = kSpeedOfLight / fc;
    CHECK(channel::phase_response(one_wavelength, 0, 0.0, 0.0, fc) ==
          doctest::Approx(-2.0 * M_PI).epsilon(1e-12));

    const double base = channel::phase_response(17.0, 0, 0.0, 0.0, fc);
    CHECK(channel::phase_response(17.0, 0, 0.25, 0.0, fc) ==
          doctest::Approx(base + 0.25).epsilon(1e-12));

    const double gr = channel::phase_response(17.0, 1, 0.0, 2.5, fc);
    CHECK(gr - base == doctest::Approx(2.5).epsilon(1e-12));

    CHECK(channel::wrap_phase(3.0 * M_PI) == doctest::Approx(M_PI));
}

TEST_CASE("observation synthesis") {
    ScenarioConfig scenario;
    scenario.waveform.n_subcarriers = 32;  // small for the tests

    geometry::Deployment deployment(1);
    deployment[0].placement = {0.0, 0.0, 1.5};
    deployment[0].rotation =
        Eigen::AngleAxisd(-M_PI / 2.0, Eigen::Vector3d::UnitY()).toRotationMatrix();
    deployment[0].elements = make_element_layout(4, scenario.waveform.wavelength());

    const geometry::Pose pose{{0.0, 25.0, scenario.vehicle_z()},
                              geometry::heading_rotation(0.3)};
    const auto body = geometry::default_vehicle_body();

    SUBCASE("roof array sees the LOS path only and the matrix has rank one") {
        const auto obs =
            channel::synthesize_observation(deployment, pose, scenario, Mode::coherent, body);
        REQUIRE(obs.y.size() == 1);
        CHECK_FALSE(obs.fully_occluded[0]);
        const auto channels =
            channel::compute_channel(deployment, pose, scenario, Mode::coherent, body);
        REQUIRE(channels[0].paths.size() == 1);  // ground bounce outside the field of view
        CHECK(channels[0].paths[0].path == 0);

        const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(obs.y[0]);
        CHECK(svd.singularValues()[1] < 1e-12 * svd.singularValues()[0]);

        // Single path, unit pilots: ||E[Y]||_F^2 = alpha^2 Ptx M N.
        const double alpha = channels[0].paths[0].alpha;
        const double expected = alpha * alpha * scenario.waveform.tx_power_w * 4 *
                                scenario.waveform.n_subcarriers;
        CHECK(obs.y[0].squaredNorm() == doctest::Approx(expected).epsilon(1e-12));
    }

    SUBCASE("noiseless synthesis matches the per-entry oracle") {
        geometry::Deployment two = deployment;
        geometry::SubArraySpec side;
        side.placement = {1.6, 0.9, 0.5};
        side.rotation = geometry::heading_rotation(M_PI / 2.0);
        side.elements = deployment[0].elements;
        two.push_back(side);

        // Heading chosen so the +y side panel faces the base station and
        // picks up both paths.
        const geometry::Pose facing{pose.position, geometry::heading_rotation(2.8)};
        const auto obs =
            channel::synthesize_observation(two, facing, scenario, Mode::incoherent, body);
        const auto channels =
            channel::compute_channel(two, facing, scenario, Mode::incoherent, body);
        REQUIRE(channels[1].paths.size() == 2);
        for (std::size_t k = 0; k < two.size(); ++k) {
            const Eigen::VectorXcd expected =
                oracles::mean_observation(channels[k], scenario.waveform, two[k].elements);
            const Eigen::VectorXcd got =
                Eigen::Map<const Eigen::VectorXcd>(obs.y[k].data(), obs.y[k].size());
            REQUIRE(expected.size() == got.size());
            REQUIRE(expected.cwiseAbs().maxCoeff() > 0.0);
            CHECK((expected - got).cwiseAbs().maxCoeff() <
                  1e-10 * expected.cwiseAbs().maxCoeff());
        }
    }

    SUBCASE("seeded noise is reproducible and sub-array-stable") {
        const auto a =
            channel::synthesize_observation(deployment, pose, scenario, Mode::coherent, body, 42);
        const auto b =
            channel::synthesize_observation(deployment, pose, scenario, Mode::coherent, body, 42);
        CHECK((a.y[0] - b.y[0]).cwiseAbs().maxCoeff() == 0.0);

        const auto c =
            channel::synthesize_observation(deployment, pose, scenario, Mode::coherent, body, 43);
        CHECK((a.y[0] - c.y[0]).cwiseAbs().maxCoeff() > 0.0);
    }

    SUBCASE("noise variance is calibrated") {
        ScenarioConfig loud = scenario;
        loud.waveform.noise_variance_w = 1e-6;
        double sum = 0.0;
        int count = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto noisy = channel::synthesize_observation(deployment, pose, loud,
                                                               Mode::coherent, body, seed);
            const auto clean =
                channel::synthesize_observation(deployment, pose, loud, Mode::coherent, body);
            sum += (noisy.y[0] - clean.y[0]).squaredNorm();
            count += static_cast<int>(noisy.y[0].size());
        }
        CHECK(sum / count == doctest::Approx(1e-6).epsilon(0.1));
    }
}

TEST_CASE("element layouts") {
    const double lambda = 0.0107;
    const auto quad = make_element_layout(4, lambda);
    REQUIRE(quad.size() == 4);
    const auto octo = make_element_layout(8, lambda);
    REQUIRE(octo.size() == 8);
    for (const auto& layout : {quad, octo}) {
        Eigen::Vector3d center = Eigen::Vector3d::Zero();
        for (const auto& q : layout) {
            CHECK(q.x() == 0.0);  // elements live in the local y-z plane
            center += q;
        }
        CHECK(center.norm() < 1e-12);
    }
    CHECK_THROWS_AS(make_element_layout(3, lambda), std::invalid_argument);
}
