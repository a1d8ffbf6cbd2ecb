// Scenario configuration: waveform numerology, antenna gain model, ground
// electrical model, synchronization offsets and global scene constants.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <vector>

#include "nfloc/geometry.hpp"

namespace nfloc {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Phase-synchronization regime across sub-arrays.
enum class Mode { coherent, incoherent };

/// OFDM downlink pilot waveform. Pilots are unit-modulus by contract.
struct Waveform {
    double carrier_hz = 28.0e9;
    double subcarrier_spacing_hz = 120.0e3;
    int n_subcarriers = 792;
    double tx_power_w = 1.0;
    double noise_variance_w = 3.81e-12;

    double wavelength() const { return kSpeedOfLight / carrier_hz; }
    double bandwidth_hz() const { return subcarrier_spacing_hz * n_subcarriers; }

    void validate() const {
        if (n_subcarriers < 1) throw std::invalid_argument("waveform: n_subcarriers must be >= 1");
        if (!(subcarrier_spacing_hz > 0.0))
            throw std::invalid_argument("waveform: subcarrier spacing must be > 0");
        if (!(carrier_hz > 0.0)) throw std::invalid_argument("waveform: carrier must be > 0");
        if (!(tx_power_w > 0.0)) throw std::invalid_argument("waveform: tx power must be > 0");
        if (!(noise_variance_w > 0.0))
            throw std::invalid_argument("waveform: noise variance must be > 0");
    }
};

/// Element power pattern G_max cos^{2*beta}(az) cos^{2*beta}(el) + G_min inside
/// the +/-90 deg field of view, zero outside. All gains linear.
struct GainModel {
    double tx_gain = 10.0;              // 10 dBi
    double max_gain = 6.309573444801933;  // 8 dBi
    double min_gain = 1e-4;               // -40 dBi
    double beta = 2.0347891491546406;     // 65 deg half-power beamwidth

    void validate() const {
        if (!(tx_gain > 0.0 && max_gain > 0.0 && min_gain > 0.0))
            throw std::invalid_argument("gain model: gains must be > 0");
        if (!(beta > 0.0)) throw std::invalid_argument("gain model: beta must be > 0");
    }
};

/// Exponent beta such that the pattern's half-power beamwidth equals `hpbw`.
double beta_for_half_power_beamwidth(double hpbw_rad);

enum class Polarization { perpendicular, parallel };

/// Ground electrical model for the specular reflection coefficient.
struct GroundModel {
    std::complex<double> permittivity{5.0, 0.2};
    Polarization polarization = Polarization::perpendicular;

    void validate() const {
        if (permittivity.real() < 1.0)
            throw std::invalid_argument("ground model: Re(permittivity) must be >= 1");
    }
};

/// True synchronization offsets used when generating signals. delta_phi holds
/// either one shared value or one value per sub-array.
struct SyncOffsets {
    double delta_d_m = 0.0;
    std::vector<double> delta_phi_rad{0.0};

    double delta_phi(int sub_array, Mode mode) const {
        if (delta_phi_rad.empty()) return 0.0;
        if (mode == Mode::coherent) return delta_phi_rad.front();
        return delta_phi_rad[static_cast<std::size_t>(sub_array) % delta_phi_rad.size()];
    }
};

/// Full scene description. The base station emits from the global origin; the
/// ground plane passes through [0, 0, -bs_height].
struct ScenarioConfig {
    double bs_height_m = 20.0;
    double vehicle_ref_height_m = 0.2;  // vehicle reference point above ground
    Waveform waveform;
    GainModel gains;
    GroundModel ground;
    SyncOffsets sync;
    double peb_percentile_epsilon = 0.1;
    bool ground_reflection = true;

    double vehicle_z() const { return -bs_height_m + vehicle_ref_height_m; }

    geometry::ReflectorPlane ground_plane() const {
        return {Eigen::Vector3d(0.0, 0.0, -bs_height_m), Eigen::Vector3d::UnitZ()};
    }

    void validate() const {
        if (!(bs_height_m > 0.0)) throw std::invalid_argument("scenario: bs height must be > 0");
        waveform.validate();
        gains.validate();
        ground.validate();
        if (!(peb_percentile_epsilon >= 0.0 && peb_percentile_epsilon < 1.0))
            throw std::invalid_argument("scenario: percentile epsilon must be in [0, 1)");
    }
};

/// Rectangular sub-array element layout in the local y-z plane, centered at
/// the origin, at half-wavelength pitch. Supported sizes: 4 (2x2) and 8 (4x2,
/// four columns along y).
std::vector<Eigen::Vector3d> make_element_layout(int n_elements, double wavelength);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace nfloc
