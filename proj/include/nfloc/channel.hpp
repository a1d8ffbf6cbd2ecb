// Antenna gain pattern, Fresnel ground reflection, path gains/phases,
// spatial and frequency steering vectors, observation synthesis.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <vector>

#include "nfloc/geometry.hpp"
#include "nfloc/scenario.hpp"

namespace nfloc::channel {

/// Channel state of one visible propagation path at one sub-array.
struct PathSignal {
    int path = 0;               // 0 = LOS, 1 = ground reflection
    double theta_az = 0.0;      // radians, sub-array frame
    double theta_el = 0.0;
    double d_true = 0.0;        // propagation distance, meters
    double d_pseudo = 0.0;      // d_true + delta_d
    double phase = 0.0;         // radians, unwrapped
    double alpha = 0.0;         // linear amplitude
    std::complex<double> reflection{1.0, 0.0};  // Gamma for path 1, 1 for LOS
};

/// Visible paths of one sub-array (occluded paths are omitted).
struct SubArrayChannel {
    std::vector<PathSignal> paths;

    bool has_path(int path) const {
        for (const auto& p : paths)
            if (p.path == path) return true;
        return false;
    }
    const PathSignal* find(int path) const {
        for (const auto& p : paths)
            if (p.path == path) return &p;
        return nullptr;
    }
};

/// Element power gain at (az, el); exactly zero outside the +/-90 deg field
/// of view.
double element_gain(double theta_az, double theta_el, const GainModel& model);

/// Fresnel reflection coefficient for the configured polarization; the angle
/// is measured from the surface normal.
std::complex<double> fresnel_coefficient(double incidence_rad, const GroundModel& ground);

/// Linear path amplitude: sqrt(G_tx * G_rx) * lambda / (4*pi*d), scaled by
/// |Gamma| on the reflected path. Throws for d <= 0.
double path_gain(double d, int path, const GainModel& gains, double theta_az, double theta_el,
                 double gamma_abs, double wavelength);

/// Spatial steering vector over the element positions for a plane wave from
/// (az, el); every entry has unit modulus.
Eigen::VectorXcd spatial_steering(const std::vector<Eigen::Vector3d>& elements, double theta_az,
                                  double theta_el, double wavelength);

/// Frequency-domain steering vector over subcarriers n = 0..N-1:
/// exp(-j*2*pi*delta_f*n*d_pseudo/c).
Eigen::VectorXcd frequency_steering(double d_pseudo, const Waveform& waveform);

/// Unwrapped carrier phase of a path: -2*pi*f_c*d/c + delta_phi, plus the
/// reflection phase on path 1.
double phase_response(double d, int path, double delta_phi, double gamma_phase,
                      double carrier_hz);

/// Wrap to (-pi, pi] for display; internal phases stay unwrapped.
double wrap_phase(double phase);

/// Channel parameters for every sub-array of a deployment at a vehicle pose.
/// Occluded paths are dropped; a fully occluded sub-array has an empty list.
/// `sync_override` substitutes the scenario's true offsets (used when probing
/// candidate synchronization states).
std::vector<SubArrayChannel> compute_channel(const geometry::Deployment& deployment,
                                             const geometry::Pose& vehicle,
                                             const ScenarioConfig& scenario, Mode mode,
                                             const geometry::VehicleBody& body,
                                             const SyncOffsets* sync_override = nullptr);

struct Observations {
    std::vector<Eigen::MatrixXcd> y;      // per sub-array, M_k x N
    std::vector<bool> fully_occluded;     // flagged: matrix is noise-only
};

/// Spatial-frequency observation matrices Y_k over all sub-arrays. With a
/// seed, adds circular complex Gaussian noise of variance sigma^2 per entry;
/// the stream for sub-array k depends only on (seed, k), so realizations are
/// reproducible independently of the deployment size.
Observations synthesize_observation(const geometry::Deployment& deployment,
                                    const geometry::Pose& vehicle,
                                    const ScenarioConfig& scenario, Mode mode,
                                    const geometry::VehicleBody& body,
                                    std::optional<std::uint64_t> noise_seed = std::nullopt);

}  // namespace nfloc::channel
