// Compressed maximum-likelihood objectives (nuisance amplitudes eliminated
// per sub-array) and grid scans of the ambiguity surface.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "nfloc/channel.hpp"
#include "nfloc/geometry.hpp"
#include "nfloc/scenario.hpp"

namespace nfloc::likelihood {

struct ObjectiveValue {
    double value = 0.0;       // sum of squared residuals, >= 0
    bool regularized = false;  // a near-singular normal system was ridged
};

/// Candidate position/synchronization for objective evaluation.
struct Candidate {
    geometry::Pose pose;  // candidate x, y with the known z and heading
    SyncOffsets sync;     // candidate delta_d / delta_phi, fixed during scans
};

/// Coherent sum-of-squares objective: per sub-array the LOS amplitude is a
/// free real scalar, the ground-reflection coefficient a free complex scalar;
/// both are eliminated by a real-stacked least squares against the candidate
/// steering columns.
ObjectiveValue objective_coherent(const std::vector<Eigen::MatrixXcd>& observations,
                                  const geometry::Deployment& deployment,
                                  const Candidate& candidate, const ScenarioConfig& scenario,
                                  const geometry::VehicleBody& body);

/// Incoherent objective: both path coefficients free complex scalars per
/// sub-array (a plain complex least squares), so it never exceeds the
/// coherent objective.
ObjectiveValue objective_incoherent(const std::vector<Eigen::MatrixXcd>& observations,
                                    const geometry::Deployment& deployment,
                                    const Candidate& candidate, const ScenarioConfig& scenario,
                                    const geometry::VehicleBody& body);

/// sqrt(L) sampled over an (x, y) grid around the true position; the scan is
/// noiseless and keeps the sync parameters fixed (truth by default).
struct SurfaceScan {
    Eigen::VectorXd x_axis;  // meters, global
    Eigen::VectorXd y_axis;
    Eigen::MatrixXd sqrt_values;  // rows follow y_axis, cols follow x_axis
    double spacing = 0.0;
    Mode mode = Mode::coherent;
    double true_x = 0.0, true_y = 0.0;
    bool any_regularized = false;
};

struct ScanOptions {
    int threads = 1;
    const SyncOffsets* sync = nullptr;  // defaults to the scenario truth
    double offset_x = 0.0;              // grid shift, e.g. half a cell
    double offset_y = 0.0;
};

SurfaceScan surface_scan(const geometry::Deployment& deployment, const geometry::Pose& true_pose,
                         const ScenarioConfig& scenario, Mode mode,
                         const geometry::VehicleBody& body, double half_extent_m,
                         double spacing_m, const ScanOptions& options = {});

/// One-dimensional cut through the objective along the x or y axis at the
/// true value of the other coordinate. Returns (coordinate, sqrt(L)) pairs.
std::vector<std::pair<double, double>> axis_cut(const geometry::Deployment& deployment,
                                                const geometry::Pose& true_pose,
                                                const ScenarioConfig& scenario, Mode mode,
                                                const geometry::VehicleBody& body, char axis,
                                                double half_extent_m, double spacing_m,
                                                const ScanOptions& options = {});

}  // namespace nfloc::likelihood
