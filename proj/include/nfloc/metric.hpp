// PEB sampling over the (heading, range) operating region, identifiability
// screening, the percentile metric rho, and ECCDF extraction.
#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "nfloc/fim.hpp"
#include "nfloc/geometry.hpp"
#include "nfloc/scenario.hpp"

namespace nfloc::metric {

/// FIM cells with a smaller reciprocal-condition estimate are screened out.
inline constexpr double kRcondThreshold = 1e-12;

/// Pose sampling design: vehicle positions [0, r, z] and headings about the
/// z-axis. Defaults follow the operating region of 5..73.4 m in 20 steps and
/// headings -90..87 deg in 3 deg steps (1200 samples).
struct PoseSamplingSpec {
    double r_min_m = 5.0;
    double r_step_m = 3.6;
    int n_r = 20;
    double phi_start_rad = -M_PI / 2.0;
    double phi_step_rad = M_PI / 60.0;  // 3 deg
    int n_phi = 60;
    double vehicle_z_m = -19.8;

    double r_at(int j) const { return r_min_m + r_step_m * j; }
    double phi_at(int i) const { return phi_start_rad + phi_step_rad * i; }
    geometry::Pose pose_at(int i_phi, int j_r) const {
        return {Eigen::Vector3d(0.0, r_at(j_r), vehicle_z_m),
                geometry::heading_rotation(phi_at(i_phi))};
    }
    int n_cells() const { return n_r * n_phi; }
    void validate() const {
        if (n_r < 1 || n_phi < 1) throw std::invalid_argument("sampling: empty design");
    }
};

/// Default design with the vehicle reference height taken from the scenario.
PoseSamplingSpec default_sampling(const ScenarioConfig& scenario);

/// PEB samples over the pose design; cells where the FIM is singular or
/// ill-conditioned carry ok = false.
struct PebMap {
    PoseSamplingSpec sampling;
    Eigen::MatrixXd peb;                          // n_phi x n_r, meters
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> ok;
    geometry::Deployment deployment;

    int n_ok() const { return static_cast<int>(ok.cast<int>().sum()); }
    int n_cells() const { return static_cast<int>(ok.size()); }
};

struct SamplingOptions {
    int threads = 1;
};

/// Evaluates the PEB at every design cell.
PebMap sample_peb_map(const geometry::Deployment& deployment, const PoseSamplingSpec& sampling,
                      const ScenarioConfig& scenario, Mode mode,
                      const geometry::VehicleBody& body, const SamplingOptions& options = {});

/// (1-epsilon) percentile of the PEB over all cells by the nearest-rank rule;
/// non-identifiable cells count as +infinity. Throws on an empty map.
double rho(const PebMap& map, double epsilon);

/// Empirical complementary CDF: fraction of cells exceeding each distinct
/// finite threshold, as a non-increasing step function.
std::vector<std::pair<double, double>> eccdf(const PebMap& map);

}  // namespace nfloc::metric
