// Channel-parameter Fisher information, chain rule to the positioning
// parameter vector, accumulation across sub-arrays and the position error
// bound.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nfloc/channel.hpp"
#include "nfloc/geometry.hpp"
#include "nfloc/scenario.hpp"

namespace nfloc::fim {

enum class ParamKind { x, y, delta_d, delta_phi, alpha_los, alpha_gr, gamma_phase };

struct ParamRef {
    ParamKind kind;
    int sub_array;  // -1 for parameters not tied to one sub-array

    std::string name() const;
};

/// Bijection between named estimation parameters and columns of the position
/// FIM. Layout: [x, y, delta_d, phase offset(s), LOS amplitudes,
/// (GR amplitude, reflection phase) pairs].
class ParamIndexMap {
public:
    ParamIndexMap() = default;
    ParamIndexMap(Mode mode, const std::vector<channel::SubArrayChannel>& channels);
    /// Layout from per-sub-array {LOS visible, GR visible} flags alone.
    ParamIndexMap(Mode mode, const std::vector<std::array<bool, 2>>& path_flags);

    int size() const { return static_cast<int>(params_.size()); }
    Mode mode() const { return mode_; }
    const std::vector<ParamRef>& params() const { return params_; }

    int x_col() const { return 0; }
    int y_col() const { return 1; }
    int delta_d_col() const { return 2; }
    /// Shared column in coherent mode regardless of k.
    int delta_phi_col(int k) const;
    int alpha_los_col(int k) const;  // -1 when sub-array k has no LOS path
    int alpha_gr_col(int k) const;
    int gamma_phase_col(int k) const;

    int n_visible() const { return n_visible_; }
    int n_los() const { return n_los_; }
    int n_gr() const { return n_gr_; }

private:
    Mode mode_ = Mode::coherent;
    std::vector<ParamRef> params_;
    std::unordered_map<int, int> dphi_, alos_, agr_, gph_;
    int n_visible_ = 0, n_los_ = 0, n_gr_ = 0;
};

/// Position FIM with its self-describing index map. `rcond_estimate` is the
/// min/max ratio of the pivoted LDL^T diagonal after Jacobi (unit-diagonal)
/// scaling; the scaling keeps the estimate invariant to the mixed units in
/// eta (meters, radians, amplitudes), so the screening threshold measures
/// geometric degeneracy rather than unit spread.
struct FimResult {
    Eigen::MatrixXd info;
    ParamIndexMap map;
    double rcond_estimate = 0.0;
    bool identifiable = false;
};

/// Factorization summary shared by every consumer of a position FIM: Jacobi
/// scaling, LDL^T, conditioning estimate and the resulting bound.
struct FimFactor {
    bool positive = false;
    double rcond = 0.0;
    double peb = 0.0;  // valid only when positive
};

FimFactor analyze_fim(const Eigen::MatrixXd& info);

struct NonIdentifiableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// True parameter values paired with their index map.
struct EtaVector {
    Eigen::VectorXd values;
    ParamIndexMap map;
};

/// Per-sub-array channel parameters and visibility sets (the xi vectors of
/// every non-occluded path).
std::vector<channel::SubArrayChannel> channel_params(const geometry::Deployment& deployment,
                                                     const geometry::Pose& vehicle,
                                                     const ScenarioConfig& scenario, Mode mode,
                                                     const geometry::VehicleBody& body);

/// FIM of the stacked channel parameters [az, el, d_pseudo, phase, alpha] per
/// visible path: (2/sigma^2) Re{ d mu^H/d xi_i * d mu/d xi_j } with the mean
/// derivatives in closed form. Size 5L x 5L for L visible paths.
Eigen::MatrixXd channel_fim(const channel::SubArrayChannel& sub, const Waveform& waveform,
                            const std::vector<Eigen::Vector3d>& elements);

/// Jacobian of one sub-array's channel parameters with respect to the
/// canonical local parameter block [x, y, delta_d, delta_phi, alpha_los,
/// alpha_gr, gamma_phase]; r_tilde is the sub-array's combined rotation.
Eigen::MatrixXd sub_array_jacobian_canonical(const channel::SubArrayChannel& sub,
                                             const Eigen::Matrix3d& r_tilde, double carrier_hz);

/// Number of columns of the canonical local block.
inline constexpr int kCanonicalCols = 7;

/// Scatter targets of canonical columns for sub-array k in the global map;
/// -1 marks an inactive column.
std::array<int, kCanonicalCols> canonical_column_targets(const ParamIndexMap& map, int k);

/// J_k = d xi_k / d eta for sub-array k, in global index-map layout.
Eigen::MatrixXd jacobian(const geometry::Deployment& deployment, const geometry::Pose& vehicle,
                         const ScenarioConfig& scenario, Mode mode,
                         const geometry::VehicleBody& body, int k);

/// Accumulated position FIM over all sub-arrays: sum_k J_k^T I_xi_k J_k.
FimResult position_fim(const geometry::Deployment& deployment, const geometry::Pose& vehicle,
                       const ScenarioConfig& scenario, Mode mode,
                       const geometry::VehicleBody& body);

/// Position error bound sqrt(tr([I^-1]_{1:2,1:2})). Throws
/// NonIdentifiableError when the FIM is singular or was flagged
/// non-identifiable.
double peb(const FimResult& fim);

/// True eta at a pose: position, sync offsets and the realized path
/// amplitudes/reflection phases.
EtaVector eta_true(const geometry::Deployment& deployment, const geometry::Pose& vehicle,
                   const ScenarioConfig& scenario, Mode mode,
                   const geometry::VehicleBody& body);

}  // namespace nfloc::fim
