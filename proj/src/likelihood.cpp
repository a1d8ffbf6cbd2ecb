#include "nfloc/likelihood.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "nfloc/parallel.hpp"

namespace nfloc::likelihood {

namespace {

constexpr std::complex<double> kJ{0.0, 1.0};
constexpr double kRidgeScale = 1e-12;

// Candidate steering column of one path: sqrt(Ptx) * (b o x) (x) a.
Eigen::VectorXcd steering_column(const channel::PathSignal& path,
                                 const std::vector<Eigen::Vector3d>& elements,
                                 const Waveform& waveform) {
    const Eigen::VectorXcd a =
        channel::spatial_steering(elements, path.theta_az, path.theta_el, waveform.wavelength());
    const Eigen::VectorXcd b = channel::frequency_steering(path.d_pseudo, waveform);
    Eigen::VectorXcd column(a.size() * b.size());
    const double sqrt_ptx = std::sqrt(waveform.tx_power_w);
    for (Eigen::Index n = 0; n < b.size(); ++n)
        column.segment(n * a.size(), a.size()) = (sqrt_ptx * b[n]) * a;
    return column;
}

// Fitted signal energy of the coherent per-sub-array solve. The LOS
// coefficient is real (sign free), the GR coefficient complex, so the
// normal equations are the 3x3 real-stacked system.
double fitted_energy_coherent(const Eigen::VectorXcd* omega_los,
                              const Eigen::VectorXcd* omega_gr, const Eigen::VectorXcd& y,
                              bool* regularized) {
    if (omega_los == nullptr && omega_gr == nullptr) return 0.0;
    if (omega_los == nullptr) {
        // Single complex column: ordinary projection.
        const double g = omega_gr->squaredNorm();
        if (g <= 0.0) return 0.0;
        return std::norm(omega_gr->dot(y)) / g;
    }
    if (omega_gr == nullptr) {
        const double g = omega_los->squaredNorm();
        if (g <= 0.0) return 0.0;
        const double proj = omega_los->dot(y).real();
        return proj * proj / g;
    }
    const double g00 = omega_los->squaredNorm();
    const double g11 = omega_gr->squaredNorm();
    const std::complex<double> g01 = omega_los->dot(*omega_gr);
    Eigen::Matrix3d gram;
    gram << g00, g01.real(), -g01.imag(),
            g01.real(), g11, 0.0,
            -g01.imag(), 0.0, g11;
    Eigen::Vector3d rhs;
    const std::complex<double> p0 = omega_los->dot(y);
    const std::complex<double> p1 = omega_gr->dot(y);
    rhs << p0.real(), p1.real(), p1.imag();

    Eigen::LDLT<Eigen::Matrix3d> ldlt(gram);
    const double trace = gram.trace();
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= kRidgeScale * trace) {
        gram.diagonal().array() += kRidgeScale * trace;
        ldlt.compute(gram);
        if (regularized != nullptr) *regularized = true;
    }
    const Eigen::Vector3d solution = ldlt.solve(rhs);
    return rhs.dot(solution);
}

double fitted_energy_incoherent(const Eigen::VectorXcd* c_los, const Eigen::VectorXcd* c_gr,
                                const Eigen::VectorXcd& y, bool* regularized) {
    if (c_los == nullptr && c_gr == nullptr) return 0.0;
    if (c_los == nullptr || c_gr == nullptr) {
        const Eigen::VectorXcd& c = c_los != nullptr ? *c_los : *c_gr;
        const double g = c.squaredNorm();
        if (g <= 0.0) return 0.0;
        return std::norm(c.dot(y)) / g;
    }
    Eigen::Matrix2cd gram;
    gram << c_los->squaredNorm(), c_los->dot(*c_gr),
            c_gr->dot(*c_los), c_gr->squaredNorm();
    Eigen::Vector2cd rhs(c_los->dot(y), c_gr->dot(y));

    Eigen::LDLT<Eigen::Matrix2cd> ldlt(gram);
    const double trace = gram.trace().real();
    if (ldlt.info() != Eigen::Success ||
        ldlt.vectorD().real().minCoeff() <= kRidgeScale * trace) {
        gram.diagonal().array() += kRidgeScale * trace;
        ldlt.compute(gram);
        if (regularized != nullptr) *regularized = true;
    }
    const Eigen::Vector2cd solution = ldlt.solve(rhs);
    return rhs.dot(solution).real();
}

ObjectiveValue objective_impl(const std::vector<Eigen::MatrixXcd>& observations,
                              const geometry::Deployment& deployment, const Candidate& candidate,
                              const ScenarioConfig& scenario,
                              const geometry::VehicleBody& body, Mode mode) {
    if (observations.size() != deployment.size())
        throw std::invalid_argument("objective: observation/deployment size mismatch");

    const auto channels = channel::compute_channel(deployment, candidate.pose, scenario, mode,
                                                   body, &candidate.sync);
    ObjectiveValue result;
    for (std::size_t k = 0; k < deployment.size(); ++k) {
        const Eigen::VectorXcd y =
            Eigen::Map<const Eigen::VectorXcd>(observations[k].data(), observations[k].size());

        Eigen::VectorXcd col_los, col_gr;
        const Eigen::VectorXcd* p_los = nullptr;
        const Eigen::VectorXcd* p_gr = nullptr;
        if (const auto* los = channels[k].find(0)) {
            col_los = steering_column(*los, deployment[k].elements, scenario.waveform);
            if (mode == Mode::coherent) col_los *= std::exp(kJ * los->phase);
            p_los = &col_los;
        }
        if (const auto* gr = channels[k].find(1)) {
            col_gr = steering_column(*gr, deployment[k].elements, scenario.waveform);
            p_gr = &col_gr;
        }

        const double fitted =
            mode == Mode::coherent
                ? fitted_energy_coherent(p_los, p_gr, y, &result.regularized)
                : fitted_energy_incoherent(p_los, p_gr, y, &result.regularized);
        result.value += std::max(0.0, y.squaredNorm() - fitted);
    }
    return result;
}

Eigen::VectorXd scan_axis(double center, double half_extent, double spacing, double offset) {
    if (!(spacing > 0.0)) throw std::invalid_argument("scan: spacing must be > 0");
    const int half_n = static_cast<int>(std::floor(half_extent / spacing));
    Eigen::VectorXd axis(2 * half_n + 1);
    for (int i = -half_n; i <= half_n; ++i) axis[i + half_n] = center + offset + i * spacing;
    return axis;
}

}  // namespace

ObjectiveValue objective_coherent(const std::vector<Eigen::MatrixXcd>& observations,
                                  const geometry::Deployment& deployment,
                                  const Candidate& candidate, const ScenarioConfig& scenario,
                                  const geometry::VehicleBody& body) {
    return objective_impl(observations, deployment, candidate, scenario, body, Mode::coherent);
}

ObjectiveValue objective_incoherent(const std::vector<Eigen::MatrixXcd>& observations,
                                    const geometry::Deployment& deployment,
                                    const Candidate& candidate, const ScenarioConfig& scenario,
                                    const geometry::VehicleBody& body) {
    return objective_impl(observations, deployment, candidate, scenario, body, Mode::incoherent);
}

SurfaceScan surface_scan(const geometry::Deployment& deployment, const geometry::Pose& true_pose,
                         const ScenarioConfig& scenario, Mode mode,
                         const geometry::VehicleBody& body, double half_extent_m,
                         double spacing_m, const ScanOptions& options) {
    const auto observations =
        channel::synthesize_observation(deployment, true_pose, scenario, mode, body);
    const SyncOffsets sync = options.sync != nullptr ? *options.sync : scenario.sync;

    SurfaceScan scan;
    scan.spacing = spacing_m;
    scan.mode = mode;
    scan.true_x = true_pose.position.x();
    scan.true_y = true_pose.position.y();
    scan.x_axis = scan_axis(scan.true_x, half_extent_m, spacing_m, options.offset_x);
    scan.y_axis = scan_axis(scan.true_y, half_extent_m, spacing_m, options.offset_y);
    scan.sqrt_values.resize(scan.y_axis.size(), scan.x_axis.size());

    std::vector<std::uint8_t> regularized(
        static_cast<std::size_t>(scan.sqrt_values.size()), 0);
    parallel_for(static_cast<std::size_t>(scan.sqrt_values.size()), options.threads,
                 [&](std::size_t cell) {
                     const Eigen::Index row = static_cast<Eigen::Index>(cell) % scan.y_axis.size();
                     const Eigen::Index col = static_cast<Eigen::Index>(cell) / scan.y_axis.size();
                     Candidate cand;
                     cand.pose = true_pose;
                     cand.pose.position.x() = scan.x_axis[col];
                     cand.pose.position.y() = scan.y_axis[row];
                     cand.sync = sync;
                     const ObjectiveValue value =
                         objective_impl(observations.y, deployment, cand, scenario, body, mode);
                     scan.sqrt_values(row, col) = std::sqrt(value.value);
                     regularized[cell] = value.regularized ? 1 : 0;
                 });
    for (const auto r : regularized)
        if (r) scan.any_regularized = true;
    return scan;
}

std::vector<std::pair<double, double>> axis_cut(const geometry::Deployment& deployment,
                                                const geometry::Pose& true_pose,
                                                const ScenarioConfig& scenario, Mode mode,
                                                const geometry::VehicleBody& body, char axis,
                                                double half_extent_m, double spacing_m,
                                                const ScanOptions& options) {
    if (axis != 'x' && axis != 'y') throw std::invalid_argument("axis_cut: axis must be x or y");
    const auto observations =
        channel::synthesize_observation(deployment, true_pose, scenario, mode, body);
    const SyncOffsets sync = options.sync != nullptr ? *options.sync : scenario.sync;

    const double center = axis == 'x' ? true_pose.position.x() : true_pose.position.y();
    const double offset = axis == 'x' ? options.offset_x : options.offset_y;
    const Eigen::VectorXd coords = scan_axis(center, half_extent_m, spacing_m, offset);

    std::vector<std::pair<double, double>> cut(static_cast<std::size_t>(coords.size()));
    parallel_for(cut.size(), options.threads, [&](std::size_t i) {
        Candidate cand;
        cand.pose = true_pose;
        cand.sync = sync;
        if (axis == 'x')
            cand.pose.position.x() = coords[static_cast<Eigen::Index>(i)];
        else
            cand.pose.position.y() = coords[static_cast<Eigen::Index>(i)];
        const ObjectiveValue value =
            objective_impl(observations.y, deployment, cand, scenario, body, mode);
        cut[i] = {coords[static_cast<Eigen::Index>(i)], std::sqrt(value.value)};
    });
    return cut;
}

}  // namespace nfloc::likelihood
