#include "nfloc/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nfloc/parallel.hpp"

namespace nfloc::metric {

PoseSamplingSpec default_sampling(const ScenarioConfig& scenario) {
    PoseSamplingSpec spec;
    spec.vehicle_z_m = scenario.vehicle_z();
    return spec;
}

PebMap sample_peb_map(const geometry::Deployment& deployment, const PoseSamplingSpec& sampling,
                      const ScenarioConfig& scenario, Mode mode,
                      const geometry::VehicleBody& body, const SamplingOptions& options) {
    sampling.validate();
    PebMap map;
    map.sampling = sampling;
    map.deployment = deployment;
    map.peb.setConstant(sampling.n_phi, sampling.n_r, std::numeric_limits<double>::infinity());
    map.ok.setZero(sampling.n_phi, sampling.n_r);

    parallel_for(static_cast<std::size_t>(sampling.n_cells()), options.threads,
                 [&](std::size_t cell) {
                     const int i = static_cast<int>(cell) / sampling.n_r;
                     const int j = static_cast<int>(cell) % sampling.n_r;
                     const auto fr =
                         fim::position_fim(deployment, sampling.pose_at(i, j), scenario, mode, body);
                     if (!fr.identifiable || fr.rcond_estimate < kRcondThreshold) return;
                     map.peb(i, j) = fim::peb(fr);
                     map.ok(i, j) = 1;
                 });
    return map;
}

double rho(const PebMap& map, double epsilon) {
    const int n = map.n_cells();
    if (n == 0) throw std::invalid_argument("rho: empty map");
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw std::invalid_argument("rho: epsilon must be in [0, 1)");
    std::vector<double> cells(map.peb.data(), map.peb.data() + n);
    // Nearest rank: the ceil((1-eps)*n)-th order statistic, 1-indexed.
    const int rank = std::max(1, static_cast<int>(std::ceil((1.0 - epsilon) * n)));
    std::nth_element(cells.begin(), cells.begin() + (rank - 1), cells.end());
    return cells[static_cast<std::size_t>(rank - 1)];
}

std::vector<std::pair<double, double>> eccdf(const PebMap& map) {
    const int n = map.n_cells();
    std::vector<double> finite;
    finite.reserve(static_cast<std::size_t>(n));
    int n_inf = 0;
    for (int i = 0; i < map.peb.rows(); ++i)
        for (int j = 0; j < map.peb.cols(); ++j) {
            if (map.ok(i, j))
                finite.push_back(map.peb(i, j));
            else
                ++n_inf;
        }
    if (finite.empty()) throw std::invalid_argument("eccdf: no identifiable cells");
    std::sort(finite.begin(), finite.end());

    std::vector<std::pair<double, double>> curve;
    curve.reserve(finite.size());
    std::size_t i = 0;
    while (i < finite.size()) {
        std::size_t j = i;
        while (j < finite.size() && finite[j] == finite[i]) ++j;
        // fraction strictly exceeding finite[i]
        const double exceeding =
            static_cast<double>(finite.size() - j + static_cast<std::size_t>(n_inf)) / n;
        curve.emplace_back(finite[i], exceeding);
        i = j;
    }
    return curve;
}

}  // namespace nfloc::metric
