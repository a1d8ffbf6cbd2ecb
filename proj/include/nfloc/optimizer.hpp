// Deployment space from the mounting grid, exhaustive enumeration under the
// sub-array count constraint, and the greedy baseline search.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nfloc/geometry.hpp"
#include "nfloc/metric.hpp"
#include "nfloc/scenario.hpp"

namespace nfloc::optimizer {

/// One candidate mounting location. Off-center points are mirrored across the
/// length-wise center plane and carry two placements.
struct GridPoint {
    int id = 0;
    bool mirrored = false;
    std::vector<Eigen::Vector3d> placements;   // 1 or 2 entries
    std::vector<Eigen::Matrix3d> rotations;    // matching entries

    int n_placements() const { return static_cast<int>(placements.size()); }
};

struct Grid {
    std::vector<GridPoint> points;

    int size() const { return static_cast<int>(points.size()); }
    /// Total sub-array count when every point is selected.
    int capacity() const;
    void validate() const;
};

/// Selections are bitmasks over grid-point ids (grids are limited to 64
/// points).
using Selection = std::uint64_t;

/// Lexicographic order on selections viewed as ascending id sequences;
/// used for deterministic tie-breaking.
bool selection_lex_less(Selection a, Selection b);

int selection_count(const Grid& grid, Selection mask);

/// Realized deployment of a selection: sub-arrays in grid order, original
/// placement before its mirror twin, all sharing one element layout.
geometry::Deployment realize_deployment(const Grid& grid, Selection mask,
                                        const std::vector<Eigen::Vector3d>& elements);

/// Every subset of grid points whose placement-weighted size equals k,
/// in lexicographic order. Empty when k is unreachable.
std::vector<Selection> enumerate_selections(const Grid& grid, int k);

struct TrialCounts {
    std::size_t total = 0;
    std::size_t identifiable = 0;
    std::size_t discarded = 0;
};

struct TrialResult {
    std::vector<std::pair<Selection, double>> ranking;  // ascending rho
    TrialCounts counts;
    Selection best = 0;
    double best_rho = 0.0;
    int realized_k = 0;
    std::vector<double> greedy_trace;  // per-iteration best rho (greedy only)
    std::size_t evaluations = 0;       // rho evaluations actually performed
};

struct InfeasibleTrialError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a search cannot continue; carries what was evaluated so far.
struct TrialError : std::runtime_error {
    TrialError(const std::string& what, TrialResult partial_result)
        : std::runtime_error(what), partial(std::move(partial_result)) {}
    TrialResult partial;
};

struct TrialOptions {
    int threads = 1;
};

/// Shared evaluation engine for the searches: per-placement, per-cell FIM
/// contributions are precomputed once, then each selection's rho follows from
/// assembling and factorizing the pose-wise position FIMs. Results are cached
/// by selection bitmask.
class TrialEvaluator {
public:
    TrialEvaluator(const Grid& grid, const ScenarioConfig& scenario, Mode mode,
                   const metric::PoseSamplingSpec& sampling,
                   const std::vector<Eigen::Vector3d>& elements,
                   const geometry::VehicleBody& body, int threads = 1);

    struct Evaluation {
        double rho = 0.0;
        bool identifiable = false;
    };

    Evaluation evaluate(Selection mask);
    std::size_t evaluations() const { return evaluations_; }
    const Grid& grid() const { return grid_; }

private:
    struct InstanceCell {
        Eigen::Matrix<double, 7, 7> contribution;
        bool has_los = false;
        bool has_gr = false;
    };

    Evaluation evaluate_uncached(Selection mask) const;

    Grid grid_;
    ScenarioConfig scenario_;
    Mode mode_;
    metric::PoseSamplingSpec sampling_;
    int threads_ = 1;
    std::vector<int> instance_point_;               // instance -> grid point id
    std::vector<std::vector<InstanceCell>> cells_;  // [instance][cell]
    std::unordered_map<Selection, Evaluation> cache_;
    std::mutex cache_mutex_;
    std::size_t evaluations_ = 0;
};

/// Evaluates rho for every feasible selection and returns the full ascending
/// ranking. Throws InfeasibleTrialError when no selection reaches k and
/// TrialError when every feasible selection is non-identifiable.
TrialResult exhaustive_search(const Grid& grid, int k, const ScenarioConfig& scenario, Mode mode,
                              const metric::PoseSamplingSpec& sampling,
                              const std::vector<Eigen::Vector3d>& elements,
                              const geometry::VehicleBody& body, const TrialOptions& options = {});

/// Greedy baseline: starting from `initial` (default: the mirrored roof pair
/// nearest the roof center), repeatedly adds the grid point whose addition
/// minimizes rho until the sub-array count reaches k.
TrialResult greedy_search(const Grid& grid, int k, const ScenarioConfig& scenario, Mode mode,
                          const metric::PoseSamplingSpec& sampling,
                          const std::vector<Eigen::Vector3d>& elements,
                          const geometry::VehicleBody& body,
                          std::optional<Selection> initial = std::nullopt,
                          const TrialOptions& options = {});

/// Default initial greedy selection: the mirrored pair closest to the roof
/// center (ties to the lowest id).
Selection default_greedy_initial(const Grid& grid);

/// Built-in mounting grid: 6 centerline points (roof spine and both bumpers)
/// plus 14 mirrored pairs (roof edges, upper and lower side panels, front and
/// rear corners) on the default box hull; 34 placements in total.
Grid default_grid();

}  // namespace nfloc::optimizer
