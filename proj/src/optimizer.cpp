#include "nfloc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nfloc/channel.hpp"
#include "nfloc/fim.hpp"
#include "nfloc/parallel.hpp"

namespace nfloc::optimizer {

int Grid::capacity() const {
    int total = 0;
    for (const auto& p : points) total += p.n_placements();
    return total;
}

void Grid::validate() const {
    if (points.empty()) throw std::invalid_argument("grid: no points");
    if (points.size() > 64) throw std::invalid_argument("grid: at most 64 points supported");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const GridPoint& p = points[i];
        if (p.id != static_cast<int>(i))
            throw std::invalid_argument("grid: point ids must be 0..n-1 in order");
        const int expected = p.mirrored ? 2 : 1;
        if (p.n_placements() != expected ||
            static_cast<int>(p.rotations.size()) != expected)
            throw std::invalid_argument("grid: placement/rotation count mismatch at point " +
                                        std::to_string(p.id));
        for (const auto& r : p.rotations)
            if (!geometry::is_rotation(r))
                throw std::invalid_argument("grid: invalid rotation at point " +
                                            std::to_string(p.id));
        if (!p.mirrored && std::abs(p.placements[0].y()) > 1e-9)
            throw std::invalid_argument("grid: non-mirrored point off the center plane at id " +
                                        std::to_string(p.id));
        if (p.mirrored) {
            if (std::abs(p.placements[0].y()) <= 1e-9)
                throw std::invalid_argument("grid: mirrored point on the center plane at id " +
                                            std::to_string(p.id));
            const Eigen::Vector3d want =
                geometry::mirror_across_center_plane(p.placements[0]);
            if ((p.placements[1] - want).norm() > 1e-9)
                throw std::invalid_argument("grid: mirror twin mismatch at point " +
                                            std::to_string(p.id));
        }
    }
}

bool selection_lex_less(Selection a, Selection b) {
    if (a == b) return false;
    const Selection diff = a ^ b;
    const Selection lowest = diff & (~diff + 1);
    return (a & lowest) != 0;
}

int selection_count(const Grid& grid, Selection mask) {
    int k = 0;
    for (const auto& p : grid.points)
        if (mask & (Selection{1} << p.id)) k += p.n_placements();
    return k;
}

geometry::Deployment realize_deployment(const Grid& grid, Selection mask,
                                        const std::vector<Eigen::Vector3d>& elements) {
    geometry::Deployment deployment;
    for (const auto& p : grid.points) {
        if (!(mask & (Selection{1} << p.id))) continue;
        for (int i = 0; i < p.n_placements(); ++i) {
            geometry::SubArraySpec spec;
            spec.placement = p.placements[static_cast<std::size_t>(i)];
            spec.rotation = p.rotations[static_cast<std::size_t>(i)];
            spec.elements = elements;
            deployment.push_back(std::move(spec));
        }
    }
    return deployment;
}

std::vector<Selection> enumerate_selections(const Grid& grid, int k) {
    grid.validate();
    if (k < 1) throw std::invalid_argument("enumerate_selections: k must be >= 1");
    const int w = grid.size();

    // Remaining capacity from each point onward, for pruning.
    std::vector<int> tail(static_cast<std::size_t>(w) + 1, 0);
    for (int i = w - 1; i >= 0; --i)
        tail[static_cast<std::size_t>(i)] =
            tail[static_cast<std::size_t>(i) + 1] + grid.points[static_cast<std::size_t>(i)].n_placements();

    std::vector<Selection> out;
    // Depth-first over ascending ids emits lexicographic order.
    struct Frame {
        int next;
        int remaining;
        Selection mask;
    };
    std::vector<Frame> stack{{0, k, 0}};
    while (!stack.empty()) {
        const Frame f = stack.back();
        stack.pop_back();
        if (f.remaining == 0) {
            out.push_back(f.mask);
            continue;
        }
        if (f.next >= w || tail[static_cast<std::size_t>(f.next)] < f.remaining) continue;
        // Skip-first is pushed first so take-first is explored first (lex order).
        stack.push_back({f.next + 1, f.remaining, f.mask});
        const int n_w = grid.points[static_cast<std::size_t>(f.next)].n_placements();
        if (n_w <= f.remaining)
            stack.push_back(
                {f.next + 1, f.remaining - n_w, f.mask | (Selection{1} << f.next)});
    }
    return out;
}

TrialEvaluator::TrialEvaluator(const Grid& grid, const ScenarioConfig& scenario, Mode mode,
                               const metric::PoseSamplingSpec& sampling,
                               const std::vector<Eigen::Vector3d>& elements,
                               const geometry::VehicleBody& body, int threads)
    : grid_(grid), scenario_(scenario), mode_(mode), sampling_(sampling), threads_(threads) {
    grid_.validate();
    sampling_.validate();
    scenario_.validate();

    std::vector<geometry::SubArraySpec> instances;
    for (const auto& p : grid_.points)
        for (int i = 0; i < p.n_placements(); ++i) {
            instance_point_.push_back(p.id);
            geometry::SubArraySpec spec;
            spec.placement = p.placements[static_cast<std::size_t>(i)];
            spec.rotation = p.rotations[static_cast<std::size_t>(i)];
            spec.elements = elements;
            instances.push_back(std::move(spec));
        }

    const std::size_t n_cells = static_cast<std::size_t>(sampling_.n_cells());
    cells_.assign(instances.size(), std::vector<InstanceCell>(n_cells));
    parallel_for(instances.size() * n_cells, threads_, [&](std::size_t job) {
        const std::size_t inst = job / n_cells;
        const std::size_t cell = job % n_cells;
        const int i_phi = static_cast<int>(cell) / sampling_.n_r;
        const int j_r = static_cast<int>(cell) % sampling_.n_r;
        const geometry::Pose pose = sampling_.pose_at(i_phi, j_r);

        const geometry::Deployment single{instances[inst]};
        const auto channels = channel::compute_channel(single, pose, scenario_, mode_, body);
        InstanceCell& out = cells_[inst][cell];
        out.contribution.setZero();
        if (channels[0].paths.empty()) return;
        out.has_los = channels[0].has_path(0);
        out.has_gr = channels[0].has_path(1);
        const Eigen::MatrixXd info_xi =
            fim::channel_fim(channels[0], scenario_.waveform, instances[inst].elements);
        const Eigen::Matrix3d r_tilde = pose.rotation * instances[inst].rotation;
        const Eigen::MatrixXd canon = fim::sub_array_jacobian_canonical(
            channels[0], r_tilde, scenario_.waveform.carrier_hz);
        out.contribution = canon.transpose() * info_xi * canon;
    });
}

TrialEvaluator::Evaluation TrialEvaluator::evaluate(Selection mask) {
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        const auto it = cache_.find(mask);
        if (it != cache_.end()) return it->second;
    }
    const Evaluation eval = evaluate_uncached(mask);
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        cache_.emplace(mask, eval);
        ++evaluations_;
    }
    return eval;
}

TrialEvaluator::Evaluation TrialEvaluator::evaluate_uncached(Selection mask) const {
    std::vector<int> active;
    for (std::size_t inst = 0; inst < instance_point_.size(); ++inst)
        if (mask & (Selection{1} << instance_point_[inst])) active.push_back(static_cast<int>(inst));
    if (active.empty()) return {std::numeric_limits<double>::infinity(), false};

    const std::size_t n_cells = static_cast<std::size_t>(sampling_.n_cells());
    std::vector<double> peb_values;
    peb_values.reserve(n_cells);
    std::vector<std::array<bool, 2>> flags(active.size());

    for (std::size_t cell = 0; cell < n_cells; ++cell) {
        for (std::size_t a = 0; a < active.size(); ++a) {
            const InstanceCell& ic = cells_[static_cast<std::size_t>(active[a])][cell];
            flags[a] = {ic.has_los, ic.has_gr};
        }
        const fim::ParamIndexMap map(mode_, flags);
        const int p = map.size();
        Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
        bool any = false;
        for (std::size_t a = 0; a < active.size(); ++a) {
            const InstanceCell& ic = cells_[static_cast<std::size_t>(active[a])][cell];
            if (!ic.has_los && !ic.has_gr) continue;
            any = true;
            const auto targets = fim::canonical_column_targets(map, static_cast<int>(a));
            for (int r = 0; r < fim::kCanonicalCols; ++r) {
                const int tr = targets[static_cast<std::size_t>(r)];
                if (tr < 0) continue;
                for (int c = 0; c < fim::kCanonicalCols; ++c) {
                    const int tc = targets[static_cast<std::size_t>(c)];
                    if (tc < 0) continue;
                    info(tr, tc) += ic.contribution(r, c);
                }
            }
        }
        if (!any) return {std::numeric_limits<double>::infinity(), false};
        const fim::FimFactor factor = fim::analyze_fim(info);
        if (!factor.positive || factor.rcond < metric::kRcondThreshold)
            return {std::numeric_limits<double>::infinity(), false};
        peb_values.push_back(factor.peb);
    }

    const int n = static_cast<int>(peb_values.size());
    const int rank = std::max(
        1, static_cast<int>(std::ceil((1.0 - scenario_.peb_percentile_epsilon) * n)));
    std::nth_element(peb_values.begin(), peb_values.begin() + (rank - 1), peb_values.end());
    return {peb_values[static_cast<std::size_t>(rank - 1)], true};
}

namespace {

TrialResult build_ranking(const Grid& grid,
                          std::vector<std::pair<Selection, double>> identifiable,
                          TrialCounts counts, std::size_t evaluations) {
    std::sort(identifiable.begin(), identifiable.end(),
              [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second < b.second;
                  return selection_lex_less(a.first, b.first);
              });
    TrialResult result;
    result.ranking = std::move(identifiable);
    result.counts = counts;
    result.evaluations = evaluations;
    if (!result.ranking.empty()) {
        result.best = result.ranking.front().first;
        result.best_rho = result.ranking.front().second;
        result.realized_k = selection_count(grid, result.best);
    }
    return result;
}

}  // namespace

TrialResult exhaustive_search(const Grid& grid, int k, const ScenarioConfig& scenario, Mode mode,
                              const metric::PoseSamplingSpec& sampling,
                              const std::vector<Eigen::Vector3d>& elements,
                              const geometry::VehicleBody& body, const TrialOptions& options) {
    const std::vector<Selection> selections = enumerate_selections(grid, k);
    if (selections.empty())
        throw InfeasibleTrialError("exhaustive search: no feasible selection for k = " +
                                   std::to_string(k));

    TrialEvaluator evaluator(grid, scenario, mode, sampling, elements, body, options.threads);
    std::vector<TrialEvaluator::Evaluation> evals(selections.size());
    parallel_for(selections.size(), options.threads,
                 [&](std::size_t i) { evals[i] = evaluator.evaluate(selections[i]); });

    TrialCounts counts;
    counts.total = selections.size();
    std::vector<std::pair<Selection, double>> identifiable;
    identifiable.reserve(selections.size());
    for (std::size_t i = 0; i < selections.size(); ++i) {
        if (evals[i].identifiable) {
            identifiable.emplace_back(selections[i], evals[i].rho);
            ++counts.identifiable;
        } else {
            ++counts.discarded;
        }
    }
    TrialResult result =
        build_ranking(grid, std::move(identifiable), counts, evaluator.evaluations());
    if (result.ranking.empty())
        throw TrialError("exhaustive search: all " + std::to_string(counts.total) +
                             " feasible deployments are non-identifiable",
                         std::move(result));
    return result;
}

Selection default_greedy_initial(const Grid& grid) {
    double roof_z = -std::numeric_limits<double>::infinity();
    for (const auto& p : grid.points)
        for (const auto& placement : p.placements) roof_z = std::max(roof_z, placement.z());

    int best_id = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (const auto& p : grid.points) {
        if (!p.mirrored) continue;
        if (p.placements[0].z() < roof_z - 1e-9) continue;
        const double dist = p.placements[0].head<2>().norm();
        if (dist < best_dist - 1e-12) {
            best_dist = dist;
            best_id = p.id;
        }
    }
    if (best_id < 0)
        throw InfeasibleTrialError("greedy: grid has no mirrored roof pair for the initial set");
    return Selection{1} << best_id;
}

TrialResult greedy_search(const Grid& grid, int k, const ScenarioConfig& scenario, Mode mode,
                          const metric::PoseSamplingSpec& sampling,
                          const std::vector<Eigen::Vector3d>& elements,
                          const geometry::VehicleBody& body, std::optional<Selection> initial,
                          const TrialOptions& options) {
    grid.validate();
    const Selection start = initial.value_or(default_greedy_initial(grid));
    if (selection_count(grid, start) > k)
        throw InfeasibleTrialError("greedy: initial selection already exceeds k");
    if (grid.capacity() < k)
        throw InfeasibleTrialError("greedy: grid capacity below k = " + std::to_string(k));

    TrialEvaluator evaluator(grid, scenario, mode, sampling, elements, body, options.threads);

    TrialCounts counts;
    std::vector<std::pair<Selection, double>> identifiable;
    std::vector<double> trace;

    const auto record = [&](Selection mask, const TrialEvaluator::Evaluation& eval) {
        ++counts.total;
        if (eval.identifiable) {
            identifiable.emplace_back(mask, eval.rho);
            ++counts.identifiable;
        } else {
            ++counts.discarded;
        }
    };

    Selection current = start;
    const TrialEvaluator::Evaluation init_eval = evaluator.evaluate(current);
    record(current, init_eval);
    if (!init_eval.identifiable) {
        TrialResult partial = build_ranking(grid, std::move(identifiable), counts, counts.total);
        throw TrialError("greedy: initial selection is non-identifiable", std::move(partial));
    }
    trace.push_back(init_eval.rho);

    while (selection_count(grid, current) < k) {
        const int current_k = selection_count(grid, current);
        // Prefer candidates that do not overshoot k; fall back to any point.
        std::vector<int> candidates;
        for (const auto& p : grid.points) {
            if (current & (Selection{1} << p.id)) continue;
            if (current_k + p.n_placements() <= k) candidates.push_back(p.id);
        }
        if (candidates.empty())
            for (const auto& p : grid.points)
                if (!(current & (Selection{1} << p.id))) candidates.push_back(p.id);
        if (candidates.empty()) {
            TrialResult partial =
                build_ranking(grid, std::move(identifiable), counts, evaluator.evaluations());
            throw TrialError("greedy: k unreachable, no grid points left", std::move(partial));
        }

        std::vector<TrialEvaluator::Evaluation> evals(candidates.size());
        parallel_for(candidates.size(), options.threads, [&](std::size_t i) {
            evals[i] = evaluator.evaluate(current | (Selection{1} << candidates[i]));
        });

        int best_candidate = -1;
        double best_rho = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            record(current | (Selection{1} << candidates[i]), evals[i]);
            if (!evals[i].identifiable) continue;
            if (evals[i].rho < best_rho ||
                (evals[i].rho == best_rho && best_candidate >= 0 &&
                 selection_lex_less(current | (Selection{1} << candidates[i]),
                                    current | (Selection{1} << best_candidate)))) {
                best_rho = evals[i].rho;
                best_candidate = candidates[i];
            }
        }
        if (best_candidate < 0) {
            TrialResult partial =
                build_ranking(grid, std::move(identifiable), counts, evaluator.evaluations());
            throw TrialError("greedy: no identifiable extension at size " +
                                 std::to_string(current_k),
                             std::move(partial));
        }
        current |= Selection{1} << best_candidate;
        trace.push_back(best_rho);
    }

    TrialResult result =
        build_ranking(grid, std::move(identifiable), counts, evaluator.evaluations());
    result.best = current;
    result.best_rho = trace.back();
    result.realized_k = selection_count(grid, current);
    result.greedy_trace = std::move(trace);
    return result;
}

namespace {

GridPoint make_point(int id, const Eigen::Vector3d& placement, const Eigen::Matrix3d& rotation,
                     bool mirrored) {
    GridPoint p;
    p.id = id;
    p.mirrored = mirrored;
    p.placements.push_back(placement);
    p.rotations.push_back(rotation);
    if (mirrored) {
        p.placements.push_back(geometry::mirror_across_center_plane(placement));
        p.rotations.push_back(geometry::mirror_rotation_across_center_plane(rotation));
    }
    return p;
}

}  // namespace

Grid default_grid() {
    using Eigen::Vector3d;
    const Eigen::Matrix3d face_fwd = Eigen::Matrix3d::Identity();                  // +x
    const Eigen::Matrix3d face_back = geometry::heading_rotation(M_PI);            // -x
    const Eigen::Matrix3d face_left = geometry::heading_rotation(M_PI / 2.0);      // +y
    const Eigen::Matrix3d face_up =
        Eigen::AngleAxisd(-M_PI / 2.0, Vector3d::UnitY()).toRotationMatrix();      // +z

    Grid grid;
    int id = 0;
    // Centerline: roof spine and both bumpers.
    grid.points.push_back(make_point(id++, {1.8, 0.0, 1.5}, face_up, false));
    grid.points.push_back(make_point(id++, {0.6, 0.0, 1.5}, face_up, false));
    grid.points.push_back(make_point(id++, {-0.6, 0.0, 1.5}, face_up, false));
    grid.points.push_back(make_point(id++, {-1.8, 0.0, 1.5}, face_up, false));
    grid.points.push_back(make_point(id++, {2.0, 0.0, 0.4}, face_fwd, false));
    grid.points.push_back(make_point(id++, {-2.0, 0.0, 0.4}, face_back, false));
    // Roof edges.
    grid.points.push_back(make_point(id++, {1.5, 0.7, 1.5}, face_up, true));
    grid.points.push_back(make_point(id++, {0.5, 0.7, 1.5}, face_up, true));
    grid.points.push_back(make_point(id++, {-0.5, 0.7, 1.5}, face_up, true));
    grid.points.push_back(make_point(id++, {-1.5, 0.7, 1.5}, face_up, true));
    // Upper side panels.
    grid.points.push_back(make_point(id++, {1.2, 0.9, 1.1}, face_left, true));
    grid.points.push_back(make_point(id++, {0.0, 0.9, 1.1}, face_left, true));
    grid.points.push_back(make_point(id++, {-1.2, 0.9, 1.1}, face_left, true));
    // Lower side panels.
    grid.points.push_back(make_point(id++, {1.6, 0.9, 0.5}, face_left, true));
    grid.points.push_back(make_point(id++, {0.8, 0.9, 0.5}, face_left, true));
    grid.points.push_back(make_point(id++, {0.0, 0.9, 0.5}, face_left, true));
    grid.points.push_back(make_point(id++, {-0.8, 0.9, 0.5}, face_left, true));
    grid.points.push_back(make_point(id++, {-1.6, 0.9, 0.5}, face_left, true));
    // Bumper corners.
    grid.points.push_back(make_point(id++, {2.0, 0.6, 0.8}, face_fwd, true));
    grid.points.push_back(make_point(id++, {-2.0, 0.6, 0.8}, face_back, true));
    return grid;
}

}  // namespace nfloc::optimizer
