#include "nfloc/fim.hpp"

#include <array>
#include <cmath>
#include <complex>

namespace nfloc::fim {

namespace {
constexpr std::complex<double> kJ{0.0, 1.0};
constexpr int kParamsPerPath = 5;  // [az, el, d_pseudo, phase, alpha]
}  // namespace

std::string ParamRef::name() const {
    switch (kind) {
        case ParamKind::x: return "x";
        case ParamKind::y: return "y";
        case ParamKind::delta_d: return "delta_d";
        case ParamKind::delta_phi:
            return sub_array < 0 ? "delta_phi" : "delta_phi[" + std::to_string(sub_array) + "]";
        case ParamKind::alpha_los: return "alpha_los[" + std::to_string(sub_array) + "]";
        case ParamKind::alpha_gr: return "alpha_gr[" + std::to_string(sub_array) + "]";
        case ParamKind::gamma_phase: return "gamma_phase[" + std::to_string(sub_array) + "]";
    }
    return "?";
}

namespace {

std::vector<std::array<bool, 2>> visibility_flags(
    const std::vector<channel::SubArrayChannel>& channels) {
    std::vector<std::array<bool, 2>> flags(channels.size());
    for (std::size_t k = 0; k < channels.size(); ++k)
        flags[k] = {channels[k].has_path(0), channels[k].has_path(1)};
    return flags;
}

}  // namespace

ParamIndexMap::ParamIndexMap(Mode mode, const std::vector<channel::SubArrayChannel>& channels)
    : ParamIndexMap(mode, visibility_flags(channels)) {}

ParamIndexMap::ParamIndexMap(Mode mode, const std::vector<std::array<bool, 2>>& path_flags)
    : mode_(mode) {
    params_.push_back({ParamKind::x, -1});
    params_.push_back({ParamKind::y, -1});
    params_.push_back({ParamKind::delta_d, -1});
    if (mode == Mode::coherent) {
        params_.push_back({ParamKind::delta_phi, -1});
    } else {
        for (std::size_t k = 0; k < path_flags.size(); ++k) {
            if (!path_flags[k][0] && !path_flags[k][1]) continue;
            dphi_[static_cast<int>(k)] = static_cast<int>(params_.size());
            params_.push_back({ParamKind::delta_phi, static_cast<int>(k)});
        }
    }
    for (std::size_t k = 0; k < path_flags.size(); ++k) {
        if (path_flags[k][0] || path_flags[k][1]) ++n_visible_;
        if (path_flags[k][0]) {
            alos_[static_cast<int>(k)] = static_cast<int>(params_.size());
            params_.push_back({ParamKind::alpha_los, static_cast<int>(k)});
            ++n_los_;
        }
    }
    for (std::size_t k = 0; k < path_flags.size(); ++k) {
        if (!path_flags[k][1]) continue;
        agr_[static_cast<int>(k)] = static_cast<int>(params_.size());
        params_.push_back({ParamKind::alpha_gr, static_cast<int>(k)});
        gph_[static_cast<int>(k)] = static_cast<int>(params_.size());
        params_.push_back({ParamKind::gamma_phase, static_cast<int>(k)});
        ++n_gr_;
    }
}

int ParamIndexMap::delta_phi_col(int k) const {
    if (mode_ == Mode::coherent) return 3;
    const auto it = dphi_.find(k);
    return it == dphi_.end() ? -1 : it->second;
}

int ParamIndexMap::alpha_los_col(int k) const {
    const auto it = alos_.find(k);
    return it == alos_.end() ? -1 : it->second;
}

int ParamIndexMap::alpha_gr_col(int k) const {
    const auto it = agr_.find(k);
    return it == agr_.end() ? -1 : it->second;
}

int ParamIndexMap::gamma_phase_col(int k) const {
    const auto it = gph_.find(k);
    return it == gph_.end() ? -1 : it->second;
}

std::vector<channel::SubArrayChannel> channel_params(const geometry::Deployment& deployment,
                                                     const geometry::Pose& vehicle,
                                                     const ScenarioConfig& scenario, Mode mode,
                                                     const geometry::VehicleBody& body) {
    return channel::compute_channel(deployment, vehicle, scenario, mode, body);
}

Eigen::MatrixXd channel_fim(const channel::SubArrayChannel& sub, const Waveform& waveform,
                            const std::vector<Eigen::Vector3d>& elements) {
    const int n_paths = static_cast<int>(sub.paths.size());
    if (n_paths == 0) throw std::invalid_argument("channel_fim: no visible paths");
    const auto m = static_cast<Eigen::Index>(elements.size());
    if (m == 0) throw std::invalid_argument("channel_fim: no elements");

    const double wavelength = waveform.wavelength();
    const double kappa = 2.0 * M_PI * waveform.subcarrier_spacing_hz / kSpeedOfLight;
    const int n = waveform.n_subcarriers;

    // Per path: spatial steering and its angle derivatives, plus the scalar
    // prefactor of the mean. The mean of one path is
    //   s * (b o x) (x) a   with  s = alpha * exp(j*phase) * sqrt(Ptx),
    // so every xi-derivative keeps the Kronecker structure and inner products
    // factor into an N-sum (geometric series in the pseudo-distance gap) and
    // an M-sum over elements.
    struct PathTerms {
        std::array<Eigen::VectorXcd, 3> a;  // a, da/daz, da/del
        std::complex<double> base;          // exp(j*phase) * sqrt(Ptx)
        double alpha = 0.0;
        double d_pseudo = 0.0;
    };
    std::vector<PathTerms> terms(static_cast<std::size_t>(n_paths));
    for (int p = 0; p < n_paths; ++p) {
        const channel::PathSignal& s = sub.paths[static_cast<std::size_t>(p)];
        PathTerms& t = terms[static_cast<std::size_t>(p)];
        t.a[0] = channel::spatial_steering(elements, s.theta_az, s.theta_el, wavelength);
        const Eigen::Vector3d k = geometry::wavenumber(s.theta_az, s.theta_el, wavelength);
        const double ca = std::cos(s.theta_az), sa = std::sin(s.theta_az);
        const double ce = std::cos(s.theta_el), se = std::sin(s.theta_el);
        const Eigen::Vector3d dk_az =
            (-2.0 * M_PI / wavelength) * Eigen::Vector3d(-sa * ce, -ca * ce, 0.0);
        const Eigen::Vector3d dk_el =
            (-2.0 * M_PI / wavelength) * Eigen::Vector3d(-ca * se, sa * se, ce);
        (void)k;
        t.a[1].resize(m);
        t.a[2].resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            t.a[1][i] = kJ * elements[static_cast<std::size_t>(i)].dot(dk_az) * t.a[0][i];
            t.a[2][i] = kJ * elements[static_cast<std::size_t>(i)].dot(dk_el) * t.a[0][i];
        }
        t.base = std::exp(kJ * s.phase) * std::sqrt(waveform.tx_power_w);
        t.alpha = s.alpha;
        t.d_pseudo = s.d_pseudo;
    }

    // Subcarrier sums S_r = sum_n n^r z^n with z = exp(j*kappa*(d_i - d_j)).
    const auto subcarrier_sums = [&](double d_i, double d_j) {
        std::array<std::complex<double>, 3> s{};
        const double psi = kappa * (d_i - d_j);
        if (psi == 0.0) {
            const double nn = n;
            s[0] = nn;
            s[1] = nn * (nn - 1.0) / 2.0;
            s[2] = (nn - 1.0) * nn * (2.0 * nn - 1.0) / 6.0;
            return s;
        }
        const std::complex<double> z = std::exp(kJ * psi);
        std::complex<double> zp{1.0, 0.0};
        for (int i = 0; i < n; ++i) {
            s[0] += zp;
            s[1] += static_cast<double>(i) * zp;
            s[2] += static_cast<double>(i) * static_cast<double>(i) * zp;
            zp *= z;
        }
        return s;
    };

    // Derivative descriptors per xi entry: scalar prefactor, N-side variant
    // (0: b, 1: db/dd), M-side variant (0: a, 1: da/daz, 2: da/del).
    struct Deriv {
        std::complex<double> scale;
        int b_variant;
        int a_variant;
    };
    const auto deriv_of = [&](const PathTerms& t, int entry) {
        switch (entry) {
            case 0: return Deriv{t.alpha * t.base, 0, 1};       // d/d az
            case 1: return Deriv{t.alpha * t.base, 0, 2};       // d/d el
            case 2: return Deriv{t.alpha * t.base, 1, 0};       // d/d d_pseudo
            case 3: return Deriv{kJ * t.alpha * t.base, 0, 0};  // d/d phase
            default: return Deriv{t.base, 0, 0};                // d/d alpha
        }
    };

    const int size = kParamsPerPath * n_paths;
    Eigen::MatrixXd info(size, size);
    for (int pi = 0; pi < n_paths; ++pi) {
        for (int pj = pi; pj < n_paths; ++pj) {
            const PathTerms& ti = terms[static_cast<std::size_t>(pi)];
            const PathTerms& tj = terms[static_cast<std::size_t>(pj)];
            const auto s = subcarrier_sums(ti.d_pseudo, tj.d_pseudo);
            std::array<std::array<std::complex<double>, 3>, 3> asum;
            for (int ai = 0; ai < 3; ++ai)
                for (int aj = 0; aj < 3; ++aj)
                    asum[static_cast<std::size_t>(ai)][static_cast<std::size_t>(aj)] =
                        ti.a[static_cast<std::size_t>(ai)].dot(tj.a[static_cast<std::size_t>(aj)]);

            for (int di = 0; di < kParamsPerPath; ++di) {
                const Deriv qi = deriv_of(ti, di);
                for (int dj = 0; dj < kParamsPerPath; ++dj) {
                    const int row = kParamsPerPath * pi + di;
                    const int col = kParamsPerPath * pj + dj;
                    if (pi == pj && col < row) continue;
                    const Deriv qj = deriv_of(tj, dj);
                    std::complex<double> bsum;
                    if (qi.b_variant == 0 && qj.b_variant == 0) bsum = s[0];
                    else if (qi.b_variant == 1 && qj.b_variant == 0) bsum = kJ * kappa * s[1];
                    else if (qi.b_variant == 0 && qj.b_variant == 1) bsum = -kJ * kappa * s[1];
                    else bsum = kappa * kappa * s[2];
                    const std::complex<double> inner =
                        std::conj(qi.scale) * qj.scale * bsum *
                        asum[static_cast<std::size_t>(qi.a_variant)]
                            [static_cast<std::size_t>(qj.a_variant)];
                    const double value = 2.0 / waveform.noise_variance_w * inner.real();
                    info(row, col) = value;
                    info(col, row) = value;
                }
            }
        }
    }
    return info;
}

Eigen::MatrixXd sub_array_jacobian_canonical(const channel::SubArrayChannel& sub,
                                             const Eigen::Matrix3d& r_tilde, double carrier_hz) {
    const int n_paths = static_cast<int>(sub.paths.size());
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(kParamsPerPath * n_paths, kCanonicalCols);
    const double kappa_c = 2.0 * M_PI * carrier_hz / kSpeedOfLight;

    // d u~/d x and d u~/d y: the local source moves by -R~^T e_x / e_y.
    const Eigen::Vector3d gx = -r_tilde.row(0).transpose();
    const Eigen::Vector3d gy = -r_tilde.row(1).transpose();

    for (int p = 0; p < n_paths; ++p) {
        const channel::PathSignal& s = sub.paths[static_cast<std::size_t>(p)];
        const double ca = std::cos(s.theta_az), sa = std::sin(s.theta_az);
        const double ce = std::cos(s.theta_el), se = std::sin(s.theta_el);
        const double d = s.d_true;
        const Eigen::Vector3d u(d * ce * ca, -d * ce * sa, d * se);
        const double rho2 = u.x() * u.x() + u.y() * u.y();

        const auto geo_derivs = [&](const Eigen::Vector3d& g) {
            const double dd = u.dot(g) / d;
            const double daz = -(u.x() * g.y() - u.y() * g.x()) / rho2;
            const double del = (g.z() * d - u.z() * dd) / (d * std::sqrt(rho2));
            return Eigen::Vector3d(daz, del, dd);
        };
        const Eigen::Vector3d dx = geo_derivs(gx);
        const Eigen::Vector3d dy = geo_derivs(gy);

        const int r = kParamsPerPath * p;
        jac(r + 0, 0) = dx[0];
        jac(r + 0, 1) = dy[0];
        jac(r + 1, 0) = dx[1];
        jac(r + 1, 1) = dy[1];
        jac(r + 2, 0) = dx[2];
        jac(r + 2, 1) = dy[2];
        jac(r + 2, 2) = 1.0;  // d d_pseudo / d delta_d
        jac(r + 3, 0) = -kappa_c * dx[2];
        jac(r + 3, 1) = -kappa_c * dy[2];
        jac(r + 3, 3) = 1.0;  // d phase / d delta_phi
        if (s.path == 0) {
            jac(r + 4, 4) = 1.0;
        } else {
            jac(r + 3, 6) = 1.0;  // d phase / d angle(Gamma)
            jac(r + 4, 5) = 1.0;
        }
    }
    return jac;
}

std::array<int, kCanonicalCols> canonical_column_targets(const ParamIndexMap& map, int k) {
    return {map.x_col(),           map.y_col(),        map.delta_d_col(),
            map.delta_phi_col(k),  map.alpha_los_col(k), map.alpha_gr_col(k),
            map.gamma_phase_col(k)};
}

Eigen::MatrixXd jacobian(const geometry::Deployment& deployment, const geometry::Pose& vehicle,
                         const ScenarioConfig& scenario, Mode mode,
                         const geometry::VehicleBody& body, int k) {
    const auto channels = channel_params(deployment, vehicle, scenario, mode, body);
    const auto& sub = channels.at(static_cast<std::size_t>(k));
    if (sub.paths.empty()) throw std::invalid_argument("jacobian: sub-array fully occluded");
    const ParamIndexMap map(mode, channels);
    const Eigen::Matrix3d r_tilde =
        vehicle.rotation * deployment[static_cast<std::size_t>(k)].rotation;
    const Eigen::MatrixXd canon =
        sub_array_jacobian_canonical(sub, r_tilde, scenario.waveform.carrier_hz);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(canon.rows(), map.size());
    const auto targets = canonical_column_targets(map, k);
    for (int c = 0; c < kCanonicalCols; ++c)
        if (targets[static_cast<std::size_t>(c)] >= 0)
            jac.col(targets[static_cast<std::size_t>(c)]) = canon.col(c);
    return jac;
}

FimFactor analyze_fim(const Eigen::MatrixXd& info) {
    FimFactor out;
    const Eigen::VectorXd diag = info.diagonal();
    if (diag.size() < 2 || !(diag.minCoeff() > 0.0) || !diag.allFinite()) return out;

    // Unit-diagonal scaling, then a pivoted LDL^T of the scaled matrix.
    const Eigen::VectorXd scale = diag.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd normalized = scale.asDiagonal() * info * scale.asDiagonal();
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(normalized);
    if (ldlt.info() != Eigen::Success) return out;
    const Eigen::VectorXd d = ldlt.vectorD();
    const double dmin = d.minCoeff();
    const double dmax = d.maxCoeff();
    if (!(dmin > 0.0) || !std::isfinite(dmax)) return out;
    out.positive = true;
    out.rcond = dmin / dmax;

    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(info.rows(), 2);
    rhs(0, 0) = 1.0;
    rhs(1, 1) = 1.0;
    const Eigen::MatrixXd inv_block = ldlt.solve(rhs);  // blocks of inv(I_scaled)
    out.peb = std::sqrt(scale[0] * scale[0] * inv_block(0, 0) +
                        scale[1] * scale[1] * inv_block(1, 1));
    return out;
}

FimResult position_fim(const geometry::Deployment& deployment, const geometry::Pose& vehicle,
                       const ScenarioConfig& scenario, Mode mode,
                       const geometry::VehicleBody& body) {
    if (deployment.empty()) throw std::invalid_argument("position_fim: deployment is empty");
    const auto channels = channel_params(deployment, vehicle, scenario, mode, body);

    FimResult result;
    result.map = ParamIndexMap(mode, channels);
    const int p = result.map.size();
    result.info = Eigen::MatrixXd::Zero(p, p);

    bool any_visible = false;
    for (std::size_t k = 0; k < deployment.size(); ++k) {
        if (channels[k].paths.empty()) continue;
        any_visible = true;
        const Eigen::MatrixXd info_xi =
            channel_fim(channels[k], scenario.waveform, deployment[k].elements);
        const Eigen::Matrix3d r_tilde = vehicle.rotation * deployment[k].rotation;
        const Eigen::MatrixXd canon = sub_array_jacobian_canonical(
            channels[k], r_tilde, scenario.waveform.carrier_hz);
        const Eigen::MatrixXd contribution = canon.transpose() * info_xi * canon;
        const auto targets = canonical_column_targets(result.map, static_cast<int>(k));
        for (int r = 0; r < kCanonicalCols; ++r) {
            const int tr = targets[static_cast<std::size_t>(r)];
            if (tr < 0) continue;
            for (int c = 0; c < kCanonicalCols; ++c) {
                const int tc = targets[static_cast<std::size_t>(c)];
                if (tc < 0) continue;
                result.info(tr, tc) += contribution(r, c);
            }
        }
    }

    if (!any_visible) {
        result.identifiable = false;
        result.rcond_estimate = 0.0;
        return result;
    }
    const FimFactor factor = analyze_fim(result.info);
    result.identifiable = factor.positive;
    result.rcond_estimate = factor.rcond;
    return result;
}

double peb(const FimResult& fim) {
    if (!fim.identifiable)
        throw NonIdentifiableError("peb: FIM is singular or flagged non-identifiable");
    const FimFactor factor = analyze_fim(fim.info);
    if (!factor.positive) throw NonIdentifiableError("peb: FIM factorization failed");
    return factor.peb;
}

EtaVector eta_true(const geometry::Deployment& deployment, const geometry::Pose& vehicle,
                   const ScenarioConfig& scenario, Mode mode,
                   const geometry::VehicleBody& body) {
    const auto channels = channel_params(deployment, vehicle, scenario, mode, body);
    EtaVector eta;
    eta.map = ParamIndexMap(mode, channels);
    eta.values = Eigen::VectorXd::Zero(eta.map.size());
    eta.values[0] = vehicle.position.x();
    eta.values[1] = vehicle.position.y();
    eta.values[2] = scenario.sync.delta_d_m;
    if (mode == Mode::coherent) {
        eta.values[3] = scenario.sync.delta_phi(0, mode);
    }
    for (std::size_t k = 0; k < channels.size(); ++k) {
        const int ki = static_cast<int>(k);
        if (mode == Mode::incoherent && !channels[k].paths.empty())
            eta.values[eta.map.delta_phi_col(ki)] = scenario.sync.delta_phi(ki, mode);
        if (const auto* los = channels[k].find(0))
            eta.values[eta.map.alpha_los_col(ki)] = los->alpha;
        if (const auto* gr = channels[k].find(1)) {
            eta.values[eta.map.alpha_gr_col(ki)] = gr->alpha;
            eta.values[eta.map.gamma_phase_col(ki)] = std::arg(gr->reflection);
        }
    }
    return eta;
}

}  // namespace nfloc::fim
