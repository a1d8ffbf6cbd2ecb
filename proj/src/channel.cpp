#include "nfloc/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace nfloc::channel {

namespace {
constexpr std::complex<double> kJ{0.0, 1.0};

// splitmix64; decorrelates per-sub-array noise streams from one master seed.
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : state_(seed) {}

    // Circular complex Gaussian sample with per-entry variance sigma2.
    std::complex<double> next_cn(double sigma2) {
        const double u1 = next_unit_open();
        const double u2 = next_unit();
        const double mag = std::sqrt(-2.0 * std::log(u1)) * std::sqrt(sigma2 / 2.0);
        return {mag * std::cos(2.0 * M_PI * u2), mag * std::sin(2.0 * M_PI * u2)};
    }

private:
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double next_unit_open() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }
    std::uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }
    std::uint64_t state_;
};

}  // namespace

double element_gain(double theta_az, double theta_el, const GainModel& model) {
    const double half_pi = M_PI / 2.0;
    if (std::abs(theta_az) > half_pi || std::abs(theta_el) > half_pi) return 0.0;
    const double ca = std::max(std::cos(theta_az), 0.0);
    const double ce = std::max(std::cos(theta_el), 0.0);
    return model.max_gain * std::pow(ca, 2.0 * model.beta) * std::pow(ce, 2.0 * model.beta) +
           model.min_gain;
}

std::complex<double> fresnel_coefficient(double incidence_rad, const GroundModel& ground) {
    const double ci = std::cos(incidence_rad);
    const double si = std::sin(incidence_rad);
    const std::complex<double> eps = ground.permittivity;
    const std::complex<double> root = std::sqrt(eps - si * si);
    if (ground.polarization == Polarization::perpendicular) {
        return (ci - root) / (ci + root);
    }
    return (eps * ci - root) / (eps * ci + root);
}

double path_gain(double d, int path, const GainModel& gains, double theta_az, double theta_el,
                 double gamma_abs, double wavelength) {
    if (!(d > 0.0)) throw std::invalid_argument("path_gain: distance must be > 0");
    const double rx = element_gain(theta_az, theta_el, gains);
    double alpha = std::sqrt(gains.tx_gain * rx) * wavelength / (4.0 * M_PI * d);
    if (path >= 1) alpha *= gamma_abs;
    return alpha;
}

Eigen::VectorXcd spatial_steering(const std::vector<Eigen::Vector3d>& elements, double theta_az,
                                  double theta_el, double wavelength) {
    if (elements.empty()) throw std::invalid_argument("spatial_steering: no elements");
    const Eigen::Vector3d k = geometry::wavenumber(theta_az, theta_el, wavelength);
    Eigen::VectorXcd a(static_cast<Eigen::Index>(elements.size()));
    for (std::size_t m = 0; m < elements.size(); ++m)
        a[static_cast<Eigen::Index>(m)] = std::exp(kJ * elements[m].dot(k));
    return a;
}

Eigen::VectorXcd frequency_steering(double d_pseudo, const Waveform& waveform) {
    waveform.validate();
    const double rate = -2.0 * M_PI * waveform.subcarrier_spacing_hz * d_pseudo / kSpeedOfLight;
    Eigen::VectorXcd b(waveform.n_subcarriers);
    for (int n = 0; n < waveform.n_subcarriers; ++n) b[n] = std::exp(kJ * (rate * n));
    return b;
}

double phase_response(double d, int path, double delta_phi, double gamma_phase,
                      double carrier_hz) {
    if (!(d > 0.0)) throw std::invalid_argument("phase_response: distance must be > 0");
    double phase = -2.0 * M_PI * carrier_hz * d / kSpeedOfLight + delta_phi;
    if (path >= 1) phase += gamma_phase;
    return phase;
}

double wrap_phase(double phase) {
    double w = std::fmod(phase, 2.0 * M_PI);
    if (w <= -M_PI) w += 2.0 * M_PI;
    if (w > M_PI) w -= 2.0 * M_PI;
    return w;
}

std::vector<SubArrayChannel> compute_channel(const geometry::Deployment& deployment,
                                             const geometry::Pose& vehicle,
                                             const ScenarioConfig& scenario, Mode mode,
                                             const geometry::VehicleBody& body,
                                             const SyncOffsets* sync_override) {
    const SyncOffsets& sync = sync_override != nullptr ? *sync_override : scenario.sync;
    const geometry::ReflectorPlane ground = scenario.ground_plane();
    const double wavelength = scenario.waveform.wavelength();

    std::vector<SubArrayChannel> out(deployment.size());
    for (std::size_t k = 0; k < deployment.size(); ++k) {
        const auto paths = geometry::path_geometries(vehicle, deployment[k], body, ground,
                                                     scenario.ground_reflection);
        const geometry::Pose global = geometry::sub_array_pose(vehicle, deployment[k]);
        const double delta_phi = sync.delta_phi(static_cast<int>(k), mode);
        for (const auto& g : paths) {
            if (!g.visible) continue;
            PathSignal s;
            s.path = g.path_index;
            s.theta_az = g.theta_az;
            s.theta_el = g.theta_el;
            s.d_true = g.distance;
            s.d_pseudo = g.distance + sync.delta_d_m;
            if (g.path_index >= 1) {
                const Eigen::Vector3d image =
                    geometry::mirror_source(Eigen::Vector3d::Zero(), ground);
                const double incidence =
                    geometry::incidence_angle_from_normal(global.position, image, ground);
                s.reflection = fresnel_coefficient(incidence, scenario.ground);
            }
            const double gamma_phase = std::arg(s.reflection);
            s.alpha = path_gain(s.d_true, s.path, scenario.gains, s.theta_az, s.theta_el,
                                std::abs(s.reflection), wavelength);
            s.phase = phase_response(s.d_true, s.path, delta_phi, gamma_phase,
                                     scenario.waveform.carrier_hz);
            out[k].paths.push_back(s);
        }
    }
    return out;
}

Observations synthesize_observation(const geometry::Deployment& deployment,
                                    const geometry::Pose& vehicle,
                                    const ScenarioConfig& scenario, Mode mode,
                                    const geometry::VehicleBody& body,
                                    std::optional<std::uint64_t> noise_seed) {
    if (deployment.empty())
        throw std::invalid_argument("synthesize_observation: deployment is empty");
    scenario.validate();
    const auto channels = compute_channel(deployment, vehicle, scenario, mode, body);
    const Waveform& wf = scenario.waveform;
    const double wavelength = wf.wavelength();
    const double sqrt_ptx = std::sqrt(wf.tx_power_w);

    Observations obs;
    obs.y.reserve(deployment.size());
    obs.fully_occluded.reserve(deployment.size());
    for (std::size_t k = 0; k < deployment.size(); ++k) {
        const auto m = static_cast<Eigen::Index>(deployment[k].elements.size());
        Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(m, wf.n_subcarriers);
        for (const PathSignal& s : channels[k].paths) {
            const Eigen::VectorXcd a =
                spatial_steering(deployment[k].elements, s.theta_az, s.theta_el, wavelength);
            const Eigen::VectorXcd b = frequency_steering(s.d_pseudo, wf);
            const std::complex<double> scale = s.alpha * std::exp(kJ * s.phase) * sqrt_ptx;
            y.noalias() += scale * a * b.transpose();  // unit pilots
        }
        obs.fully_occluded.push_back(channels[k].paths.empty());
        if (noise_seed) {
            GaussianStream stream(splitmix64(*noise_seed ^ (0xA24BAED4963EE407ull + k)));
            for (Eigen::Index col = 0; col < y.cols(); ++col)
                for (Eigen::Index row = 0; row < y.rows(); ++row)
                    y(row, col) += stream.next_cn(wf.noise_variance_w);
        }
        obs.y.push_back(std::move(y));
    }
    return obs;
}

}  // namespace nfloc::channel
