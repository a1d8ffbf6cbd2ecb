#include "nfloc/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace nfloc::geometry {

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
    const Eigen::Matrix3d gram = r.transpose() * r;
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(r.determinant() - 1.0) <= tol;
}

Eigen::Matrix3d heading_rotation(double angle) {
    if (!std::isfinite(angle)) throw std::invalid_argument("heading_rotation: non-finite angle");
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    Eigen::Matrix3d r;
    r << c, -s, 0.0,
         s,  c, 0.0,
         0.0, 0.0, 1.0;
    return r;
}

Eigen::Matrix3d axis_angle_rotation(const Eigen::Vector3d& v) {
    const double angle = v.norm();
    if (angle < 1e-15) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(angle, v / angle).toRotationMatrix();
}

Eigen::Vector3d mirror_across_center_plane(const Eigen::Vector3d& v) {
    return {v.x(), -v.y(), v.z()};
}

Eigen::Matrix3d mirror_rotation_across_center_plane(const Eigen::Matrix3d& r) {
    const Eigen::Vector3d s(1.0, -1.0, 1.0);
    return s.asDiagonal() * r * s.asDiagonal();
}

Pose sub_array_pose(const Pose& vehicle, const SubArraySpec& spec) {
    return {vehicle.position + vehicle.rotation * spec.placement,
            vehicle.rotation * spec.rotation};
}

Eigen::Vector3d mirror_source(const Eigen::Vector3d& source, const ReflectorPlane& plane) {
    const double dist = (source - plane.point).dot(plane.normal);
    return source - 2.0 * dist * plane.normal;
}

Eigen::Vector3d local_source(const Pose& sub_array, const Eigen::Vector3d& source_global) {
    return sub_array.rotation.transpose() * (source_global - sub_array.position);
}

ArrivalAngles arrival_angles(const Eigen::Vector3d& u) {
    const double norm = u.norm();
    if (norm <= 0.0)
        throw std::invalid_argument("arrival_angles: direction undefined for zero vector");
    // atan2(0, 0) == 0 covers the zenith case; any azimuth gives the same
    // wavenumber there since cos(el) = 0.
    return {-std::atan2(u.y(), u.x()), std::asin(std::clamp(u.z() / norm, -1.0, 1.0))};
}

Eigen::Vector3d wavenumber(double theta_az, double theta_el, double wavelength) {
    if (!(wavelength > 0.0)) throw std::invalid_argument("wavenumber: wavelength must be > 0");
    const double ca = std::cos(theta_az), sa = std::sin(theta_az);
    const double ce = std::cos(theta_el), se = std::sin(theta_el);
    return (-2.0 * M_PI / wavelength) * Eigen::Vector3d(ca * ce, -sa * ce, se);
}

bool segment_hits_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                           const Triangle& tri, double t_eps) {
    const Eigen::Vector3d e1 = tri.b - tri.a;
    const Eigen::Vector3d e2 = tri.c - tri.a;
    const Eigen::Vector3d p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-14) return false;  // parallel or degenerate
    const double inv_det = 1.0 / det;
    const Eigen::Vector3d s = origin - tri.a;
    const double u = s.dot(p) * inv_det;
    if (u < 0.0 || u > 1.0) return false;
    const Eigen::Vector3d q = s.cross(e1);
    const double v = dir.dot(q) * inv_det;
    if (v < 0.0 || u + v > 1.0) return false;
    const double t = e2.dot(q) * inv_det;
    return t > t_eps && t < 1.0;
}

bool occlusion_test(const Pose& mount, const Eigen::Vector3d& u, const VehicleBody& body) {
    const ArrivalAngles ang = arrival_angles(u);
    const double half_pi = M_PI / 2.0;
    if (std::abs(ang.az) > half_pi || std::abs(ang.el) > half_pi) return false;
    // Segment from the mount point toward the (virtual) source, vehicle frame.
    const Eigen::Vector3d dir = mount.rotation * u;
    constexpr double t_eps = 1e-6;  // skip self-intersection at the mount point
    for (const Triangle& tri : body.triangles) {
        if (segment_hits_triangle(mount.position, dir, tri, t_eps)) return false;
    }
    return true;
}

std::vector<PathGeometry> path_geometries(const Pose& vehicle, const SubArraySpec& spec,
                                          const VehicleBody& body, const ReflectorPlane& ground,
                                          bool include_ground_reflection) {
    const Pose global = sub_array_pose(vehicle, spec);
    const Pose mount{spec.placement, spec.rotation};

    std::vector<PathGeometry> paths;
    const int n_paths = include_ground_reflection ? 2 : 1;
    paths.reserve(n_paths);
    for (int path = 0; path < n_paths; ++path) {
        const Eigen::Vector3d source =
            path == 0 ? Eigen::Vector3d::Zero() : mirror_source(Eigen::Vector3d::Zero(), ground);
        PathGeometry g;
        g.path_index = path;
        g.local_source = local_source(global, source);
        g.distance = g.local_source.norm();
        const ArrivalAngles ang = arrival_angles(g.local_source);
        g.theta_az = ang.az;
        g.theta_el = ang.el;
        g.visible = occlusion_test(mount, g.local_source, body);
        paths.push_back(g);
    }
    return paths;
}

double incidence_angle_from_normal(const Eigen::Vector3d& sub_array_position,
                                   const Eigen::Vector3d& image_source,
                                   const ReflectorPlane& plane) {
    const Eigen::Vector3d ray = sub_array_position - image_source;
    const double norm = ray.norm();
    if (norm <= 0.0) throw std::invalid_argument("incidence angle undefined for zero ray");
    const double c = std::abs(ray.dot(plane.normal)) / norm;
    return std::acos(std::clamp(c, 0.0, 1.0));
}

namespace {

void add_quad(std::vector<Triangle>& tris, const Eigen::Vector3d& a, const Eigen::Vector3d& b,
              const Eigen::Vector3d& c, const Eigen::Vector3d& d) {
    tris.push_back({a, b, c});
    tris.push_back({a, c, d});
}

}  // namespace

VehicleBody default_vehicle_body() {
    // Box hull: x in [-2, 2], y in [-0.9, 0.9], z in [-0.2, 1.5].
    const double x0 = -2.0, x1 = 2.0;
    const double y0 = -0.9, y1 = 0.9;
    const double z0 = -0.2, z1 = 1.5;

    const Eigen::Vector3d p000(x0, y0, z0), p100(x1, y0, z0), p010(x0, y1, z0), p110(x1, y1, z0);
    const Eigen::Vector3d p001(x0, y0, z1), p101(x1, y0, z1), p011(x0, y1, z1), p111(x1, y1, z1);

    VehicleBody body;
    body.triangles.reserve(12);
    add_quad(body.triangles, p000, p010, p110, p100);  // bottom
    add_quad(body.triangles, p001, p101, p111, p011);  // top
    add_quad(body.triangles, p100, p110, p111, p101);  // front (+x)
    add_quad(body.triangles, p000, p001, p011, p010);  // rear (-x)
    add_quad(body.triangles, p010, p011, p111, p110);  // left (+y)
    add_quad(body.triangles, p000, p100, p101, p001);  // right (-y)
    body.extents = Eigen::Vector3d(x1 - x0, y1 - y0, z1 - z0);
    return body;
}

}  // namespace nfloc::geometry
