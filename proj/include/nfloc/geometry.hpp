// Coordinate frames, vehicle body model, sub-array poses, image sources,
// arrival angles, wavenumber vectors and occlusion tests.
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace nfloc::geometry {

/// Rigid pose: position in the parent frame, rotation mapping local -> parent.
struct Pose {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
};

/// One antenna sub-array: mount point and orientation in the vehicle frame
/// plus element positions in the sub-array frame (boresight along local +x,
/// elements in the local y-z plane).
struct SubArraySpec {
    Eigen::Vector3d placement = Eigen::Vector3d::Zero();
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    std::vector<Eigen::Vector3d> elements;
};

/// A deployment is the set of sub-arrays mounted on the vehicle.
using Deployment = std::vector<SubArraySpec>;

struct Triangle {
    Eigen::Vector3d a, b, c;
};

/// Triangle mesh of the vehicle hull, in vehicle-local coordinates.
struct VehicleBody {
    std::vector<Triangle> triangles;
    Eigen::Vector3d extents = Eigen::Vector3d::Zero();
};

/// Infinite reflecting plane (point + unit normal), global frame.
struct ReflectorPlane {
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
};

/// Geometry of one propagation path as seen from a sub-array.
/// path_index 0 is the direct path, 1 the ground-reflected path.
struct PathGeometry {
    int path_index = 0;
    Eigen::Vector3d local_source = Eigen::Vector3d::Zero();  // sub-array frame
    double distance = 0.0;   // meters, equals |local_source|
    double theta_az = 0.0;   // radians
    double theta_el = 0.0;   // radians
    bool visible = false;
};

/// True if R is orthonormal with determinant +1 within tol.
bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9);

/// Rotation by `angle` about the z-axis.
Eigen::Matrix3d heading_rotation(double angle);

/// Rodrigues rotation from an axis-angle vector (angle = |v|, axis = v/|v|).
Eigen::Matrix3d axis_angle_rotation(const Eigen::Vector3d& v);

/// Reflect a point across the vehicle's length-wise vertical center plane
/// (the local x-z plane).
Eigen::Vector3d mirror_across_center_plane(const Eigen::Vector3d& v);

/// Mirrored sub-array orientation for a placement reflected across the
/// length-wise center plane.
Eigen::Matrix3d mirror_rotation_across_center_plane(const Eigen::Matrix3d& r);

/// Global pose of a sub-array mounted on a vehicle: position p + R*delta,
/// rotation R*R_k.
Pose sub_array_pose(const Pose& vehicle, const SubArraySpec& spec);

/// Image of `source` across the reflector plane (Householder reflection).
Eigen::Vector3d mirror_source(const Eigen::Vector3d& source, const ReflectorPlane& plane);

/// Source point expressed in the sub-array frame: R~^T (source - p_k).
Eigen::Vector3d local_source(const Pose& sub_array, const Eigen::Vector3d& source_global);

struct ArrivalAngles {
    double az = 0.0;
    double el = 0.0;
};

/// Azimuth/elevation of an incoming wave from the local source direction u:
/// az = -atan2(u_y, u_x), el = asin(u_z / |u|).
/// Throws std::invalid_argument for a zero vector.
ArrivalAngles arrival_angles(const Eigen::Vector3d& u);

/// Wavenumber vector of a wave arriving from direction (az, el):
/// (-2*pi/lambda) * [cos(az)cos(el), -sin(az)cos(el), sin(el)].
Eigen::Vector3d wavenumber(double theta_az, double theta_el, double wavelength);

/// Moeller-Trumbore segment/triangle test. The segment runs from `origin` to
/// `origin + dir`; hits count for normalized parameter t in (t_eps, 1).
bool segment_hits_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                           const Triangle& tri, double t_eps);

/// Visibility of a source at local direction u from a sub-array mounted at
/// `mount` (a pose in the vehicle frame). A path is occluded when it falls
/// outside the +/-90 deg field of view or when the segment toward the source
/// intersects the body mesh.
bool occlusion_test(const Pose& mount, const Eigen::Vector3d& u, const VehicleBody& body);

/// LOS (and optionally ground-reflected) path geometry for one sub-array,
/// with visibility resolved against the body mesh and the field of view.
std::vector<PathGeometry> path_geometries(const Pose& vehicle, const SubArraySpec& spec,
                                          const VehicleBody& body, const ReflectorPlane& ground,
                                          bool include_ground_reflection);

/// Angle between the unfolded reflected ray (image source -> sub-array) and
/// the plane normal; feeds the reflection-coefficient evaluation.
double incidence_angle_from_normal(const Eigen::Vector3d& sub_array_position,
                                   const Eigen::Vector3d& image_source,
                                   const ReflectorPlane& plane);

/// Default box hull, 4.0 x 1.8 x 1.7 m. The vehicle reference point sits
/// 0.2 m above the ground contact, so the hull spans z in [-0.2, 1.5].
VehicleBody default_vehicle_body();

}  // namespace nfloc::geometry
