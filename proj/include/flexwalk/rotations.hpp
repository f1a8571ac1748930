#pragma once

#include <Eigen/Dense>

namespace flexwalk
{
Eigen::Matrix3d rot_x(double angle);
Eigen::Matrix3d rot_y(double angle);
Eigen::Matrix3d rot_z(double angle);

/// Selection matrix S^i: zero except for a 1 on the i-th diagonal entry
/// (0 = x, 1 = y, 2 = z).
Eigen::Matrix3d axis_selector(int axis);

/// Rotation composed in intrinsic z-x-y order, angles stored component-wise
/// (q(0) about x, q(1) about y, q(2) about z): R = Rz(q_z) Rx(q_x) Ry(q_y).
Eigen::Matrix3d rot_zxy(const Eigen::Vector3d& q);

/// Rotation composed in intrinsic y-x order from pitch/roll deflections
/// theta = (theta_x, theta_y): R = Ry(theta_y) Rx(theta_x).
Eigen::Matrix3d rot_yx(const Eigen::Vector2d& theta);

/// Factors R back into intrinsic z-x-y angles with the middle (x) angle in
/// (-pi/2, pi/2). Throws SingularityError within 1e-6 rad of the gimbal lock.
Eigen::Vector3d euler_zxy(const Eigen::Matrix3d& R);

/// Mapping from z-x-y Euler rates to the angular velocity,
/// M = S^z + Rz S^x + Rz Rx S^y, so that omega = M * q_dot.
Eigen::Matrix3d euler_rate_map_zxy(const Eigen::Vector3d& q);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double angle);

}  // namespace flexwalk
