#include "flexwalk/rotations.hpp"

#include <algorithm>
#include <cmath>

#include "flexwalk/errors.hpp"

namespace flexwalk
{
Eigen::Matrix3d rot_x(double a)
{
    const double c = std::cos(a);
    const double s = std::sin(a);
    Eigen::Matrix3d r;
    r << 1, 0, 0, 0, c, -s, 0, s, c;
    return r;
}

Eigen::Matrix3d rot_y(double a)
{
    const double c = std::cos(a);
    const double s = std::sin(a);
    Eigen::Matrix3d r;
    r << c, 0, s, 0, 1, 0, -s, 0, c;
    return r;
}

Eigen::Matrix3d rot_z(double a)
{
    const double c = std::cos(a);
    const double s = std::sin(a);
    Eigen::Matrix3d r;
    r << c, -s, 0, s, c, 0, 0, 0, 1;
    return r;
}

Eigen::Matrix3d axis_selector(int axis)
{
    Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
    s(axis, axis) = 1.0;
    return s;
}

Eigen::Matrix3d rot_zxy(const Eigen::Vector3d& q)
{
    return rot_z(q.z()) * rot_x(q.x()) * rot_y(q.y());
}

Eigen::Matrix3d rot_yx(const Eigen::Vector2d& theta)
{
    return rot_y(theta.y()) * rot_x(theta.x());
}

Eigen::Vector3d euler_zxy(const Eigen::Matrix3d& R)
{
    // R = Rz(a) Rx(b) Ry(c):
    //   R(2,1) = sin(b), R(0,1) = -sin(a)cos(b), R(1,1) = cos(a)cos(b),
    //   R(2,0) = -cos(b)sin(c), R(2,2) = cos(b)cos(c)
    const double sb = std::clamp(R(2, 1), -1.0, 1.0);
    // distance of the middle angle from +/-pi/2 is acos(|sin b|)
    if (std::acos(std::abs(sb)) < 1e-6)
    {
        throw SingularityError("euler_zxy: middle angle within 1e-6 of +/-pi/2");
    }
    const double b = std::asin(sb);
    const double a = std::atan2(-R(0, 1), R(1, 1));
    const double c = std::atan2(-R(2, 0), R(2, 2));
    return {b, c, a};  // stored component-wise (x, y, z)
}

Eigen::Matrix3d euler_rate_map_zxy(const Eigen::Vector3d& q)
{
    return axis_selector(2) + rot_z(q.z()) * axis_selector(0) +
           rot_z(q.z()) * rot_x(q.x()) * axis_selector(1);
}

double wrap_angle(double a)
{
    const double two_pi = 2.0 * M_PI;
    double w = std::fmod(a, two_pi);
    if (w <= -M_PI)
    {
        w += two_pi;
    }
    else if (w > M_PI)
    {
        w -= two_pi;
    }
    return w;
}

}  // namespace flexwalk
