#include "flexwalk/centroidal.hpp"

#include <cmath>

#include "flexwalk/errors.hpp"

namespace flexwalk
{
bool CentroidalState::finite() const
{
    return std::isfinite(pos) && std::isfinite(vel) && std::isfinite(acc);
}

SystemMatrices SystemMatrices::make(double T, double omega_sq)
{
    if (!(T > 0.0))
    {
        throw DomainError("SystemMatrices: T must be positive");
    }
    if (!(omega_sq > 0.0))
    {
        throw DomainError("SystemMatrices: omega_sq must be positive");
    }
    SystemMatrices sys;
    sys.T = T;
    sys.omega_sq = omega_sq;
    sys.A << 1.0, T, T * T / 2.0,  //
        0.0, 1.0, T,               //
        0.0, 0.0, 1.0;
    sys.B << T * T * T / 6.0, T * T / 2.0, T;
    sys.V << 1.0, 0.0, -1.0 / omega_sq;
    return sys;
}

double SystemMatrices::omega() const
{
    return std::sqrt(omega_sq);
}

double omega_from_height(double com_height, double gravity)
{
    if (!(com_height > 0.0) || !(gravity > 0.0))
    {
        throw DomainError("omega_from_height: com_height and gravity must be positive");
    }
    return gravity / com_height;
}

CentroidalState step_dynamics(const CentroidalState& x, double jerk, const SystemMatrices& sys)
{
    return CentroidalState::from_vec(sys.A * x.vec() + sys.B * jerk);
}

CentroidalState propagate_constant_jerk(const CentroidalState& x, double jerk, double tau)
{
    CentroidalState out;
    out.pos = x.pos + x.vel * tau + x.acc * tau * tau / 2.0 + jerk * tau * tau * tau / 6.0;
    out.vel = x.vel + x.acc * tau + jerk * tau * tau / 2.0;
    out.acc = x.acc + jerk * tau;
    return out;
}

double vrp(const CentroidalState& x, const SystemMatrices& sys)
{
    return sys.V * x.vec();
}

double dcm(const CentroidalState& x, double omega)
{
    if (!(omega > 0.0))
    {
        throw DomainError("dcm: omega must be positive");
    }
    return x.pos + x.vel / omega;
}

Eigen::Vector2d bias_term(const Eigen::Vector2d& com_acc_xy,
                          double com_height,
                          double com_acc_z,
                          const CentroidalInputs& in,
                          const SystemMatrices& sys)
{
    const double vertical = in.mass * (com_acc_z + in.gravity);
    if (vertical == 0.0)
    {
        throw DomainError("bias_term: m (c_ddot_z + g) is zero");
    }

    // S Ldot with S = [[0, -1], [1, 0]]
    const Eigen::Vector2d s_ldot(-in.angular_momentum_rate.y(), in.angular_momentum_rate.x());

    Eigen::Vector2d n = com_acc_xy / sys.omega_sq -
                        (in.mass * com_height * com_acc_xy - s_ldot) / vertical;

    if (!in.contacts.empty())
    {
        double normal_sum = 0.0;
        Eigen::Vector2d height_weighted = Eigen::Vector2d::Zero();
        for (const auto& contact : in.contacts)
        {
            normal_sum += contact.force.z();
            height_weighted += contact.point.z() * contact.force.head<2>();
        }
        if (!(normal_sum > 0.0))
        {
            throw DegenerateContactError("bias_term: total normal force must be positive");
        }
        n += height_weighted / normal_sum;
    }
    return n;
}

}  // namespace flexwalk
