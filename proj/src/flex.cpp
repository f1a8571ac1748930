#include "flexwalk/flex.hpp"

#include <cmath>

#include "flexwalk/errors.hpp"
#include "flexwalk/rotations.hpp"

namespace flexwalk
{
FlexParams FlexParams::isotropic(double k_f)
{
    return isotropic(k_f, 2.0 * std::sqrt(k_f));
}

FlexParams FlexParams::isotropic(double k_f, double d_f)
{
    FlexParams p;
    p.stiffness = {k_f, k_f};
    p.damping = {d_f, d_f};
    p.validate();
    return p;
}

void FlexParams::validate() const
{
    if (!(stiffness.minCoeff() > 0.0))
    {
        throw DomainError("FlexParams: stiffness must be positive");
    }
    if (damping.minCoeff() < 0.0)
    {
        throw DomainError("FlexParams: damping must be nonnegative");
    }
}

bool FlexState::valid() const
{
    return theta.allFinite() && theta_dot.allFinite() &&
           theta.cwiseAbs().maxCoeff() < M_PI / 2.0;
}

Eigen::Vector2d flex_torque(const Eigen::Vector2d& theta, const Eigen::Vector2d& theta_dot,
                            const FlexParams& params)
{
    return -params.stiffness.cwiseProduct(theta) - params.damping.cwiseProduct(theta_dot);
}

FlexState estimate_deflection(const Eigen::Vector2d& tau_f, const FlexState& state,
                              const FlexParams& params, double dt, double lpf_cutoff_hz)
{
    if (!(dt > 0.0))
    {
        throw DomainError("estimate_deflection: dt must be positive");
    }
    FlexState next;
    next.theta_prev = state.theta;
    for (int i = 0; i < 2; i++)
    {
        const double denom = params.stiffness(i) * dt + params.damping(i);
        if (!(denom > 0.0))
        {
            throw DomainError("estimate_deflection: k dt + d must be positive");
        }
        next.theta(i) = (params.damping(i) * state.theta(i) - tau_f(i) * dt) / denom;
    }
    const Eigen::Vector2d raw_rate = (next.theta - state.theta) / dt;
    if (lpf_cutoff_hz > 0.0)
    {
        const double alpha = 1.0 - std::exp(-2.0 * M_PI * lpf_cutoff_hz * dt);
        next.lpf_state = state.lpf_state + alpha * (raw_rate - state.lpf_state);
    }
    else
    {
        next.lpf_state = raw_rate;
    }
    next.theta_dot = next.lpf_state;
    return next;
}

Eigen::Vector2d approx_flex_torque(const HipConfiguration& hip, const Eigen::Vector2d& theta,
                                   const FlexParams& params)
{
    const Eigen::Matrix3d rz = rot_z(hip.joint_angles.z());
    const Eigen::Matrix3d rzx = rz * rot_x(hip.joint_angles.x());
    const Eigen::Vector3d torque =
        rz * axis_selector(0) * hip.commanded_torque +
        rzx * axis_selector(1) * hip.commanded_torque +
        rot_yx(theta) * params.lever.cross(hip.expected_force);
    return torque.head<2>();
}

EquivalentHip equivalent_hip(const HipConfiguration& hip, const Eigen::Vector2d& theta,
                             const Eigen::Vector2d& theta_dot)
{
    EquivalentHip out;
    const Eigen::Matrix3d r_total = rot_yx(theta) * rot_zxy(hip.joint_angles);
    out.angles = euler_zxy(r_total);

    const Eigen::Vector3d theta_dot3(theta_dot.x(), theta_dot.y(), 0.0);
    const Eigen::Vector3d omega_hat = axis_selector(1) * theta_dot3 +
                                      rot_y(theta.y()) * axis_selector(0) * theta_dot3 +
                                      rot_yx(theta) * hip.angular_velocity;

    const Eigen::Matrix3d rate_map = euler_rate_map_zxy(out.angles);
    // The map loses rank when the middle (x) angle reaches +/-pi/2; euler_zxy
    // already rejected that neighbourhood.
    out.rates = rate_map.partialPivLu().solve(omega_hat);
    return out;
}

Eigen::Vector3d lever_arm_delta(const Eigen::Vector2d& theta, const Eigen::Vector3d& lever)
{
    return rot_yx(theta) * lever - lever;
}

LeverArmCorrection lever_arm_correction(const Eigen::Vector2d& theta_left,
                                        const Eigen::Vector2d& theta_right,
                                        const FlexParams& params_left,
                                        const FlexParams& params_right,
                                        const Eigen::Vector3d& foot_left_fk,
                                        const Eigen::Vector3d& foot_right_fk,
                                        const Eigen::Vector3d& com_fk,
                                        double leg_mass,
                                        double total_mass)
{
    if (!(total_mass > 0.0))
    {
        throw DomainError("lever_arm_correction: total mass must be positive");
    }
    const Eigen::Vector3d delta_left = lever_arm_delta(theta_left, params_left.lever);
    const Eigen::Vector3d delta_right = lever_arm_delta(theta_right, params_right.lever);
    LeverArmCorrection out;
    out.foot_left = foot_left_fk + delta_left;
    out.foot_right = foot_right_fk + delta_right;
    out.com = com_fk + (delta_left + delta_right) * (leg_mass / total_mass);
    return out;
}

}  // namespace flexwalk
