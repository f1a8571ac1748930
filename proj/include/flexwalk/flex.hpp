#pragma once

#include <Eigen/Dense>

namespace flexwalk
{
/// Spring-damper parameters of one hip's virtual flexibility joint, per
/// deflection axis (x = roll, y = pitch), plus the lever arm from the hip
/// joint to the concentrated deflection point.
struct FlexParams
{
    Eigen::Vector2d stiffness{4900.0, 4900.0};  // N m / rad
    Eigen::Vector2d damping{140.0, 140.0};      // N m s / rad
    Eigen::Vector3d lever{0.0, 0.0, 0.09};      // m

    /// Same stiffness on both axes, damping defaulted to 2 sqrt(k).
    static FlexParams isotropic(double k_f);
    static FlexParams isotropic(double k_f, double d_f);
    void validate() const;
};

/// Estimated deflection state of one hip: pitch/roll angles, filtered rates,
/// low-pass filter memory and the previous estimate.
struct FlexState
{
    Eigen::Vector2d theta{0.0, 0.0};      // rad, (x, y)
    Eigen::Vector2d theta_dot{0.0, 0.0};  // rad/s, filtered
    Eigen::Vector2d lpf_state{0.0, 0.0};
    Eigen::Vector2d theta_prev{0.0, 0.0};

    bool valid() const;
};

/// Measured hip joint state and commanded load, used to approximate the
/// flexing torque. Angles stored component-wise (x, y, z), rotations applied
/// in z-x-y order.
struct HipConfiguration
{
    Eigen::Vector3d joint_angles{0.0, 0.0, 0.0};     // rad
    Eigen::Vector3d angular_velocity{0.0, 0.0, 0.0};  // rad/s
    Eigen::Vector3d commanded_torque{0.0, 0.0, 0.0};  // N m
    Eigen::Vector3d expected_force{0.0, 0.0, 0.0};    // N
};

/// Spring-damper law tau_f = -k theta - d theta_dot, per axis.
Eigen::Vector2d flex_torque(const Eigen::Vector2d& theta, const Eigen::Vector2d& theta_dot,
                            const FlexParams& params);

/// Discrete deflection estimate
///   theta = (d theta_prev - tau_f dt) / (k dt + d)
/// with the rate low-pass filtered from the finite difference.
/// lpf_cutoff_hz <= 0 disables the filter (raw finite difference).
FlexState estimate_deflection(const Eigen::Vector2d& tau_f, const FlexState& state,
                              const FlexParams& params, double dt, double lpf_cutoff_hz);

/// Flexing-torque approximation from commanded hip torque and expected force:
///   tau_f = [ Rz(q_z) S^x tau + Rz(q_z) Rx(q_x) S^y tau
///             + R(theta^yx) (l x f) ]^(x,y)
Eigen::Vector2d approx_flex_torque(const HipConfiguration& hip, const Eigen::Vector2d& theta,
                                   const FlexParams& params);

/// Rigid 3-joint hip equivalent to the 5-rotation flexible chain:
///   R(q_hat^zxy) = R(theta^yx) R(q^zxy)
/// and rates solved from the z-x-y Euler rate map of the equivalent angles.
/// Throws SingularityError near gimbal alignment.
struct EquivalentHip
{
    Eigen::Vector3d angles;  // component-wise (x, y, z)
    Eigen::Vector3d rates;
};

EquivalentHip equivalent_hip(const HipConfiguration& hip, const Eigen::Vector2d& theta,
                             const Eigen::Vector2d& theta_dot);

/// Rigid-model error of the lever arm: Delta = R(theta^yx) l - l.
Eigen::Vector3d lever_arm_delta(const Eigen::Vector2d& theta, const Eigen::Vector3d& lever);

/// Corrected foot positions and CoM:
///   s_i <- s_i^fk + Delta_i,   c <- c^fk + sum_i Delta_i m_i / m.
struct LeverArmCorrection
{
    Eigen::Vector3d foot_left;
    Eigen::Vector3d foot_right;
    Eigen::Vector3d com;
};

LeverArmCorrection lever_arm_correction(const Eigen::Vector2d& theta_left,
                                        const Eigen::Vector2d& theta_right,
                                        const FlexParams& params_left,
                                        const FlexParams& params_right,
                                        const Eigen::Vector3d& foot_left_fk,
                                        const Eigen::Vector3d& foot_right_fk,
                                        const Eigen::Vector3d& com_fk,
                                        double leg_mass,
                                        double total_mass);

}  // namespace flexwalk
