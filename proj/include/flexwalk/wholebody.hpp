#pragma once

#include <Eigen/Dense>
#include <array>

#include "flexwalk/centroidal.hpp"
#include "flexwalk/gait.hpp"

namespace flexwalk
{
/// Desired value, rate and acceleration of a task, with PD gains applied by
/// the printed feedback law pi = Kp (g - g_des) + Kd (g_dot - g_dot_des)
/// + g_ddot_des; stabilizing gains are negative under this convention.
struct TaskReference
{
    Eigen::Vector3d value{0.0, 0.0, 0.0};
    Eigen::Vector3d rate{0.0, 0.0, 0.0};
    Eigen::Vector3d accel{0.0, 0.0, 0.0};
    double kp{0.0};
    double kd{0.0};
};

Eigen::Vector3d task_feedback(const Eigen::Vector3d& gamma, const Eigen::Vector3d& gamma_dot,
                              const TaskReference& ref);

/// C2 swing trajectory: min-jerk quintic in the horizontal plane, two joined
/// quintics vertically through the apex. Throws InfeasibleSwingError when the
/// peak speed exceeds max_speed.
class SwingSpline
{
public:
    SwingSpline() = default;
    SwingSpline(const Eigen::Vector2d& from, const Eigen::Vector2d& to, double duration,
                double apex_height, double max_speed);

    struct Sample
    {
        Eigen::Vector3d position{0.0, 0.0, 0.0};
        Eigen::Vector3d velocity{0.0, 0.0, 0.0};
        Eigen::Vector3d acceleration{0.0, 0.0, 0.0};
    };

    /// Evaluated at t clamped to [0, duration].
    Sample at(double t) const;
    double duration() const { return duration_; }
    double peak_speed() const { return peak_speed_; }

private:
    Eigen::Vector2d from_{0.0, 0.0};
    Eigen::Vector2d to_{0.0, 0.0};
    double duration_{1.0};
    double apex_{0.05};
    double peak_speed_{0.0};
};

/// Waist yaw as the bisector of the two foot yaws on the circle; ties from
/// opposite yaws resolve to left + pi/2.
double waist_yaw_reference(double left_yaw, double right_yaw);

struct Wrench
{
    Eigen::Vector3d force{0.0, 0.0, 0.0};
    Eigen::Vector3d torque{0.0, 0.0, 0.0};  // about the foot center
};

struct WrenchDistribution
{
    Wrench right;
    Wrench left;
    bool single_support{false};
    double kkt_residual{0.0};
};

/// Contact wrenches realizing the desired centroidal motion:
///   sum f = m (c_ddot - g),  sum (r_k - c) x f_k + tau_k = L_dot.
/// Single support is determined uniquely; double support minimizes
/// ||phi_R||^2 + ||phi_L||^2 subject to unilaterality and the friction
/// pyramid (|f_xy| <= mu/sqrt(2) f_z per axis). Throws
/// DistributionInfeasibleError when no admissible wrench pair exists.
WrenchDistribution distribute_wrench(const Eigen::Vector3d& com_des,
                                     const Eigen::Vector3d& com_acc_des,
                                     const Eigen::Vector3d& angular_momentum_rate_des,
                                     const SupportPhase& phase,
                                     double friction_mu,
                                     double mass,
                                     double gravity);

/// Consistent task bundle for one control tick: CoM task equals the
/// stabilized next state, feet follow their placements or the swing spline,
/// the waist yaw bisects the feet, and the wrench targets are computed from
/// the same CoM acceleration the CoM task commands.
struct InterfaceReferences
{
    TaskReference com;
    SwingSpline::Sample left_foot;
    SwingSpline::Sample right_foot;
    double waist_yaw{0.0};
    WrenchDistribution wrenches;
};

struct SwingContext
{
    const SwingSpline* spline{nullptr};
    Foot foot{Foot::Left};
    double time_in_swing{0.0};
};

InterfaceReferences interface_references(const std::array<CentroidalState, 2>& x_next,
                                         double com_height,
                                         const SupportPhase& phase,
                                         const SwingContext& swing,
                                         double friction_mu,
                                         double mass,
                                         double gravity);

}  // namespace flexwalk
