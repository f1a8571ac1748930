#pragma once

#include <Eigen/Dense>
#include <vector>

namespace flexwalk
{
/// Per-axis CoM triplet (position, velocity, acceleration). The lateral
/// dynamics are identical and decoupled in x and y, so one instance is held
/// per horizontal axis.
struct CentroidalState
{
    double pos{0.0};
    double vel{0.0};
    double acc{0.0};

    Eigen::Vector3d vec() const { return {pos, vel, acc}; }
    static CentroidalState from_vec(const Eigen::Vector3d& v) { return {v(0), v(1), v(2)}; }
    bool finite() const;
};

/// Sampled jerk-controlled triple integrator with the VRP as output.
/// A and B are the exact polynomial-in-T forms; V = [1, 0, -1/omega^2].
struct SystemMatrices
{
    Eigen::Matrix3d A;
    Eigen::Vector3d B;
    Eigen::RowVector3d V;
    double T{0.0};
    double omega_sq{0.0};

    /// Builds the matrices for sampling period T and constant omega^2.
    /// Throws DomainError unless T > 0 and omega_sq > 0.
    static SystemMatrices make(double T, double omega_sq);

    double omega() const;
    /// VB, a scalar: T^3/6 - T/omega^2. Negative for any realistic T.
    double vb() const { return V * B; }
};

/// A single ground contact: application point and force, world frame.
struct ContactForce
{
    Eigen::Vector3d point;
    Eigen::Vector3d force;
};

/// Inputs needed to evaluate the bias term n = p - v.
struct CentroidalInputs
{
    double mass{0.0};
    double gravity{9.81};
    /// Lateral angular-momentum rate (x, y) [kg m^2/s^2].
    Eigen::Vector2d angular_momentum_rate{0.0, 0.0};
    std::vector<ContactForce> contacts;
};

/// omega^2 = g / c_z. Throws DomainError on non-positive input.
double omega_from_height(double com_height, double gravity);

/// One exact discrete step x+ = A x + B u.
CentroidalState step_dynamics(const CentroidalState& x, double jerk, const SystemMatrices& sys);

/// Exact constant-jerk propagation over an arbitrary interval tau >= 0.
CentroidalState propagate_constant_jerk(const CentroidalState& x, double jerk, double tau);

/// VRP output v = c - c_ddot / omega^2.
double vrp(const CentroidalState& x, const SystemMatrices& sys);

/// Divergent component of motion xi = c + c_dot / omega. Throws DomainError
/// for omega <= 0.
double dcm(const CentroidalState& x, double omega);

/// Bias term n = p - v for both lateral axes:
///   n = c_ddot/omega^2 - (m c_z c_ddot - S Ldot)/(m (c_ddot_z + g))
///       + sum_k r_k^z f_k^xy / sum_k f_k^z
/// with S the pi/2 rotation. Throws DegenerateContactError when the total
/// normal force is not positive and DomainError when m (c_ddot_z + g) == 0.
Eigen::Vector2d bias_term(const Eigen::Vector2d& com_acc_xy,
                          double com_height,
                          double com_acc_z,
                          const CentroidalInputs& in,
                          const SystemMatrices& sys);

}  // namespace flexwalk
