#pragma once

#include <Eigen/Dense>
#include <vector>

#include "flexwalk/flex.hpp"
#include "flexwalk/gait.hpp"

namespace flexwalk
{
/// Synthesized single-support static stance record used for stiffness
/// identification: per-tick commanded flexing torques, the noisy sole wrench
/// and the rigid-model kinematic outputs.
struct StanceExperiment
{
    Foot stance{Foot::Left};
    double dt{0.002};
    Eigen::Vector2d stance_foot_fk{0.0, 0.0};  // rigid-FK stance foot position
    std::vector<Eigen::Vector2d> tau_meas_left;   // commanded flex torque, left hip
    std::vector<Eigen::Vector2d> tau_meas_right;  // right hip
    std::vector<Eigen::Vector2d> sole_torque;     // noisy, N m
    std::vector<double> sole_force_z;             // noisy, N
    std::vector<Eigen::Vector2d> com_fk;          // rigid-FK CoM, lateral
    /// Samples before this index are settling transient and are skipped.
    int settle_samples{0};

    int size() const { return static_cast<int>(sole_force_z.size()); }
};

struct StiffnessGrid
{
    double left_min{1090.0};
    double left_max{4360.0};
    int left_n{30};
    double right_min{2450.0};
    double right_max{9800.0};
    int right_n{30};
};

struct StiffnessIdentification
{
    double k_left{0.0};
    double k_right{0.0};
    /// Two-standard-deviation uncertainty of the intersection.
    double band_left{0.0};
    double band_right{0.0};
    std::vector<double> grid_left;
    std::vector<double> grid_right;
    /// Mean equilibrium error c_y - p_y per grid point, one surface per
    /// experiment; rows follow grid_left, columns grid_right.
    Eigen::MatrixXd error_left_stance;
    Eigen::MatrixXd error_right_stance;
};

/// CoP from the sole force/torque sensor: p = s + S tau^(xy) / f_z with S the
/// pi/2 rotation. Throws NoContactError for a non-positive normal force.
Eigen::Vector2d measure_cop(const Eigen::Vector2d& sole_torque, double normal_force,
                            const Eigen::Vector2d& foot_position);

/// Grid search for hip stiffness from two static stances: for each assumed
/// pair the deflections are re-estimated from the recorded torques, the
/// posture-corrected CoM and measured CoP recomputed, and the lateral
/// equilibrium error surfaces intersected at their zero contours. The lever
/// arm, damping rule (2 sqrt k), filter cutoff and masses come from the
/// remaining arguments. Throws IdentificationFailedError (carrying the
/// closest grid point) when the contours do not intersect inside the grid.
StiffnessIdentification identify_stiffness(const StanceExperiment& left_stance,
                                           const StanceExperiment& right_stance,
                                           const StiffnessGrid& grid,
                                           const Eigen::Vector3d& lever,
                                           double lpf_cutoff_hz,
                                           double leg_mass,
                                           double total_mass);

}  // namespace flexwalk
