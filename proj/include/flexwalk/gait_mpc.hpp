#pragma once

#include <array>
#include <vector>

#include "flexwalk/centroidal.hpp"
#include "flexwalk/gait.hpp"

namespace flexwalk
{
/// Reference stream sample at an arbitrary time inside the plan horizon.
struct ReferenceSample
{
    std::array<CentroidalState, 2> state;
    std::array<double, 2> jerk{0.0, 0.0};
    SupportPhase phase;
};

/// Feasible reference motion over one prediction horizon: per-axis states and
/// piecewise-constant jerks, the footstep schedule snapshot with optimized
/// targets, and the constraint intervals the solution was held to.
struct ReferencePlan
{
    double t0{0.0};
    double T_mpc{0.1};
    int horizon{0};
    std::array<std::vector<double>, 2> jerks;
    std::array<std::vector<CentroidalState>, 2> states;  // horizon + 1 entries
    Eigen::Vector2d bias{0.0, 0.0};
    /// VRP bounds enforced at samples 1..horizon (already shrunk by the
    /// margin and shifted by the bias preview).
    std::array<std::vector<Interval>, 2> vrp_bounds;
    /// Terminal DCM capturability interval.
    std::array<Interval, 2> terminal_bounds;
    std::array<double, 2> kkt_residual{0.0, 0.0};
    StepSequence schedule;

    double horizon_duration() const { return T_mpc * horizon; }
};

/// Reference at `elapsed` seconds past the plan start, re-integrated exactly
/// at the requested instant with the plan's piecewise-constant jerk. Throws
/// StalePlanError for elapsed outside [0, horizon).
ReferenceSample replan_shift(const ReferencePlan& plan, double elapsed);

/// Herdt-style reference motion generator: a per-axis dense QP over jerks and
/// free footstep targets, constrained by the shrunk support intervals, the
/// stepping area and terminal capturability, minimizing velocity tracking
/// error, jerk, the ankle-torque proxy |v + n|^2 and a small step
/// regularization toward nominal placements.
class GaitMpc
{
public:
    GaitMpc(const GaitConfig& cfg, double omega_sq, const Eigen::Vector2d& margins);

    /// Solves the reference QP from nominal state x0 at absolute time t0.
    /// Optimized targets of free steps are written back into `sequence`.
    /// Throws MarginTooLargeError when a shrunk support is empty and
    /// PlannerInfeasibleError (with the violated rows) when the QP has no
    /// feasible point.
    ReferencePlan plan(const std::array<CentroidalState, 2>& x0,
                       const Eigen::Vector2d& aimed_velocity,
                       StepSequence& sequence,
                       double t0,
                       const Eigen::Vector2d& bias_preview) const;

    const SystemMatrices& system() const { return sys_; }
    const GaitConfig& config() const { return cfg_; }
    const Eigen::Vector2d& margins() const { return margins_; }

private:
    GaitConfig cfg_;
    SystemMatrices sys_;
    Eigen::Vector2d margins_;
};

}  // namespace flexwalk
