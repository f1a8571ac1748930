#pragma once

#include <Eigen/Dense>
#include <optional>

#include "flexwalk/centroidal.hpp"
#include "flexwalk/nelder_mead.hpp"

namespace flexwalk
{
/// Symmetric bound on the lumped jerk disturbance e_u - K e_x.
struct DisturbanceBound
{
    double d_max{0.0};
};

/// A certified feedback gain: the row vector K, the maximum VRP tracking
/// error over the disturbed invariant set, and a componentwise box holding
/// that set.
struct TubeGain
{
    Eigen::RowVector3d K;
    double v_tilde_max{0.0};
    Eigen::Vector3d omega_box{0.0, 0.0, 0.0};
    double spectral_radius{1.0};
};

double spectral_radius(const Eigen::Matrix3d& m);

/// Support-function bound of the minimal robust invariant set in the output
/// direction c_row: d_max * sum_i |c_row (A+BK)^i B|, summed until a
/// geometric tail bound (from an induced-norm contraction estimate of a
/// power of A+BK) drops below tail_tol. The returned value over-approximates
/// the exact series by at most tail_tol; for the symmetric interval
/// disturbance it is exact for the mRPI support function in that direction.
///
/// Throws InstabilityError when A+BK is not strictly stable and
/// ConvergenceError when no contracting power is found within budget.
double mrpi_support_bound(const Eigen::RowVector3d& c_row,
                          const Eigen::RowVector3d& K,
                          const SystemMatrices& sys,
                          const DisturbanceBound& d,
                          double tail_tol);

/// Maximum VRP tracking error over the invariant set (direction V).
double mrpi_vrp_bound(const Eigen::RowVector3d& K,
                      const SystemMatrices& sys,
                      const DisturbanceBound& d,
                      double tail_tol);

/// Componentwise box over-approximation of the invariant set.
Eigen::Vector3d mrpi_state_box(const Eigen::RowVector3d& K,
                               const SystemMatrices& sys,
                               const DisturbanceBound& d,
                               double tail_tol);

/// Bundles K with its certified bounds. Throws InstabilityError for an
/// unstable closed loop.
TubeGain certify_gain(const Eigen::RowVector3d& K,
                      const SystemMatrices& sys,
                      const DisturbanceBound& d,
                      double tail_tol);

/// State feedback placing all closed-loop eigenvalues of A+BK on the given
/// real locations (Ackermann), with the u = u_ref + K x_tilde convention.
Eigen::RowVector3d place_poles(const SystemMatrices& sys, const Eigen::Vector3d& poles);

/// All three poles at the origin: (A+BK)^3 = 0.
Eigen::RowVector3d deadbeat_gain(const SystemMatrices& sys);

/// Minimizes the VRP error bound over K with Nelder-Mead, enforcing strict
/// stability through a large finite penalty for spectral radius >= 1 - 1e-6.
/// Seeded at seed_K when it stabilizes, else at the deadbeat gain.
/// Deterministic given the seed and tolerances.
TubeGain optimize_gain(const SystemMatrices& sys,
                       const DisturbanceBound& d,
                       std::optional<Eigen::RowVector3d> seed_K = std::nullopt,
                       double tail_tol = 1e-9,
                       const NelderMeadOptions& nm = {});

/// Bounds on the saturated feedback term sat(K x_tilde):
///   q_min = (p_min - n_next - V(A x_tilde + x_ref_next)) / VB
///   q_max = (p_max - n_next - V(A x_tilde + x_ref_next)) / VB
///   lower = min(q_min, q_max) - e_u_min,  upper = max(q_min, q_max) - e_u_max.
/// VB is negative for any realistic sampling period, so the division results
/// swap while each disturbance bound stays attached to its side; this keeps
/// the next VRP inside [p_min, p_max] for every e_u in [e_u_min, e_u_max].
/// Throws InfeasibleSaturationError when lower > upper.
struct SaturationLimits
{
    double lower{0.0};
    double upper{0.0};
};

SaturationLimits saturation_limits(const Eigen::Vector3d& x_tilde_hat,
                                   const Eigen::Vector3d& x_ref_next,
                                   double n_next,
                                   double p_min,
                                   double p_max,
                                   double e_u_min,
                                   double e_u_max,
                                   const Eigen::RowVector3d& K,
                                   const SystemMatrices& sys);

struct StabilizeResult
{
    CentroidalState x_hat_next;
    double jerk{0.0};
    double feedback_raw{0.0};
    bool saturated{false};
};

/// One stabilizer tick: jerk = u_ref + clamp(K (x_hat - x_ref), limits) and
/// x_hat_next = A x_hat + B jerk.
StabilizeResult stabilize_step(const CentroidalState& x_hat,
                               const CentroidalState& x_ref,
                               double u_ref,
                               const Eigen::RowVector3d& K,
                               const SaturationLimits& limits,
                               const SystemMatrices& sys);

}  // namespace flexwalk
