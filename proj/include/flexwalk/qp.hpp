#pragma once

#include <Eigen/Dense>

namespace flexwalk
{
/// Result of a dense convex QP solve, including the KKT residuals so callers
/// can assert solution quality.
struct QpResult
{
    Eigen::VectorXd x;
    double objective{0.0};
    /// Multipliers for A_eq x = b_eq (sign per Hx + g + A_eq' lambda + A_in' mu = 0).
    Eigen::VectorXd eq_duals;
    /// Multipliers for A_in x <= b_in, nonnegative.
    Eigen::VectorXd ineq_duals;
    int iterations{0};

    double stationarity{0.0};
    double primal_residual{0.0};
    double complementarity{0.0};
    double kkt_residual() const;
};

/// Solves  min 0.5 x'Hx + g'x  s.t.  A_eq x = b_eq,  A_in x <= b_in
/// with H symmetric positive definite, by the Goldfarb-Idnani dual
/// active-set method. Throws QpError when the problem is infeasible or H is
/// not positive definite. Deterministic for fixed inputs.
QpResult solve_qp(const Eigen::MatrixXd& H,
                  const Eigen::VectorXd& g,
                  const Eigen::MatrixXd& A_eq,
                  const Eigen::VectorXd& b_eq,
                  const Eigen::MatrixXd& A_in,
                  const Eigen::VectorXd& b_in);

}  // namespace flexwalk
