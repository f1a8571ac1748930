#pragma once

#include <Eigen/Dense>
#include <functional>

namespace flexwalk
{
struct NelderMeadOptions
{
    /// Terminate when the simplex diameter (max infinity-norm distance from
    /// the best vertex) falls below this.
    double simplex_tolerance{1e-8};
    int max_evaluations{10000};
    /// Initial per-coordinate step: rel * |x0_i|, or abs when x0_i is ~0.
    double initial_step_rel{0.05};
    double initial_step_abs{0.25};
};

struct NelderMeadResult
{
    Eigen::VectorXd x;
    double value{0.0};
    int evaluations{0};
    bool converged{false};
};

/// Derivative-free simplex minimization with the adaptive parameter choice
/// (reflection 1, expansion 1 + 2/n, contraction 0.75 - 1/(2n),
/// shrink 1 - 1/n). Deterministic for fixed inputs.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0,
                             const NelderMeadOptions& options = {});

}  // namespace flexwalk
