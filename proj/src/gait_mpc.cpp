#include "flexwalk/gait_mpc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "flexwalk/errors.hpp"
#include "flexwalk/qp.hpp"

namespace flexwalk
{
namespace
{
/// Affine expression over free footstep targets: constant + sum coeff * s_j.
struct AffineExpr
{
    double constant{0.0};
    std::vector<std::pair<int, double>> terms;  // (step index, coefficient)

    AffineExpr scaled(double a) const
    {
        AffineExpr out;
        out.constant = constant * a;
        for (const auto& [idx, c] : terms)
        {
            out.terms.emplace_back(idx, c * a);
        }
        return out;
    }
    AffineExpr plus(const AffineExpr& other) const
    {
        AffineExpr out = *this;
        out.constant += other.constant;
        out.terms.insert(out.terms.end(), other.terms.begin(), other.terms.end());
        return out;
    }
};

/// Per-axis support interval centers at one sample: a single moving box
/// (lo == hi) or an ordered hull for standing double support.
struct SupportExprs
{
    std::array<AffineExpr, 2> lo;
    std::array<AffineExpr, 2> hi;
};

struct Assembly
{
    // State prediction data, per axis.
    std::array<std::vector<Eigen::Vector3d>, 2> free_state;  // A^k x0, k = 0..N
    std::vector<Eigen::Vector3d> impulse;                    // A^i B, i = 0..N-1

    std::map<int, int> free_slot;  // step index -> footstep variable slot
};

double eval_nominal(const AffineExpr& e, const StepSequence& seq, int axis)
{
    double v = e.constant;
    for (const auto& [idx, c] : e.terms)
    {
        v += c * seq.steps()[idx].target(axis);
    }
    return v;
}

AffineExpr target_expr(const StepSequence& seq, int step_idx, int axis,
                       const std::map<int, int>& free_slot)
{
    AffineExpr e;
    if (free_slot.count(step_idx))
    {
        e.terms.emplace_back(step_idx, 1.0);
    }
    else
    {
        e.constant = seq.steps()[step_idx].target(axis);
    }
    return e;
}

/// Placement of foot f at time t as an expression over free targets.
AffineExpr placement_expr(const StepSequence& seq, Foot f, double t, int axis,
                          const std::map<int, int>& free_slot,
                          const Eigen::Vector2d& initial)
{
    int last = -1;
    for (size_t i = 0; i < seq.steps().size(); i++)
    {
        if (seq.steps()[i].foot == f && seq.steps()[i].touchdown <= t)
        {
            last = static_cast<int>(i);
        }
    }
    if (last < 0)
    {
        AffineExpr e;
        e.constant = initial(axis);
        return e;
    }
    return target_expr(seq, last, axis, free_slot);
}

SupportExprs support_exprs_at(const StepSequence& seq, double t,
                              const std::map<int, int>& free_slot,
                              const Eigen::Vector2d& initial_left,
                              const Eigen::Vector2d& initial_right)
{
    SupportExprs out;
    const int swing = seq.swinging_step(t);
    if (swing >= 0)
    {
        const Foot stance = other_foot(seq.steps()[swing].foot);
        const Eigen::Vector2d& init = stance == Foot::Left ? initial_left : initial_right;
        for (int axis = 0; axis < 2; axis++)
        {
            out.lo[axis] = placement_expr(seq, stance, t, axis, free_slot, init);
            out.hi[axis] = out.lo[axis];
        }
        return out;
    }

    const Step* prev = nullptr;
    const Step* next = nullptr;
    int prev_idx = -1;
    for (size_t i = 0; i < seq.steps().size(); i++)
    {
        const Step& s = seq.steps()[i];
        if (s.touchdown <= t)
        {
            prev = &s;
            prev_idx = static_cast<int>(i);
        }
        if (s.swing_start > t && next == nullptr)
        {
            next = &s;
        }
    }
    if (prev && next)
    {
        // Transfer: box center migrates from the outgoing support (the foot
        // about to swing) onto the freshly landed target.
        const double alpha =
            std::clamp((t - prev->touchdown) / (next->swing_start - prev->touchdown), 0.0, 1.0);
        const Eigen::Vector2d& init_next =
            next->foot == Foot::Left ? initial_left : initial_right;
        for (int axis = 0; axis < 2; axis++)
        {
            const AffineExpr from =
                placement_expr(seq, next->foot, t, axis, free_slot, init_next);
            const AffineExpr to = target_expr(seq, prev_idx, axis, free_slot);
            out.lo[axis] = from.scaled(1.0 - alpha).plus(to.scaled(alpha));
            out.hi[axis] = out.lo[axis];
        }
        return out;
    }

    // Standing double support: interval hull of both feet, ordered per axis
    // by the nominal placements. If the optimizer crosses the nominal order
    // the interval shrinks, staying inside the true hull.
    for (int axis = 0; axis < 2; axis++)
    {
        const AffineExpr left = placement_expr(seq, Foot::Left, t, axis, free_slot, initial_left);
        const AffineExpr right =
            placement_expr(seq, Foot::Right, t, axis, free_slot, initial_right);
        if (eval_nominal(left, seq, axis) <= eval_nominal(right, seq, axis))
        {
            out.lo[axis] = left;
            out.hi[axis] = right;
        }
        else
        {
            out.lo[axis] = right;
            out.hi[axis] = left;
        }
    }
    return out;
}

struct QpRows
{
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> rhs;
    std::vector<std::string> labels;

    void add(const Eigen::VectorXd& row, double bound, std::string label)
    {
        rows.push_back(row);
        rhs.push_back(bound);
        labels.push_back(std::move(label));
    }
};

}  // namespace

GaitMpc::GaitMpc(const GaitConfig& cfg, double omega_sq, const Eigen::Vector2d& margins)
    : cfg_(cfg), sys_(SystemMatrices::make(cfg.T_mpc, omega_sq)), margins_(margins)
{
    cfg_.validate();
    if (margins_.minCoeff() < 0.0)
    {
        throw DomainError("GaitMpc: margins must be nonnegative");
    }
}

ReferencePlan GaitMpc::plan(const std::array<CentroidalState, 2>& x0,
                            const Eigen::Vector2d& aimed_velocity,
                            StepSequence& sequence,
                            double t0,
                            const Eigen::Vector2d& bias_preview) const
{
    const int N = cfg_.horizon;
    const double half_dim[2] = {cfg_.foot_half_length, cfg_.foot_half_width};
    for (int axis = 0; axis < 2; axis++)
    {
        if (half_dim[axis] - margins_(axis) <= 0.0)
        {
            throw MarginTooLargeError("plan: margin " + std::to_string(margins_(axis)) +
                                      " m leaves an empty support interval on axis " +
                                      std::to_string(axis));
        }
    }

    // Footstep variables: steps that have not begun swinging and whose swing
    // starts inside the horizon.
    std::map<int, int> free_slot;
    for (size_t i = 0; i < sequence.steps().size(); i++)
    {
        const Step& s = sequence.steps()[i];
        if (!s.frozen && s.swing_start > t0 && s.swing_start < t0 + cfg_.horizon_duration())
        {
            const int slot = static_cast<int>(free_slot.size());
            free_slot[static_cast<int>(i)] = slot;
        }
    }
    const int n_u = N;
    const int n_s = static_cast<int>(free_slot.size());
    const int n_z = n_u + n_s;

    // Prediction data shared by both axes.
    std::vector<Eigen::Vector3d> impulse(N);  // A^i B
    impulse[0] = sys_.B;
    for (int i = 1; i < N; i++)
    {
        impulse[i] = sys_.A * impulse[i - 1];
    }
    std::array<std::vector<Eigen::Vector3d>, 2> free_state;
    for (int axis = 0; axis < 2; axis++)
    {
        free_state[axis].resize(N + 1);
        free_state[axis][0] = x0[axis].vec();
        for (int k = 1; k <= N; k++)
        {
            free_state[axis][k] = sys_.A * free_state[axis][k - 1];
        }
    }

    // Row of a state functional sel . x_k over the jerk block (+ constant).
    auto functional = [&](int axis, int k, const Eigen::RowVector3d& sel,
                          Eigen::VectorXd& row) -> double {
        row.setZero();
        for (int j = 0; j < k; j++)
        {
            row(j) = sel * impulse[k - 1 - j];
        }
        return sel * free_state[axis][k];
    };
    const Eigen::RowVector3d sel_vel(0.0, 1.0, 0.0);
    const Eigen::RowVector3d sel_dcm(1.0, 1.0 / sys_.omega(), 0.0);

    // Support expressions at every constrained sample.
    std::vector<SupportExprs> supports(N);
    for (int k = 1; k <= N; k++)
    {
        supports[k - 1] = support_exprs_at(sequence, t0 + k * cfg_.T_mpc, free_slot,
                                           sequence.foot_position(Foot::Left, t0 - 1e-9),
                                           sequence.foot_position(Foot::Right, t0 - 1e-9));
    }
    auto add_expr_to_row = [&](const AffineExpr& e, double scale, Eigen::VectorXd& row) {
        for (const auto& [idx, c] : e.terms)
        {
            row(n_u + free_slot.at(idx)) += scale * c;
        }
        return scale * e.constant;
    };

    ReferencePlan plan;
    plan.t0 = t0;
    plan.T_mpc = cfg_.T_mpc;
    plan.horizon = N;
    plan.bias = bias_preview;

    const char* axis_name[2] = {"x", "y"};
    for (int axis = 0; axis < 2; axis++)
    {
        const double margin = margins_(axis);
        const double n_bias = bias_preview(axis);
        const double half = half_dim[axis];

        Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(n_z, n_z);
        Eigen::VectorXd gradient = Eigen::VectorXd::Zero(n_z);
        auto add_cost = [&](const Eigen::VectorXd& row, double constant, double target,
                            double weight) {
            if (weight <= 0.0)
            {
                return;
            }
            hessian += 2.0 * weight * row * row.transpose();
            gradient += 2.0 * weight * (constant - target) * row;
        };

        Eigen::VectorXd row(n_z);
        // Velocity tracking, ankle-torque proxy and jerk costs.
        for (int k = 1; k <= N; k++)
        {
            row.setZero();
            const double c_vel = functional(axis, k, sel_vel, row);
            add_cost(row, c_vel, aimed_velocity(axis), cfg_.w_velocity);

            row.setZero();
            const double c_vrp = functional(axis, k, sys_.V, row);
            add_cost(row, c_vrp + n_bias, 0.0, cfg_.w_ankle);
        }
        for (int j = 0; j < N; j++)
        {
            row.setZero();
            row(j) = 1.0;
            add_cost(row, 0.0, 0.0, cfg_.w_jerk);
        }

        // Step regularization toward nominal placements.
        for (const auto& [idx, slot] : free_slot)
        {
            const Step& s = sequence.steps()[idx];
            const Foot prev_foot = other_foot(s.foot);
            const AffineExpr prev =
                placement_expr(sequence, prev_foot, s.swing_start, axis, free_slot,
                               sequence.foot_position(prev_foot, t0 - 1e-9));
            double nominal = eval_nominal(prev, sequence, axis);
            if (axis == 0)
            {
                nominal += std::clamp(aimed_velocity(0) * cfg_.step_duration, cfg_.stepping_x_min,
                                      cfg_.stepping_x_max);
            }
            else
            {
                const double width = std::clamp(cfg_.nominal_stance_width,
                                                cfg_.stepping_width_min, cfg_.stepping_width_max);
                nominal += s.foot == Foot::Left ? width : -width;
            }
            row.setZero();
            row(n_u + slot) = 1.0;
            add_cost(row, 0.0, nominal, cfg_.w_step);
        }
        hessian += 1e-10 * Eigen::MatrixXd::Identity(n_z, n_z);

        QpRows rows;
        Eigen::VectorXd r(n_z);
        // VRP inside the shrunk, bias-shifted support at every sample.
        for (int k = 1; k <= N; k++)
        {
            const SupportExprs& sup = supports[k - 1];
            r.setZero();
            double c_vrp = functional(axis, k, sys_.V, r);
            double rhs = add_expr_to_row(sup.hi[axis], -1.0, r);
            rows.add(r, -rhs - c_vrp + half - margin - n_bias,
                     std::string("vrp_upper[") + axis_name[axis] + "," + std::to_string(k) + "]");

            r.setZero();
            c_vrp = -functional(axis, k, sys_.V, r);
            r = -r;
            rhs = add_expr_to_row(sup.lo[axis], 1.0, r);
            rows.add(r, -rhs - c_vrp + half - margin + n_bias,
                     std::string("vrp_lower[") + axis_name[axis] + "," + std::to_string(k) + "]");
        }
        // Terminal capturability of the DCM.
        {
            const SupportExprs& sup = supports[N - 1];
            r.setZero();
            double c_dcm = functional(axis, N, sel_dcm, r);
            double rhs = add_expr_to_row(sup.hi[axis], -1.0, r);
            rows.add(r, -rhs - c_dcm + half - margin - n_bias,
                     std::string("terminal_upper[") + axis_name[axis] + "]");

            r.setZero();
            c_dcm = -functional(axis, N, sel_dcm, r);
            r = -r;
            rhs = add_expr_to_row(sup.lo[axis], 1.0, r);
            rows.add(r, -rhs - c_dcm + half - margin + n_bias,
                     std::string("terminal_lower[") + axis_name[axis] + "]");
        }
        // Stepping area and swing-speed displacement limits.
        const double speed_cap = cfg_.max_swing_speed * cfg_.ss_duration() / std::sqrt(2.0);
        for (const auto& [idx, slot] : free_slot)
        {
            const Step& s = sequence.steps()[idx];
            const Foot prev_foot = other_foot(s.foot);
            const AffineExpr prev =
                placement_expr(sequence, prev_foot, s.swing_start, axis, free_slot,
                               sequence.foot_position(prev_foot, t0 - 1e-9));
            double lo, hi;
            if (axis == 0)
            {
                lo = cfg_.stepping_x_min;
                hi = cfg_.stepping_x_max;
            }
            else if (s.foot == Foot::Left)
            {
                lo = cfg_.stepping_width_min;
                hi = cfg_.stepping_width_max;
            }
            else
            {
                lo = -cfg_.stepping_width_max;
                hi = -cfg_.stepping_width_min;
            }
            r.setZero();
            r(n_u + slot) = 1.0;
            double rhs = add_expr_to_row(prev, -1.0, r);
            rows.add(r, -rhs + hi,
                     std::string("step_max[") + axis_name[axis] + "," + std::to_string(idx) + "]");
            rows.add(-r, rhs - lo,
                     std::string("step_min[") + axis_name[axis] + "," + std::to_string(idx) + "]");

            // Same-foot travel cap from the limited swing speed.
            const AffineExpr same =
                placement_expr(sequence, s.foot, s.swing_start, axis, free_slot,
                               sequence.foot_position(s.foot, t0 - 1e-9));
            r.setZero();
            r(n_u + slot) = 1.0;
            rhs = add_expr_to_row(same, -1.0, r);
            rows.add(r, -rhs + speed_cap,
                     std::string("swing_speed_max[") + axis_name[axis] + "," +
                         std::to_string(idx) + "]");
            rows.add(-r, rhs + speed_cap,
                     std::string("swing_speed_min[") + axis_name[axis] + "," +
                         std::to_string(idx) + "]");
        }

        Eigen::MatrixXd a_in(rows.rows.size(), n_z);
        Eigen::VectorXd b_in(rows.rows.size());
        for (size_t i = 0; i < rows.rows.size(); i++)
        {
            a_in.row(i) = rows.rows[i].transpose();
            b_in(i) = rows.rhs[i];
        }

        QpResult solution;
        try
        {
            solution = solve_qp(hessian, gradient, Eigen::MatrixXd(0, n_z), Eigen::VectorXd(0),
                                a_in, b_in);
        }
        catch (const QpError& e)
        {
            // Report which rows cannot hold at the nominal decision (zero
            // jerks, nominal targets).
            Eigen::VectorXd z_nom = Eigen::VectorXd::Zero(n_z);
            for (const auto& [idx, slot] : free_slot)
            {
                z_nom(n_u + slot) = sequence.steps()[idx].target(axis);
            }
            std::vector<std::string> violated;
            const Eigen::VectorXd residual = a_in * z_nom - b_in;
            for (int i = 0; i < residual.size(); i++)
            {
                if (residual(i) > 1e-9)
                {
                    violated.push_back(rows.labels[i]);
                }
            }
            throw PlannerInfeasibleError(std::string("plan: reference QP infeasible on axis ") +
                                             axis_name[axis] + ": " + e.what(),
                                         violated);
        }

        // Write back optimized targets and store the trajectory.
        for (const auto& [idx, slot] : free_slot)
        {
            sequence.steps()[idx].target(axis) = solution.x(n_u + slot);
        }
        plan.kkt_residual[axis] = solution.kkt_residual();
        plan.jerks[axis].resize(N);
        for (int j = 0; j < N; j++)
        {
            plan.jerks[axis][j] = solution.x(j);
        }
    }

    // Roll the states and record the enforced intervals at the solution.
    for (int axis = 0; axis < 2; axis++)
    {
        plan.states[axis].resize(N + 1);
        plan.states[axis][0] = x0[axis];
        for (int k = 0; k < N; k++)
        {
            plan.states[axis][k + 1] =
                step_dynamics(plan.states[axis][k], plan.jerks[axis][k], sys_);
        }
        plan.vrp_bounds[axis].resize(N);
        for (int k = 1; k <= N; k++)
        {
            const SupportExprs& sup = supports[k - 1];
            const double lo = eval_nominal(sup.lo[axis], sequence, axis);
            const double hi = eval_nominal(sup.hi[axis], sequence, axis);
            plan.vrp_bounds[axis][k - 1] = {lo - half_dim[axis] + margins_(axis),
                                            hi + half_dim[axis] - margins_(axis)};
        }
        const SupportExprs& terminal = supports[N - 1];
        plan.terminal_bounds[axis] = {
            eval_nominal(terminal.lo[axis], sequence, axis) - half_dim[axis] + margins_(axis),
            eval_nominal(terminal.hi[axis], sequence, axis) + half_dim[axis] - margins_(axis)};
    }
    plan.schedule = sequence;
    return plan;
}

ReferenceSample replan_shift(const ReferencePlan& plan, double elapsed)
{
    if (elapsed < 0.0 || elapsed >= plan.horizon_duration() - 1e-12)
    {
        throw StalePlanError("replan_shift: elapsed " + std::to_string(elapsed) +
                             " s outside plan horizon of " +
                             std::to_string(plan.horizon_duration()) + " s");
    }
    const int k = std::min(static_cast<int>(elapsed / plan.T_mpc), plan.horizon - 1);
    const double tau = elapsed - k * plan.T_mpc;
    ReferenceSample sample;
    for (int axis = 0; axis < 2; axis++)
    {
        sample.jerk[axis] = plan.jerks[axis][k];
        sample.state[axis] =
            propagate_constant_jerk(plan.states[axis][k], sample.jerk[axis], tau);
    }
    sample.phase = plan.schedule.phase_at(plan.t0 + elapsed);
    return sample;
}

}  // namespace flexwalk
