#include "flexwalk/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "flexwalk/errors.hpp"
#include "flexwalk/gait_mpc.hpp"
#include "flexwalk/plant.hpp"
#include "flexwalk/wholebody.hpp"

namespace flexwalk
{
namespace
{
using nlohmann::ordered_json;

Eigen::Vector3d to3(const Eigen::Vector2d& v, double z = 0.0)
{
    return {v.x(), v.y(), z};
}

/// Hip joint position above the waist, laterally offset from the CoM.
Eigen::Vector3d hip_position(const Eigen::Vector2d& com_xy, Foot foot,
                             const PlantConfig& plant)
{
    const double side = foot == Foot::Left ? 1.0 : -1.0;
    return {com_xy.x(), com_xy.y() + side * plant.hip_offset_y, plant.hip_height};
}

/// Moment about the deflection point from a supporting contact force plus the
/// leg's own weight.
Eigen::Vector2d stance_hip_load(const Eigen::Vector3d& hip, const Eigen::Vector2d& foot_xy,
                                const Eigen::Vector3d& contact_force,
                                const PlantConfig& plant)
{
    const Eigen::Vector3d foot = to3(foot_xy);
    const Eigen::Vector3d leg_cm = 0.5 * (hip + foot);
    const Eigen::Vector3d weight(0.0, 0.0, -plant.leg_mass * plant.gravity);
    const Eigen::Vector3d torque =
        (foot - hip).cross(contact_force) + (leg_cm - hip).cross(weight);
    return torque.head<2>();
}

/// Moment about the deflection point from the swinging leg's weight and
/// inertial reaction.
Eigen::Vector2d swing_hip_load(const Eigen::Vector3d& hip, const Eigen::Vector3d& foot_pos,
                               const Eigen::Vector3d& foot_acc, const PlantConfig& plant)
{
    const Eigen::Vector3d leg_cm = 0.5 * (hip + foot_pos);
    const Eigen::Vector3d leg_acc = 0.5 * foot_acc;
    const Eigen::Vector3d force =
        plant.leg_mass * (Eigen::Vector3d(0.0, 0.0, -plant.gravity) - leg_acc);
    return (leg_cm - hip).cross(force).head<2>();
}

/// Left-foot share of the support, continuous across phase changes: ramps
/// through transfer phases and into/out of stands over one double-support
/// duration.
double left_support_weight(const StepSequence& seq, double t)
{
    const double ds = seq.config().ds_duration();
    const int swing = seq.swinging_step(t);
    if (swing >= 0)
    {
        return other_foot(seq.steps()[swing].foot) == Foot::Left ? 1.0 : 0.0;
    }
    const Step* prev = nullptr;
    const Step* next = nullptr;
    for (const auto& s : seq.steps())
    {
        if (s.touchdown <= t)
        {
            prev = &s;
        }
        if (s.swing_start > t && next == nullptr)
        {
            next = &s;
        }
    }
    if (prev && next)
    {
        const double alpha =
            std::clamp((t - prev->touchdown) / (next->swing_start - prev->touchdown), 0.0, 1.0);
        // Weight migrates from the outgoing support (the foot about to swing)
        // onto the freshly landed one.
        const double w_landed = alpha;
        return prev->foot == Foot::Left ? w_landed : 1.0 - w_landed;
    }
    if (prev)
    {
        const double beta = std::clamp((t - prev->touchdown) / ds, 0.0, 1.0);
        const double w_stance = 1.0 - 0.5 * beta;  // stance of the last swing
        return other_foot(prev->foot) == Foot::Left ? w_stance : 1.0 - w_stance;
    }
    if (next)
    {
        const double beta =
            std::clamp((t - (next->swing_start - ds)) / ds, 0.0, 1.0);
        const double w_stance = 0.5 + 0.5 * beta;  // stance of the next swing
        return other_foot(next->foot) == Foot::Left ? w_stance : 1.0 - w_stance;
    }
    return 0.5;
}

PhaseTag phase_tag(const SupportPhase& phase)
{
    if (phase.kind == PhaseKind::SingleSupport)
    {
        return phase.feet[0].foot == Foot::Left ? PhaseTag::SingleLeft : PhaseTag::SingleRight;
    }
    return phase.transfer ? PhaseTag::Transfer : PhaseTag::Stand;
}

/// Piecewise-quintic quasi-static reference: the CoM dwells over each stance
/// foot and shifts to the next dwell during double support.
class QuasiStaticReference
{
public:
    QuasiStaticReference(const StepSequence& seq, const Eigen::Vector2d& com0,
                         double interior_offset, double final_time)
    {
        const auto& steps = seq.steps();
        const double ds = seq.config().ds_duration();
        Eigen::Vector2d current = com0;
        for (const auto& s : steps)
        {
            const Foot stance = other_foot(s.foot);
            Eigen::Vector2d dwell = seq.foot_position(stance, s.swing_start);
            // Pull the dwell toward the interior foot edge when requested.
            dwell.y() -= (stance == Foot::Left ? 1.0 : -1.0) * interior_offset;
            segments_.push_back({s.swing_start - ds, s.swing_start, current, dwell});
            current = dwell;
        }
        if (!steps.empty())
        {
            const double t_end = steps.back().touchdown;
            const Eigen::Vector2d center =
                0.5 * (seq.foot_position(Foot::Left, t_end + 1.0) +
                       seq.foot_position(Foot::Right, t_end + 1.0));
            segments_.push_back({t_end, t_end + ds, current, center});
        }
        (void)final_time;
    }

    std::array<CentroidalState, 2> state_at(double t) const
    {
        std::array<CentroidalState, 2> out;
        for (int axis = 0; axis < 2; axis++)
        {
            out[axis] = eval_axis(t, axis);
        }
        return out;
    }

    std::array<double, 2> jerk_at(double t) const
    {
        std::array<double, 2> out{0.0, 0.0};
        for (const auto& seg : segments_)
        {
            if (t >= seg.t0 && t < seg.t1)
            {
                const double T = seg.t1 - seg.t0;
                const double tau = (t - seg.t0) / T;
                const double q3 = 60.0 + tau * (-360.0 + 360.0 * tau);
                for (int axis = 0; axis < 2; axis++)
                {
                    out[axis] = (seg.to(axis) - seg.from(axis)) * q3 / (T * T * T);
                }
            }
        }
        return out;
    }

private:
    struct Segment
    {
        double t0, t1;
        Eigen::Vector2d from, to;
    };

    CentroidalState eval_axis(double t, int axis) const
    {
        double pos = segments_.empty() ? 0.0 : segments_.front().from(axis);
        for (const auto& seg : segments_)
        {
            if (t < seg.t0)
            {
                break;
            }
            const double T = seg.t1 - seg.t0;
            if (t >= seg.t1)
            {
                pos = seg.to(axis);
                continue;
            }
            const double tau = (t - seg.t0) / T;
            const double q = tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau));
            const double qd = tau * tau * (30.0 + tau * (-60.0 + 30.0 * tau));
            const double qdd = tau * (60.0 + tau * (-180.0 + 120.0 * tau));
            const double span = seg.to(axis) - seg.from(axis);
            CentroidalState s;
            s.pos = seg.from(axis) + span * q;
            s.vel = span * qd / T;
            s.acc = span * qdd / (T * T);
            return s;
        }
        return {pos, 0.0, 0.0};
    }

    std::vector<Segment> segments_;
};

struct WalkTimeline
{
    StepSequence sequence;
    double forward_start{0.0};  // swing start of the first forward step
    double last_touchdown{0.0};
    double end_time{0.0};
};

WalkTimeline build_timeline(const ScenarioConfig& cfg)
{
    const double w = cfg.gait.nominal_stance_width / 2.0;
    StepSequence seq(cfg.gait, {0.0, w}, {0.0, -w});
    double t = cfg.stand_duration;
    Foot foot = Foot::Right;
    int forward_done = 0;
    double forward_start = 0.0;
    const bool quasi = cfg.kind == ScenarioKind::QuasiStatic;
    const int in_place = quasi ? 0 : cfg.in_place_steps;
    const int forward =
        cfg.kind == ScenarioKind::DynamicWalk
            ? cfg.forward_steps
            : (quasi ? cfg.quasi_static.steps : 0);
    const double step_len = quasi ? cfg.quasi_static.step_length : 0.0;

    for (int i = 0; i < in_place; i++)
    {
        seq.add_step(foot, t, {0.0, foot == Foot::Left ? w : -w});
        foot = other_foot(foot);
        t += cfg.gait.step_duration;
    }
    double x = 0.0;
    for (int i = 0; i < forward; i++)
    {
        if (i == 0)
        {
            forward_start = t;
        }
        // Nominal targets; the MPC re-optimizes them for dynamic scenarios.
        x += step_len;
        seq.add_step(foot, t, {x, foot == Foot::Left ? w : -w});
        foot = other_foot(foot);
        t += cfg.gait.step_duration;
        forward_done++;
    }
    WalkTimeline timeline;
    timeline.sequence = seq;
    timeline.forward_start = forward_start;
    timeline.last_touchdown = seq.steps().empty() ? cfg.stand_duration : seq.last_touchdown();
    timeline.end_time = timeline.last_touchdown + cfg.gait.ds_duration() + cfg.tail_duration;
    return timeline;
}

struct SwingState
{
    std::optional<SwingSpline> spline;
    int step_index{-1};
    double start_time{0.0};
};

ordered_json cop_statistics(const SimTrace& trace, const StepSequence& seq)
{
    std::vector<double> norms;
    std::vector<double> sustained;
    norms.reserve(trace.rows.size());
    int below_1cm = 0;
    double max_norm = 0.0;
    for (size_t i = 0; i < trace.rows.size(); i++)
    {
        const double e = trace.cop_error(i).norm();
        norms.push_back(e);
        max_norm = std::max(max_norm, e);
        if (e < 0.01)
        {
            below_1cm++;
        }
        // Sustained single-support error: the middle of each stance window.
        const double t = trace.rows[i].t;
        const int swing = seq.swinging_step(t);
        if (swing >= 0)
        {
            const Step& s = seq.steps()[swing];
            const double frac = (t - s.swing_start) / (s.touchdown - s.swing_start);
            if (frac >= 0.2 && frac <= 0.8)
            {
                sustained.push_back(e);
            }
        }
    }
    auto quantile = [](std::vector<double> v, double q) {
        if (v.empty())
        {
            return 0.0;
        }
        std::sort(v.begin(), v.end());
        const size_t idx = std::min(v.size() - 1, static_cast<size_t>(q * v.size()));
        return v[idx];
    };
    ordered_json out;
    out["median"] = quantile(norms, 0.5);
    out["p90"] = quantile(norms, 0.9);
    out["max"] = max_norm;
    out["fraction_below_1cm"] =
        norms.empty() ? 0.0 : static_cast<double>(below_1cm) / norms.size();
    out["sustained_ss_median"] = quantile(sustained, 0.5);
    out["sustained_ss_samples"] = sustained.size();
    return out;
}

}  // namespace

ControllerSetup resolve_controller(const ScenarioConfig& cfg)
{
    ControllerSetup setup{SystemMatrices::make(cfg.control_period, cfg.omega_sq_effective()),
                          Eigen::RowVector3d::Zero(), Eigen::Vector2d::Zero(),
                          Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
    if (cfg.gain)
    {
        setup.K = cfg.gain->transpose();
        if (!(spectral_radius(setup.sys.A + setup.sys.B * setup.K) < 1.0))
        {
            throw InstabilityError("configured gain does not stabilize the closed loop");
        }
    }
    else
    {
        setup.K = optimize_gain(setup.sys, {1.0}, std::nullopt, cfg.tail_tol).K;
    }
    for (int axis = 0; axis < 2; axis++)
    {
        setup.v_tilde_max(axis) =
            mrpi_vrp_bound(setup.K, setup.sys, {cfg.d_max(axis)}, cfg.tail_tol);
    }
    setup.margins = cfg.margins ? *cfg.margins : setup.v_tilde_max;
    setup.sat_bound = cfg.saturation_e_bound ? *cfg.saturation_e_bound : cfg.d_max;
    return setup;
}

StanceExperiment make_stance_experiment(const ScenarioConfig& cfg, Foot stance,
                                        std::mt19937_64& rng)
{
    const PlantConfig& plant_cfg = cfg.plant;
    const double w = cfg.gait.nominal_stance_width / 2.0;
    const Eigen::Vector2d stance_pos(0.0, stance == Foot::Left ? w : -w);
    const Eigen::Vector2d free_pos(0.0, stance == Foot::Left ? -w : w);
    const double lift = 0.05;

    SupportPhase phase;
    phase.kind = PhaseKind::SingleSupport;
    phase.feet = {{stance, stance_pos}};
    phase.duration = cfg.identify.stance_duration;

    // Static balance: CoM over the stance foot center.
    std::array<CentroidalState, 2> com0{{{stance_pos.x(), 0.0, 0.0},
                                         {stance_pos.y(), 0.0, 0.0}}};
    FlexibleLipPlant plant(plant_cfg, com0);

    const Eigen::Vector3d hip_stance = hip_position(stance_pos, stance, plant_cfg);
    const Eigen::Vector3d hip_free = hip_position(stance_pos, other_foot(stance), plant_cfg);
    const Eigen::Vector3d contact_force(0.0, 0.0, plant_cfg.mass * plant_cfg.gravity);
    const Eigen::Vector2d load_stance =
        stance_hip_load(hip_stance, stance_pos, contact_force, plant_cfg);
    const Eigen::Vector2d load_free =
        swing_hip_load(hip_free, to3(free_pos, lift), Eigen::Vector3d::Zero(), plant_cfg);

    FlexibleLipPlant::Inputs inputs;
    inputs.phase = phase;
    inputs.hip_load_left = stance == Foot::Left ? load_stance : load_free;
    inputs.hip_load_right = stance == Foot::Right ? load_stance : load_free;

    StanceExperiment exp;
    exp.stance = stance;
    exp.dt = cfg.control_period;
    exp.stance_foot_fk = stance_pos;
    exp.settle_samples = static_cast<int>(cfg.identify.settle_time / cfg.control_period);

    std::normal_distribution<double> torque_noise(0.0, cfg.sole_torque_sigma);
    std::normal_distribution<double> force_noise(0.0, cfg.sole_force_sigma);

    const int ticks = static_cast<int>(cfg.identify.stance_duration / cfg.control_period);
    const double mass_frac = plant_cfg.leg_mass / plant_cfg.mass;
    for (int i = 0; i < ticks; i++)
    {
        plant.step(inputs, cfg.control_period);

        // Commanded hip torques balance the static loads.
        exp.tau_meas_left.push_back(-inputs.hip_load_left);
        exp.tau_meas_right.push_back(-inputs.hip_load_right);

        // Sole wrench about the (displaced) true foot: p = s_true + S tau / f.
        const Eigen::Vector2d p_true = plant.true_cop();
        const Eigen::Vector2d s_true = stance_pos + plant.support_shift(stance);
        const Eigen::Vector2d offset = p_true - s_true;
        double f_z = plant_cfg.mass * plant_cfg.gravity;
        Eigen::Vector2d tau_sole(offset.y() * f_z, -offset.x() * f_z);
        tau_sole.x() += cfg.sole_torque_sigma > 0.0 ? torque_noise(rng) : 0.0;
        tau_sole.y() += cfg.sole_torque_sigma > 0.0 ? torque_noise(rng) : 0.0;
        f_z += cfg.sole_force_sigma > 0.0 ? force_noise(rng) : 0.0;
        exp.sole_torque.push_back(tau_sole);
        exp.sole_force_z.push_back(f_z);

        // Rigid-FK outputs: truth minus the lever-arm errors (stance anchor
        // plus mass-weighted leg shifts).
        const Eigen::Vector2d delta_left = plant.support_shift(Foot::Left);
        const Eigen::Vector2d delta_right = plant.support_shift(Foot::Right);
        const Eigen::Vector2d delta_stance =
            stance == Foot::Left ? delta_left : delta_right;
        const Eigen::Vector2d com_true(plant.com()[0].pos, plant.com()[1].pos);
        exp.com_fk.push_back(com_true - delta_stance -
                             mass_frac * (delta_left + delta_right));
    }
    return exp;
}

namespace
{
ScenarioResult run_identify(const ScenarioConfig& cfg)
{
    std::mt19937_64 rng(cfg.seed);
    const StanceExperiment left = make_stance_experiment(cfg, Foot::Left, rng);
    const StanceExperiment right = make_stance_experiment(cfg, Foot::Right, rng);

    ScenarioResult result;
    result.trace.dt = cfg.control_period;
    result.trace.scenario = to_string(cfg.kind);
    result.trace.seed = cfg.seed;

    ordered_json summary;
    summary["scenario"] = to_string(cfg.kind);
    summary["seed"] = cfg.seed;
    try
    {
        const StiffnessIdentification ident = identify_stiffness(
            left, right, cfg.identify.grid, cfg.plant.flex_left.lever, cfg.lpf_cutoff_hz,
            cfg.plant.leg_mass, cfg.plant.mass);
        result.identification = ident;
        summary["identified"] = {{"k_left", ident.k_left},
                                 {"k_right", ident.k_right},
                                 {"band_left", ident.band_left},
                                 {"band_right", ident.band_right}};
        summary["truth"] = {{"k_left", cfg.plant.flex_left.stiffness(0)},
                            {"k_right", cfg.plant.flex_right.stiffness(0)}};
        summary["relative_error"] = {
            {"left",
             ident.k_left / cfg.plant.flex_left.stiffness(0) - 1.0},
            {"right",
             ident.k_right / cfg.plant.flex_right.stiffness(0) - 1.0}};
    }
    catch (const IdentificationFailedError& e)
    {
        summary["identified"] = ordered_json();
        summary["failure"] = {{"message", e.what()},
                              {"nearest_k_left", e.nearest_k_left},
                              {"nearest_k_right", e.nearest_k_right}};
    }
    result.summary = summary;
    return result;
}

ScenarioResult run_walk(const ScenarioConfig& cfg)
{
    const ControllerSetup ctl = resolve_controller(cfg);
    const double dt = cfg.control_period;
    const double omega_sq = cfg.omega_sq_effective();

    WalkTimeline timeline = build_timeline(cfg);
    StepSequence& seq = timeline.sequence;
    const bool use_mpc = cfg.mpc_enabled && cfg.kind != ScenarioKind::QuasiStatic;

    GaitMpc mpc(cfg.gait, omega_sq, ctl.margins);
    std::optional<QuasiStaticReference> qs_ref;
    if (!use_mpc)
    {
        const double offset = cfg.estimator ? 0.0 : cfg.quasi_static.interior_offset;
        qs_ref.emplace(seq, Eigen::Vector2d(0.0, 0.0), offset, timeline.end_time);
    }

    std::array<CentroidalState, 2> com0{{{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}}};
    FlexibleLipPlant plant(cfg.plant, com0);

    std::array<CentroidalState, 2> x_hat = com0;
    Eigen::Vector2d b_prev = Eigen::Vector2d::Zero();
    FlexState est_left, est_right;
    const FlexParams assumed_left = [&] {
        FlexParams p = FlexParams::isotropic(
            cfg.assumed_k_left ? *cfg.assumed_k_left : cfg.plant.flex_left.stiffness(0));
        p.lever = cfg.plant.flex_left.lever;
        return p;
    }();
    const FlexParams assumed_right = [&] {
        FlexParams p = FlexParams::isotropic(
            cfg.assumed_k_right ? *cfg.assumed_k_right : cfg.plant.flex_right.stiffness(0));
        p.lever = cfg.plant.flex_right.lever;
        return p;
    }();

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);

    std::optional<ReferencePlan> plan;
    double plan_time = 0.0;
    SwingState swing;
    bool stopped = false;
    int saturation_fallbacks = 0;
    int replans = 0;

    SimTrace trace;
    trace.dt = dt;
    trace.scenario = to_string(cfg.kind);
    trace.seed = cfg.seed;

    double end_time = timeline.end_time;
    const int max_ticks = static_cast<int>(end_time / dt) + 1;
    trace.rows.reserve(max_ticks);

    for (int tick = 0; tick * dt < end_time; tick++)
    {
        const double t = tick * dt;
        seq.freeze_started(t);

        if (cfg.stop_time && !stopped && t >= *cfg.stop_time)
        {
            // Zero the aim and drop every step that has not started, keeping
            // one braking step.
            seq.cancel_unstarted(t, 1);
            stopped = true;
            end_time = std::min(end_time, seq.last_touchdown() + cfg.gait.ds_duration() +
                                              cfg.tail_duration);
        }

        Eigen::Vector2d aim(0.0, 0.0);
        if (!stopped && cfg.kind == ScenarioKind::DynamicWalk && cfg.forward_steps > 0 &&
            t >= timeline.forward_start - cfg.gait.step_duration &&
            t < timeline.last_touchdown)
        {
            const double ramp = cfg.ramp_steps * cfg.gait.step_duration;
            aim.x() = cfg.target_speed *
                      std::clamp((t - timeline.forward_start) / ramp, 0.0, 1.0);
        }

        // Reference generation.
        if (use_mpc &&
            (!plan || t - plan_time >= cfg.gait.replan_period - 0.5 * dt))
        {
            std::array<CentroidalState, 2> x_nom =
                plan ? replan_shift(*plan, t - plan_time).state : x_hat;
            plan = mpc.plan(x_nom, aim, seq, t, Eigen::Vector2d::Zero());
            plan_time = t;
            replans++;
        }

        std::array<CentroidalState, 2> x_ref, x_ref_next;
        std::array<double, 2> u_ref{0.0, 0.0};
        if (use_mpc)
        {
            const auto now = replan_shift(*plan, t - plan_time);
            const auto next = replan_shift(*plan, t - plan_time + dt);
            x_ref = now.state;
            x_ref_next = next.state;
            u_ref = now.jerk;
        }
        else
        {
            x_ref = qs_ref->state_at(t);
            x_ref_next = qs_ref->state_at(t + dt);
            u_ref = qs_ref->jerk_at(t);
        }

        const SupportPhase phase = seq.phase_at(t);

        // Manage the swing spline: create it when a swing starts.
        const int swinging = seq.swinging_step(t);
        if (swinging >= 0 && swing.step_index != swinging)
        {
            const Step& s = seq.steps()[swinging];
            const Eigen::Vector2d from =
                seq.foot_position(s.foot, s.swing_start - 1e-9);
            swing.spline.emplace(from, s.target, s.touchdown - s.swing_start,
                                 cfg.gait.apex_height, cfg.gait.max_swing_speed);
            swing.step_index = swinging;
            swing.start_time = s.swing_start;
        }
        if (swinging < 0)
        {
            swing.step_index = -1;
            swing.spline.reset();
        }

        // Tube stabilizer with saturation per axis.
        std::array<double, 2> jerk_cmd{0.0, 0.0};
        std::array<CentroidalState, 2> x_hat_next;
        for (int axis = 0; axis < 2; axis++)
        {
            const Interval support = support_interval(phase, cfg.gait, axis);
            const Eigen::Vector3d x_tilde = x_hat[axis].vec() - x_ref[axis].vec();
            SaturationLimits limits;
            bool have_limits = false;
            try
            {
                limits = saturation_limits(x_tilde, x_ref_next[axis].vec(), 0.0, support.lo,
                                           support.hi, -ctl.sat_bound(axis),
                                           ctl.sat_bound(axis), ctl.K, ctl.sys);
                have_limits = true;
            }
            catch (const InfeasibleSaturationError&)
            {
                saturation_fallbacks++;
            }
            if (!have_limits)
            {
                // Best effort: ignore the disturbance allowance, then fall
                // back to the feasibility midpoint.
                try
                {
                    limits = saturation_limits(x_tilde, x_ref_next[axis].vec(), 0.0,
                                               support.lo, support.hi, 0.0, 0.0, ctl.K,
                                               ctl.sys);
                }
                catch (const InfeasibleSaturationError&)
                {
                    const double phi =
                        ctl.sys.V * (ctl.sys.A * x_tilde + x_ref_next[axis].vec());
                    const double mid =
                        (0.5 * (support.lo + support.hi) - phi) / ctl.sys.vb();
                    limits = {mid, mid};
                }
            }
            const auto out =
                stabilize_step(x_hat[axis], x_ref[axis], u_ref[axis], ctl.K, limits, ctl.sys);
            jerk_cmd[axis] = out.jerk;
            x_hat_next[axis] = out.x_hat_next;
        }

        // Whole-body interface: task bundle and contact wrenches.
        SwingContext swing_ctx;
        if (swing.spline && phase.kind == PhaseKind::SingleSupport)
        {
            swing_ctx.spline = &*swing.spline;
            swing_ctx.foot = seq.steps()[swing.step_index].foot;
            swing_ctx.time_in_swing = t - swing.start_time;
        }
        const InterfaceReferences refs = interface_references(
            x_hat_next, cfg.plant.com_height, phase, swing_ctx, 0.7, cfg.plant.mass,
            cfg.plant.gravity);

        // Hip loads: commanded from the desired quantities, true from the
        // plant state. The reduced plant realizes the desired wrenches.
        const Eigen::Vector2d com_des(x_hat_next[0].pos, x_hat_next[1].pos);
        const Eigen::Vector2d com_true(plant.com()[0].pos, plant.com()[1].pos);
        auto hip_loads = [&](const Eigen::Vector2d& com_xy, Foot foot) -> Eigen::Vector2d {
            const Eigen::Vector3d hip = hip_position(com_xy, foot, cfg.plant);
            bool grounded = false;
            Eigen::Vector2d foot_xy = seq.foot_position(foot, t);
            for (const auto& placement : phase.feet)
            {
                if (placement.foot == foot)
                {
                    grounded = true;
                    foot_xy = placement.position;
                }
            }
            if (grounded)
            {
                const Wrench& w = foot == Foot::Left ? refs.wrenches.left : refs.wrenches.right;
                return stance_hip_load(hip, foot_xy, w.force, cfg.plant);
            }
            const auto& sample = foot == Foot::Left ? refs.left_foot : refs.right_foot;
            return swing_hip_load(hip, sample.position, sample.acceleration, cfg.plant);
        };

        FlexibleLipPlant::Inputs inputs;
        inputs.commanded_jerk = jerk_cmd;
        inputs.phase = phase;
        inputs.hip_load_left = hip_loads(com_true, Foot::Left);
        inputs.hip_load_right = hip_loads(com_true, Foot::Right);
        if (cfg.disturbance.kind == "uniform")
        {
            inputs.disturbance[0] = cfg.disturbance.amplitude(0) * uniform(rng);
            inputs.disturbance[1] = cfg.disturbance.amplitude(1) * uniform(rng);
        }

        // Record the tick before stepping: state at t, commands over [t, t+dt).
        TraceRow row;
        row.t = t;
        row.com_true = plant.com();
        row.com_est = x_hat;
        row.com_ref = x_ref;
        row.cop_true = plant.true_cop();
        for (int axis = 0; axis < 2; axis++)
        {
            row.cop_ref(axis) = ctl.sys.V * x_ref[axis].vec();
            row.vrp_true(axis) = ctl.sys.V * plant.com()[axis].vec();
            row.support_lo(axis) = support_interval(phase, cfg.gait, axis).lo;
            row.support_hi(axis) = support_interval(phase, cfg.gait, axis).hi;
        }
        row.bias = Eigen::Vector2d::Zero();
        row.theta_left_true = plant.theta(Foot::Left);
        row.theta_right_true = plant.theta(Foot::Right);
        row.theta_left_est = est_left.theta;
        row.theta_right_est = est_right.theta;
        row.jerk_cmd = {jerk_cmd[0], jerk_cmd[1]};
        row.phase = phase_tag(phase);
        row.fall = plant.fallen();
        trace.rows.push_back(row);

        plant.step(inputs, dt);

        // Bending estimator: commanded hip torques approximate the flexing
        // torque (the reduced measurement chain folds the lever-force term
        // into the command).
        const Eigen::Vector2d loads_cmd_left = hip_loads(com_des, Foot::Left);
        const Eigen::Vector2d loads_cmd_right = hip_loads(com_des, Foot::Right);
        if (cfg.estimator)
        {
            est_left = estimate_deflection(-loads_cmd_left, est_left, assumed_left, dt,
                                           cfg.lpf_cutoff_hz);
            est_right = estimate_deflection(-loads_cmd_right, est_right, assumed_right, dt,
                                            cfg.lpf_cutoff_hz);
        }

        // Measurement model: rigid FK misses the lever-arm displacements; the
        // estimator corrects with its own deflection estimates.
        const double w_left = left_support_weight(seq, t + dt);
        const double mass_frac = cfg.plant.leg_mass / cfg.plant.mass;
        const Eigen::Vector2d delta_true_left = plant.support_shift(Foot::Left);
        const Eigen::Vector2d delta_true_right = plant.support_shift(Foot::Right);
        const Eigen::Vector2d delta_est_left =
            lever_arm_delta(est_left.theta, assumed_left.lever).head<2>();
        const Eigen::Vector2d delta_est_right =
            lever_arm_delta(est_right.theta, assumed_right.lever).head<2>();
        const Eigen::Vector2d bias =
            w_left * (delta_true_left - delta_est_left) +
            (1.0 - w_left) * (delta_true_right - delta_est_right) +
            mass_frac * (delta_true_left - delta_est_left + delta_true_right -
                         delta_est_right);
        for (int axis = 0; axis < 2; axis++)
        {
            x_hat[axis].pos = plant.com()[axis].pos - bias(axis);
            x_hat[axis].vel = plant.com()[axis].vel - (bias(axis) - b_prev(axis)) / dt;
            x_hat[axis].acc = plant.com()[axis].acc;
        }
        b_prev = bias;
    }

    ScenarioResult result;
    result.trace = std::move(trace);

    ordered_json summary;
    summary["scenario"] = to_string(cfg.kind);
    summary["seed"] = cfg.seed;
    summary["estimator"] = cfg.estimator;
    summary["mpc"] = use_mpc;
    summary["ticks"] = result.trace.rows.size();
    summary["duration"] = result.trace.rows.empty() ? 0.0 : result.trace.rows.back().t + dt;
    summary["controller"] = {{"gain", {ctl.K(0), ctl.K(1), ctl.K(2)}},
                             {"margins", {ctl.margins(0), ctl.margins(1)}},
                             {"v_tilde_max", {ctl.v_tilde_max(0), ctl.v_tilde_max(1)}}};
    summary["fall"] = plant.fallen();
    if (plant.fallen())
    {
        summary["fall_time"] = plant.fall_time();
    }
    summary["cop_error"] = cop_statistics(result.trace, seq);
    summary["saturation_fallbacks"] = saturation_fallbacks;
    summary["replans"] = replans;

    if (cfg.kind == ScenarioKind::DynamicWalk && cfg.forward_steps > cfg.ramp_steps + 1)
    {
        // Steady segment: after the ramp, before the braking final step.
        const auto& steps = seq.steps();
        std::vector<const Step*> forward;
        for (const auto& s : steps)
        {
            if (s.swing_start >= timeline.forward_start - 1e-9)
            {
                forward.push_back(&s);
            }
        }
        if (static_cast<int>(forward.size()) >= cfg.forward_steps)
        {
            const double t_a = forward[cfg.ramp_steps]->touchdown;
            const double t_b = forward[cfg.forward_steps - 1]->touchdown;
            auto pos_at = [&](double when) {
                const size_t idx = std::min(result.trace.rows.size() - 1,
                                            static_cast<size_t>(when / dt));
                return result.trace.rows[idx].com_true[0].pos;
            };
            const double avg = (pos_at(t_b) - pos_at(t_a)) / (t_b - t_a);
            double max_step = 0.0;
            for (size_t i = 1; i < forward.size(); i++)
            {
                max_step = std::max(max_step,
                                    forward[i]->target.x() - forward[i - 1]->target.x());
            }
            summary["speed"] = {{"steady_average", avg},
                                {"window", {t_a, t_b}},
                                {"max_step_length", max_step}};
        }
    }

    if (cfg.stop_time)
    {
        // Capturability stop metrics: when the true DCM enters the final
        // shrunk support for good, and when the velocity settles.
        const SupportPhase final_phase = seq.phase_at(end_time + 10.0);
        const double omega = std::sqrt(omega_sq);
        double dcm_time = -1.0, settle_time = -1.0;
        for (size_t i = result.trace.rows.size(); i-- > 0;)
        {
            const auto& row = result.trace.rows[i];
            bool inside = true;
            for (int axis = 0; axis < 2; axis++)
            {
                const Interval iv = support_interval(final_phase, cfg.gait, axis);
                const double xi = dcm(row.com_true[axis], omega);
                inside = inside && xi >= iv.lo + ctl.margins(axis) &&
                         xi <= iv.hi - ctl.margins(axis);
            }
            if (inside)
            {
                dcm_time = row.t;
            }
            else
            {
                break;
            }
        }
        for (size_t i = result.trace.rows.size(); i-- > 0;)
        {
            const auto& row = result.trace.rows[i];
            const double speed = std::hypot(row.com_true[0].vel, row.com_true[1].vel);
            if (speed < 1e-3)
            {
                settle_time = row.t;
            }
            else
            {
                break;
            }
        }
        summary["stop"] = {{"stop_time", *cfg.stop_time},
                           {"dcm_in_final_support_time", dcm_time},
                           {"velocity_settle_time", settle_time},
                           {"last_touchdown", seq.last_touchdown()}};
    }

    result.summary = summary;
    return result;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg)
{
    cfg.validate();
    if (cfg.kind == ScenarioKind::IdentifyStiffness)
    {
        return run_identify(cfg);
    }
    return run_walk(cfg);
}

void write_outputs(const ScenarioConfig& cfg, const ScenarioResult& result)
{
    std::filesystem::create_directories(cfg.out_dir);
    const auto path = [&](const std::string& name) {
        return (std::filesystem::path(cfg.out_dir) / name).string();
    };
    if (cfg.write_trace && !result.trace.rows.empty())
    {
        write_trace_csv(result.trace, path(cfg.trace_name));
    }
    std::ofstream summary(path(cfg.summary_name), std::ios::binary);
    summary << result.summary.dump(2) << "\n";

    if (result.identification)
    {
        const auto& ident = *result.identification;
        for (const auto& [name, surface] :
             {std::pair{"error_surface_left_stance.csv", &ident.error_left_stance},
              std::pair{"error_surface_right_stance.csv", &ident.error_right_stance}})
        {
            std::ofstream out(path(name), std::ios::binary);
            out << "# flexwalk-error-surface-v1\n";
            out << "k_left\\k_right";
            char buf[40];
            for (double k : ident.grid_right)
            {
                std::snprintf(buf, sizeof(buf), ",%.12g", k);
                out << buf;
            }
            out << "\n";
            for (size_t i = 0; i < ident.grid_left.size(); i++)
            {
                std::snprintf(buf, sizeof(buf), "%.12g", ident.grid_left[i]);
                out << buf;
                for (size_t j = 0; j < ident.grid_right.size(); j++)
                {
                    std::snprintf(buf, sizeof(buf), ",%.12g", (*surface)(i, j));
                    out << buf;
                }
                out << "\n";
            }
        }
    }
}

}  // namespace flexwalk
