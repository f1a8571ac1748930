#pragma once

#include <Eigen/Dense>
#include <vector>

namespace flexwalk
{
enum class Foot
{
    Left,
    Right
};

Foot other_foot(Foot f);

enum class PhaseKind
{
    SingleSupport,
    DoubleSupport
};

struct Interval
{
    double lo{0.0};
    double hi{0.0};
    double width() const { return hi - lo; }
    bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
};

struct FootPlacement
{
    Foot foot{Foot::Left};
    Eigen::Vector2d position{0.0, 0.0};
};

/// One support phase of the gait. Single support holds one foot, double
/// support two. Transfer phases are the short double supports between steps,
/// where the center of pressure migrates from the outgoing to the incoming
/// support foot.
struct SupportPhase
{
    PhaseKind kind{PhaseKind::DoubleSupport};
    std::vector<FootPlacement> feet;
    double start_time{0.0};
    double duration{0.0};
    bool transfer{false};
    /// Valid for transfer phases: support migrates from feet[0] to feet[1].
    double alpha(double t) const;
};

struct GaitConfig
{
    double T_mpc{0.1};            // prediction sampling period (s)
    int horizon{24};              // samples
    double replan_period{0.2};    // s
    double step_duration{1.4};    // s
    double ss_fraction{6.0 / 7.0};
    double foot_half_length{0.11};   // m, x
    double foot_half_width{0.0675};  // m, y
    double stepping_x_min{-0.45};    // m, displacement between consecutive placements
    double stepping_x_max{0.45};
    double stepping_width_min{0.12};  // m, |y| gap between feet
    double stepping_width_max{0.25};
    double nominal_stance_width{0.171};  // m
    double max_swing_speed{1.5};         // m/s
    double apex_height{0.05};            // m, swing apex
    double w_velocity{1.0};
    double w_jerk{1e-6};
    double w_ankle{1e-6};
    double w_step{1e-6};

    double ss_duration() const { return step_duration * ss_fraction; }
    double ds_duration() const { return step_duration * (1.0 - ss_fraction); }
    double horizon_duration() const { return T_mpc * horizon; }
    void validate() const;
};

/// Per-axis admissible CoP interval of a phase: one foot's rectangle in
/// single support, the interval hull of both rectangles in double support.
Interval support_interval(const SupportPhase& phase, const GaitConfig& cfg, int axis);

struct Step
{
    Foot foot{Foot::Left};
    double swing_start{0.0};
    double touchdown{0.0};
    Eigen::Vector2d target{0.0, 0.0};
    /// Once the swing has started the target can no longer be optimized.
    bool frozen{false};
};

/// Timeline of footsteps over fixed initial placements. Steps alternate feet;
/// phases (single support during swings, double support elsewhere) and foot
/// placements at any time are derived from it.
class StepSequence
{
public:
    StepSequence() = default;
    StepSequence(const GaitConfig& cfg, const Eigen::Vector2d& left,
                 const Eigen::Vector2d& right);

    /// Appends a step swinging `foot` at `swing_start` toward `target`;
    /// touchdown after the configured single-support duration. Steps must
    /// alternate feet and start after the previous touchdown.
    void add_step(Foot foot, double swing_start, const Eigen::Vector2d& target);

    const GaitConfig& config() const { return cfg_; }
    const std::vector<Step>& steps() const { return steps_; }
    std::vector<Step>& steps() { return steps_; }

    /// Ground placement of a foot at time t (initial position or the target
    /// of its most recent touchdown).
    Eigen::Vector2d foot_position(Foot f, double t) const;

    SupportPhase phase_at(double t) const;

    /// Marks steps whose swing has started by t as frozen.
    void freeze_started(double t);

    /// Removes steps that have not started swinging by t, keeping the first
    /// `keep` of them. Returns the number removed.
    int cancel_unstarted(double t, int keep);

    /// Index of the step in swing at t, or -1.
    int swinging_step(double t) const;

    double last_touchdown() const;

private:
    GaitConfig cfg_;
    Eigen::Vector2d initial_left_;
    Eigen::Vector2d initial_right_;
    std::vector<Step> steps_;
};

}  // namespace flexwalk
