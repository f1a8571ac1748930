#include "flexwalk/gait.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flexwalk/errors.hpp"

namespace flexwalk
{
Foot other_foot(Foot f)
{
    return f == Foot::Left ? Foot::Right : Foot::Left;
}

double SupportPhase::alpha(double t) const
{
    if (duration <= 0.0 || !std::isfinite(duration))
    {
        return 0.0;
    }
    return std::clamp((t - start_time) / duration, 0.0, 1.0);
}

void GaitConfig::validate() const
{
    if (!(T_mpc > 0.0))
    {
        throw DomainError("GaitConfig: T_mpc must be positive");
    }
    if (horizon < 2)
    {
        throw DomainError("GaitConfig: horizon must be at least 2");
    }
    if (!(ss_fraction > 0.0 && ss_fraction < 1.0))
    {
        throw DomainError("GaitConfig: ss_fraction must be in (0, 1)");
    }
    if (!(step_duration > 0.0) || !(replan_period > 0.0))
    {
        throw DomainError("GaitConfig: durations must be positive");
    }
    if (!(foot_half_length > 0.0) || !(foot_half_width > 0.0))
    {
        throw DomainError("GaitConfig: foot half-dimensions must be positive");
    }
    if (!(w_velocity > 0.0) || w_jerk < 0.0 || w_ankle < 0.0 || w_step < 0.0)
    {
        throw DomainError("GaitConfig: weights must be nonnegative with w_velocity > 0");
    }
    if (stepping_x_min > stepping_x_max || stepping_width_min > stepping_width_max ||
        stepping_width_min < 0.0)
    {
        throw DomainError("GaitConfig: stepping area bounds are inconsistent");
    }
    if (!(max_swing_speed > 0.0) || !(apex_height > 0.0))
    {
        throw DomainError("GaitConfig: swing limits must be positive");
    }
}

Interval support_interval(const SupportPhase& phase, const GaitConfig& cfg, int axis)
{
    const double half = axis == 0 ? cfg.foot_half_length : cfg.foot_half_width;
    Interval iv{std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
    for (const auto& foot : phase.feet)
    {
        iv.lo = std::min(iv.lo, foot.position(axis) - half);
        iv.hi = std::max(iv.hi, foot.position(axis) + half);
    }
    return iv;
}

StepSequence::StepSequence(const GaitConfig& cfg, const Eigen::Vector2d& left,
                           const Eigen::Vector2d& right)
    : cfg_(cfg), initial_left_(left), initial_right_(right)
{
    cfg_.validate();
}

void StepSequence::add_step(Foot foot, double swing_start, const Eigen::Vector2d& target)
{
    if (!steps_.empty())
    {
        const Step& last = steps_.back();
        if (foot == last.foot)
        {
            throw DomainError("StepSequence: steps must alternate feet");
        }
        if (swing_start < last.touchdown)
        {
            throw DomainError("StepSequence: step overlaps the previous swing");
        }
    }
    Step s;
    s.foot = foot;
    s.swing_start = swing_start;
    s.touchdown = swing_start + cfg_.ss_duration();
    s.target = target;
    steps_.push_back(s);
}

Eigen::Vector2d StepSequence::foot_position(Foot f, double t) const
{
    Eigen::Vector2d pos = f == Foot::Left ? initial_left_ : initial_right_;
    for (const auto& s : steps_)
    {
        if (s.foot == f && s.touchdown <= t)
        {
            pos = s.target;
        }
    }
    return pos;
}

int StepSequence::swinging_step(double t) const
{
    for (size_t i = 0; i < steps_.size(); i++)
    {
        if (t >= steps_[i].swing_start && t < steps_[i].touchdown)
        {
            return static_cast<int>(i);
        }
    }
    return -1;
}

SupportPhase StepSequence::phase_at(double t) const
{
    const int swing = swinging_step(t);
    if (swing >= 0)
    {
        const Step& s = steps_[swing];
        SupportPhase phase;
        phase.kind = PhaseKind::SingleSupport;
        const Foot stance = other_foot(s.foot);
        phase.feet = {{stance, foot_position(stance, t)}};
        phase.start_time = s.swing_start;
        phase.duration = cfg_.ss_duration();
        return phase;
    }

    // Double support: locate the surrounding steps.
    const Step* prev = nullptr;
    const Step* next = nullptr;
    for (const auto& s : steps_)
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
    SupportPhase phase;
    phase.kind = PhaseKind::DoubleSupport;
    phase.start_time = prev ? prev->touchdown : 0.0;
    phase.duration = next ? next->swing_start - phase.start_time
                          : std::numeric_limits<double>::infinity();
    if (prev && next)
    {
        // Support migrates from the next swing foot's current placement onto
        // the foot that just landed.
        phase.transfer = true;
        phase.feet = {{next->foot, foot_position(next->foot, t)},
                      {prev->foot, prev->target}};
    }
    else
    {
        phase.feet = {{Foot::Left, foot_position(Foot::Left, t)},
                      {Foot::Right, foot_position(Foot::Right, t)}};
    }
    return phase;
}

void StepSequence::freeze_started(double t)
{
    for (auto& s : steps_)
    {
        if (s.swing_start <= t)
        {
            s.frozen = true;
        }
    }
}

int StepSequence::cancel_unstarted(double t, int keep)
{
    int seen = 0;
    size_t cut = steps_.size();
    for (size_t i = 0; i < steps_.size(); i++)
    {
        if (steps_[i].swing_start > t)
        {
            seen++;
            if (seen > keep)
            {
                cut = i;
                break;
            }
        }
    }
    const int removed = static_cast<int>(steps_.size() - cut);
    steps_.resize(cut);
    return removed;
}

double StepSequence::last_touchdown() const
{
    return steps_.empty() ? 0.0 : steps_.back().touchdown;
}

}  // namespace flexwalk
