#include "flexwalk/plant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flexwalk/errors.hpp"

namespace flexwalk
{
void PlantConfig::validate() const
{
    if (!(mass > 0.0) || !(leg_mass > 0.0) || leg_mass * 2.0 >= mass)
    {
        throw DomainError("PlantConfig: masses must satisfy 0 < 2 leg_mass < mass");
    }
    if (!(com_height > 0.0) || !(gravity > 0.0) || !(flex_inertia > 0.0))
    {
        throw DomainError("PlantConfig: com_height, gravity, flex_inertia must be positive");
    }
    if (!(sim_dt > 0.0) || sim_dt > 1e-3)
    {
        throw DomainError("PlantConfig: sim_dt must be in (0, 1e-3] s");
    }
    if (!(foot_half_length > 0.0) || !(foot_half_width > 0.0))
    {
        throw DomainError("PlantConfig: foot half-dimensions must be positive");
    }
    flex_left.validate();
    flex_right.validate();
}

FlexibleLipPlant::FlexibleLipPlant(const PlantConfig& cfg,
                                   const std::array<CentroidalState, 2>& com0)
    : cfg_(cfg), com_(com0)
{
    cfg_.validate();
}

Eigen::Vector2d FlexibleLipPlant::true_cop() const
{
    const double lever = cfg_.com_height / cfg_.gravity;
    return {com_[0].pos - lever * com_[0].acc, com_[1].pos - lever * com_[1].acc};
}

Eigen::Vector2d FlexibleLipPlant::support_shift(Foot f) const
{
    const FlexParams& params = f == Foot::Left ? cfg_.flex_left : cfg_.flex_right;
    return lever_arm_delta(theta(f), params.lever).head<2>();
}

Interval FlexibleLipPlant::physical_support(const SupportPhase& phase, int axis) const
{
    const double half = axis == 0 ? cfg_.foot_half_length : cfg_.foot_half_width;
    Interval iv{std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
    for (const auto& foot : phase.feet)
    {
        const double center = foot.position(axis) + support_shift(foot.foot)(axis);
        iv.lo = std::min(iv.lo, center - half);
        iv.hi = std::max(iv.hi, center + half);
    }
    return iv;
}

double FlexibleLipPlant::deflection_energy(Foot f) const
{
    const FlexParams& params = f == Foot::Left ? cfg_.flex_left : cfg_.flex_right;
    const Eigen::Vector2d& th = theta(f);
    const Eigen::Vector2d& thd = theta_dot(f);
    double energy = 0.0;
    for (int axis = 0; axis < 2; axis++)
    {
        energy += 0.5 * params.stiffness(axis) * th(axis) * th(axis) +
                  0.5 * cfg_.flex_inertia * thd(axis) * thd(axis);
    }
    return energy;
}

void FlexibleLipPlant::substep(const Inputs& in, double dt)
{
    if (!cfg_.rigid)
    {
        auto integrate_hip = [&](Eigen::Vector2d& th, Eigen::Vector2d& thd,
                                 const Eigen::Vector2d& load, const FlexParams& params) {
            for (int axis = 0; axis < 2; axis++)
            {
                // Semi-implicit Euler with implicit damping: stable for the
                // stiff spring at the configured step sizes.
                const double accel =
                    (load(axis) - params.stiffness(axis) * th(axis)) / cfg_.flex_inertia;
                thd(axis) = (thd(axis) + dt * accel) /
                            (1.0 + dt * params.damping(axis) / cfg_.flex_inertia);
                th(axis) += dt * thd(axis);
            }
        };
        integrate_hip(theta_left_, theta_dot_left_, in.hip_load_left, cfg_.flex_left);
        integrate_hip(theta_right_, theta_dot_right_, in.hip_load_right, cfg_.flex_right);
    }

    for (int axis = 0; axis < 2; axis++)
    {
        com_[axis] = propagate_constant_jerk(
            com_[axis], in.commanded_jerk[axis] + in.disturbance[axis], dt);
        if (!com_[axis].finite())
        {
            throw SimulationBlowupError("plant: CoM state became non-finite at t = " +
                                        std::to_string(time_));
        }
    }
    time_ += dt;

    if (!fallen_ && !in.phase.feet.empty())
    {
        const Eigen::Vector2d cop = true_cop();
        for (int axis = 0; axis < 2; axis++)
        {
            const Interval support = physical_support(in.phase, axis);
            if (!support.contains(cop(axis), 1e-9))
            {
                fallen_ = true;
                fall_time_ = time_;
                break;
            }
        }
    }
}

void FlexibleLipPlant::step(const Inputs& in, double duration)
{
    const int n = std::max(1, static_cast<int>(std::ceil(duration / cfg_.sim_dt - 1e-12)));
    const double dt = duration / n;
    for (int i = 0; i < n; i++)
    {
        substep(in, dt);
    }
}

}  // namespace flexwalk
