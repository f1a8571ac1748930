#pragma once

#include <Eigen/Dense>
#include <array>

#include "flexwalk/centroidal.hpp"
#include "flexwalk/flex.hpp"
#include "flexwalk/gait.hpp"

namespace flexwalk
{
struct PlantConfig
{
    double mass{90.0};
    double leg_mass{12.0};
    double com_height{0.87};
    double gravity{9.81};
    double hip_offset_y{0.0855};
    double hip_height{0.75};
    FlexParams flex_left = FlexParams::isotropic(2180.0);
    FlexParams flex_right = FlexParams::isotropic(4900.0);
    double flex_inertia{1.0};  // kg m^2, effective inertia of the deflection
    bool rigid{false};
    double sim_dt{0.00025};
    double foot_half_length{0.11};
    double foot_half_width{0.0675};

    void validate() const;
};

/// Reduced flexible plant: a jerk-driven linear inverted pendulum whose hips
/// carry spring-damper deflections. Deflections displace the physical
/// support through the lever arm, the true CoP follows the centroidal
/// dynamics, and the fall flag latches when it leaves the displaced support.
class FlexibleLipPlant
{
public:
    FlexibleLipPlant(const PlantConfig& cfg, const std::array<CentroidalState, 2>& com0);

    struct Inputs
    {
        std::array<double, 2> commanded_jerk{0.0, 0.0};
        std::array<double, 2> disturbance{0.0, 0.0};  // extra jerk
        Eigen::Vector2d hip_load_left{0.0, 0.0};      // N m about the deflection point
        Eigen::Vector2d hip_load_right{0.0, 0.0};
        SupportPhase phase;  // believed support geometry
    };

    /// Integrates `duration` seconds in sub-steps of at most sim_dt:
    /// semi-implicit Euler on the deflections, exact constant-jerk update on
    /// the CoM. Throws SimulationBlowupError on non-finite state.
    void step(const Inputs& in, double duration);

    const PlantConfig& config() const { return cfg_; }
    const std::array<CentroidalState, 2>& com() const { return com_; }
    const Eigen::Vector2d& theta(Foot f) const
    {
        return f == Foot::Left ? theta_left_ : theta_right_;
    }
    const Eigen::Vector2d& theta_dot(Foot f) const
    {
        return f == Foot::Left ? theta_dot_left_ : theta_dot_right_;
    }

    /// True CoP on flat ground: p = c - (c_z / g) c_ddot per axis.
    Eigen::Vector2d true_cop() const;

    /// Physical support interval: believed feet displaced by their true
    /// lever-arm errors.
    Interval physical_support(const SupportPhase& phase, int axis) const;

    /// Lever-arm displacement of one foot under the current true deflection.
    Eigen::Vector2d support_shift(Foot f) const;

    bool fallen() const { return fallen_; }
    double fall_time() const { return fall_time_; }
    double time() const { return time_; }

    /// Elastic plus kinetic energy stored in one hip's deflection.
    double deflection_energy(Foot f) const;

private:
    void substep(const Inputs& in, double dt);

    PlantConfig cfg_;
    std::array<CentroidalState, 2> com_;
    Eigen::Vector2d theta_left_{0.0, 0.0};
    Eigen::Vector2d theta_dot_left_{0.0, 0.0};
    Eigen::Vector2d theta_right_{0.0, 0.0};
    Eigen::Vector2d theta_dot_right_{0.0, 0.0};
    double time_{0.0};
    bool fallen_{false};
    double fall_time_{-1.0};
};

}  // namespace flexwalk
