#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "flexwalk/gait.hpp"
#include "flexwalk/identify.hpp"
#include "flexwalk/plant.hpp"

#include "json.hpp"

namespace flexwalk
{
enum class ScenarioKind
{
    WalkInPlace,
    QuasiStatic,
    DynamicWalk,
    IdentifyStiffness
};

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& name);

struct DisturbanceConfig
{
    std::string kind{"none"};  // none | uniform
    Eigen::Vector2d amplitude{0.0, 0.0};
};

struct QuasiStaticConfig
{
    int steps{8};
    double step_length{0.10};
    double ss_duration{2.0};
    double ds_duration{1.5};
    /// Reference CoP offset toward the interior foot edge, applied when the
    /// bending estimator is off.
    double interior_offset{0.02};
};

struct IdentifyScenarioConfig
{
    double stance_duration{4.0};
    double settle_time{1.0};
    StiffnessGrid grid;
};

/// Whole scenario description, loadable from a JSON file. Unknown keys are
/// rejected; module-level validation runs at load.
struct ScenarioConfig
{
    PlantConfig plant;

    // Controller.
    double control_period{0.002};
    std::optional<double> omega_sq;  // default: g / com_height
    Eigen::Vector2d d_max{125.0, 75.0};
    std::optional<Eigen::Vector2d> margins{Eigen::Vector2d(0.025, 0.015)};
    std::optional<Eigen::Vector3d> gain;  // default: optimized at startup
    double tail_tol{1e-9};
    double lpf_cutoff_hz{20.0};
    bool estimator{true};
    std::optional<double> assumed_k_left;   // default: plant truth
    std::optional<double> assumed_k_right;
    std::optional<Eigen::Vector2d> saturation_e_bound;  // default: d_max

    GaitConfig gait;
    bool mpc_enabled{true};

    // Scenario.
    ScenarioKind kind{ScenarioKind::DynamicWalk};
    double stand_duration{2.0};
    double tail_duration{3.0};
    int in_place_steps{2};
    int forward_steps{8};
    double target_speed{0.25};
    int ramp_steps{3};
    std::optional<double> stop_time;
    QuasiStaticConfig quasi_static;
    IdentifyScenarioConfig identify;

    // Noise.
    DisturbanceConfig disturbance;
    double sole_torque_sigma{0.0};
    double sole_force_sigma{0.0};
    unsigned long long seed{1};

    // Output.
    std::string out_dir{"out"};
    std::string trace_name{"trace.csv"};
    std::string summary_name{"summary.json"};
    bool write_trace{true};

    double omega_sq_effective() const;
    void validate() const;

    static ScenarioConfig from_json(const nlohmann::json& j);
    static ScenarioConfig from_file(const std::string& path);
    nlohmann::ordered_json to_json() const;
};

}  // namespace flexwalk
