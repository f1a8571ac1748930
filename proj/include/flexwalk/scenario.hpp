#pragma once

#include <optional>
#include <random>

#include "flexwalk/config.hpp"
#include "flexwalk/identify.hpp"
#include "flexwalk/trace.hpp"
#include "flexwalk/tube.hpp"

#include "json.hpp"

namespace flexwalk
{
struct ScenarioResult
{
    SimTrace trace;
    nlohmann::ordered_json summary;
    std::optional<StiffnessIdentification> identification;
};

/// Resolved controller pieces: the stabilizer gain (configured or optimized
/// at startup) and the per-axis margins (configured or certified from the
/// gain and disturbance bounds).
struct ControllerSetup
{
    SystemMatrices sys;
    Eigen::RowVector3d K;
    Eigen::Vector2d margins;
    Eigen::Vector2d v_tilde_max;  // certified bound at d_max, per axis
    Eigen::Vector2d sat_bound;    // e_u bound used by the saturation limits
};

ControllerSetup resolve_controller(const ScenarioConfig& cfg);

/// Synthesizes one static single-support stance record for stiffness
/// identification, integrating the true flexible plant under the static hip
/// loads and adding the configured sensor noise.
StanceExperiment make_stance_experiment(const ScenarioConfig& cfg, Foot stance,
                                        std::mt19937_64& rng);

/// Runs the configured scenario closed loop and returns the trace plus a
/// summary. Walk scenarios wire the reference generator (MPC or precomputed
/// quasi-static trajectory) through the tube stabilizer and whole-body
/// interface into the flexible plant at the stabilizer rate.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

/// Writes trace, summary and any identification surfaces under cfg.out_dir.
void write_outputs(const ScenarioConfig& cfg, const ScenarioResult& result);

}  // namespace flexwalk
