#include "flexwalk/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "flexwalk/errors.hpp"

namespace flexwalk
{
namespace
{
using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object())
    {
        throw ConfigError("expected an object", where);
    }
    for (const auto& [key, value] : j.items())
    {
        if (!allowed.count(key))
        {
            throw ConfigError("unknown key", where.empty() ? key : where + "." + key);
        }
    }
}

double get_num(const json& j, const char* key, double fallback)
{
    if (!j.contains(key) || j.at(key).is_null())
    {
        return fallback;
    }
    if (!j.at(key).is_number())
    {
        throw ConfigError("expected a number", key);
    }
    return j.at(key).get<double>();
}

int get_int(const json& j, const char* key, int fallback)
{
    if (!j.contains(key) || j.at(key).is_null())
    {
        return fallback;
    }
    if (!j.at(key).is_number_integer())
    {
        throw ConfigError("expected an integer", key);
    }
    return j.at(key).get<int>();
}

bool get_bool(const json& j, const char* key, bool fallback)
{
    if (!j.contains(key) || j.at(key).is_null())
    {
        return fallback;
    }
    if (!j.at(key).is_boolean())
    {
        throw ConfigError("expected a boolean", key);
    }
    return j.at(key).get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& fallback)
{
    if (!j.contains(key) || j.at(key).is_null())
    {
        return fallback;
    }
    if (!j.at(key).is_string())
    {
        throw ConfigError("expected a string", key);
    }
    return j.at(key).get<std::string>();
}

template <int N>
Eigen::Matrix<double, N, 1> get_vec(const json& j, const char* key,
                                    const Eigen::Matrix<double, N, 1>& fallback)
{
    if (!j.contains(key) || j.at(key).is_null())
    {
        return fallback;
    }
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != N)
    {
        throw ConfigError("expected an array of " + std::to_string(N) + " numbers", key);
    }
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; i++)
    {
        v(i) = a.at(i).get<double>();
    }
    return v;
}

template <int N>
std::optional<Eigen::Matrix<double, N, 1>> get_opt_vec(const json& j, const char* key)
{
    if (!j.contains(key) || j.at(key).is_null())
    {
        return std::nullopt;
    }
    return get_vec<N>(j, key, Eigen::Matrix<double, N, 1>::Zero());
}

std::optional<double> get_opt_num(const json& j, const char* key)
{
    if (!j.contains(key) || j.at(key).is_null())
    {
        return std::nullopt;
    }
    return j.at(key).get<double>();
}

json vec_to_json(const Eigen::Vector2d& v)
{
    return json::array({v(0), v(1)});
}

}  // namespace

std::string to_string(ScenarioKind kind)
{
    switch (kind)
    {
        case ScenarioKind::WalkInPlace:
            return "walk-in-place";
        case ScenarioKind::QuasiStatic:
            return "quasi-static";
        case ScenarioKind::DynamicWalk:
            return "dynamic-walk";
        case ScenarioKind::IdentifyStiffness:
            return "identify-stiffness";
    }
    return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& name)
{
    if (name == "walk-in-place")
    {
        return ScenarioKind::WalkInPlace;
    }
    if (name == "quasi-static")
    {
        return ScenarioKind::QuasiStatic;
    }
    if (name == "dynamic-walk")
    {
        return ScenarioKind::DynamicWalk;
    }
    if (name == "identify-stiffness")
    {
        return ScenarioKind::IdentifyStiffness;
    }
    throw ConfigError("unknown scenario kind '" + name + "'", "scenario.kind");
}

double ScenarioConfig::omega_sq_effective() const
{
    return omega_sq ? *omega_sq : omega_from_height(plant.com_height, plant.gravity);
}

void ScenarioConfig::validate() const
{
    plant.validate();
    gait.validate();
    if (!(control_period > 0.0) || control_period > 0.05)
    {
        throw ConfigError("control period must be in (0, 0.05] s", "controller.period");
    }
    if (d_max.minCoeff() < 0.0)
    {
        throw ConfigError("disturbance bounds must be nonnegative", "controller.d_max");
    }
    if (margins && margins->minCoeff() < 0.0)
    {
        throw ConfigError("margins must be nonnegative", "controller.margins");
    }
    if (disturbance.kind != "none" && disturbance.kind != "uniform")
    {
        throw ConfigError("disturbance kind must be 'none' or 'uniform'", "noise.disturbance");
    }
    if (in_place_steps < 0 || forward_steps < 0 || ramp_steps < 1)
    {
        throw ConfigError("step counts must be nonnegative (ramp_steps >= 1)",
                          "scenario.steps");
    }
    if (quasi_static.steps < 1 || !(quasi_static.ss_duration > 0.0) ||
        !(quasi_static.ds_duration > 0.0))
    {
        throw ConfigError("quasi-static timing must be positive", "scenario.quasi_static");
    }
    if (!(identify.stance_duration > identify.settle_time) || identify.settle_time < 0.0)
    {
        throw ConfigError("stance duration must exceed the settle time", "scenario.identify");
    }
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw ConfigError("cannot open config file", path);
    }
    json j;
    try
    {
        in >> j;
    }
    catch (const json::parse_error& e)
    {
        throw ConfigError(std::string("JSON parse error: ") + e.what(), path);
    }
    return from_json(j);
}

ScenarioConfig ScenarioConfig::from_json(const json& j)
{
    ScenarioConfig cfg;
    check_keys(j, {"plant", "controller", "mpc", "scenario", "noise", "seed", "output"}, "");

    if (j.contains("plant"))
    {
        const auto& p = j.at("plant");
        check_keys(p,
                   {"mass", "leg_mass", "com_height", "gravity", "hip_offset_y", "hip_height",
                    "lever_arm", "stiffness_left", "stiffness_right", "damping_left",
                    "damping_right", "flex_inertia", "rigid", "sim_dt", "foot_half_length",
                    "foot_half_width"},
                   "plant");
        cfg.plant.mass = get_num(p, "mass", cfg.plant.mass);
        cfg.plant.leg_mass = get_num(p, "leg_mass", cfg.plant.leg_mass);
        cfg.plant.com_height = get_num(p, "com_height", cfg.plant.com_height);
        cfg.plant.gravity = get_num(p, "gravity", cfg.plant.gravity);
        cfg.plant.hip_offset_y = get_num(p, "hip_offset_y", cfg.plant.hip_offset_y);
        cfg.plant.hip_height = get_num(p, "hip_height", cfg.plant.hip_height);
        const Eigen::Vector3d lever =
            get_vec<3>(p, "lever_arm", cfg.plant.flex_left.lever);
        const double k_left = get_num(p, "stiffness_left", cfg.plant.flex_left.stiffness(0));
        const double k_right =
            get_num(p, "stiffness_right", cfg.plant.flex_right.stiffness(0));
        const double d_left = get_num(p, "damping_left", 2.0 * std::sqrt(k_left));
        const double d_right = get_num(p, "damping_right", 2.0 * std::sqrt(k_right));
        cfg.plant.flex_left = FlexParams::isotropic(k_left, d_left);
        cfg.plant.flex_right = FlexParams::isotropic(k_right, d_right);
        cfg.plant.flex_left.lever = lever;
        cfg.plant.flex_right.lever = lever;
        cfg.plant.flex_inertia = get_num(p, "flex_inertia", cfg.plant.flex_inertia);
        cfg.plant.rigid = get_bool(p, "rigid", cfg.plant.rigid);
        cfg.plant.sim_dt = get_num(p, "sim_dt", cfg.plant.sim_dt);
        cfg.plant.foot_half_length =
            get_num(p, "foot_half_length", cfg.plant.foot_half_length);
        cfg.plant.foot_half_width = get_num(p, "foot_half_width", cfg.plant.foot_half_width);
    }

    if (j.contains("controller"))
    {
        const auto& c = j.at("controller");
        check_keys(c,
                   {"period", "omega_sq", "d_max", "margins", "gain", "tail_tol",
                    "lpf_cutoff_hz", "estimator", "assumed_stiffness_left",
                    "assumed_stiffness_right", "saturation_e_bound"},
                   "controller");
        cfg.control_period = get_num(c, "period", cfg.control_period);
        cfg.omega_sq = get_opt_num(c, "omega_sq");
        cfg.d_max = get_vec<2>(c, "d_max", cfg.d_max);
        if (c.contains("margins") && c.at("margins").is_null())
        {
            cfg.margins.reset();
        }
        else
        {
            cfg.margins = get_vec<2>(c, "margins", *cfg.margins);
        }
        cfg.gain = get_opt_vec<3>(c, "gain");
        cfg.tail_tol = get_num(c, "tail_tol", cfg.tail_tol);
        cfg.lpf_cutoff_hz = get_num(c, "lpf_cutoff_hz", cfg.lpf_cutoff_hz);
        cfg.estimator = get_bool(c, "estimator", cfg.estimator);
        cfg.assumed_k_left = get_opt_num(c, "assumed_stiffness_left");
        cfg.assumed_k_right = get_opt_num(c, "assumed_stiffness_right");
        cfg.saturation_e_bound = get_opt_vec<2>(c, "saturation_e_bound");
    }

    if (j.contains("mpc"))
    {
        const auto& m = j.at("mpc");
        check_keys(m,
                   {"enabled", "period", "horizon", "replan_period", "stepping_x",
                    "stepping_width", "nominal_stance_width", "max_swing_speed",
                    "apex_height", "weights"},
                   "mpc");
        cfg.mpc_enabled = get_bool(m, "enabled", cfg.mpc_enabled);
        cfg.gait.T_mpc = get_num(m, "period", cfg.gait.T_mpc);
        cfg.gait.horizon = get_int(m, "horizon", cfg.gait.horizon);
        cfg.gait.replan_period = get_num(m, "replan_period", cfg.gait.replan_period);
        const Eigen::Vector2d sx =
            get_vec<2>(m, "stepping_x", {cfg.gait.stepping_x_min, cfg.gait.stepping_x_max});
        cfg.gait.stepping_x_min = sx(0);
        cfg.gait.stepping_x_max = sx(1);
        const Eigen::Vector2d sw = get_vec<2>(
            m, "stepping_width", {cfg.gait.stepping_width_min, cfg.gait.stepping_width_max});
        cfg.gait.stepping_width_min = sw(0);
        cfg.gait.stepping_width_max = sw(1);
        cfg.gait.nominal_stance_width =
            get_num(m, "nominal_stance_width", cfg.gait.nominal_stance_width);
        cfg.gait.max_swing_speed = get_num(m, "max_swing_speed", cfg.gait.max_swing_speed);
        cfg.gait.apex_height = get_num(m, "apex_height", cfg.gait.apex_height);
        if (m.contains("weights"))
        {
            const auto& w = m.at("weights");
            check_keys(w, {"velocity", "jerk", "ankle", "step"}, "mpc.weights");
            cfg.gait.w_velocity = get_num(w, "velocity", cfg.gait.w_velocity);
            cfg.gait.w_jerk = get_num(w, "jerk", cfg.gait.w_jerk);
            cfg.gait.w_ankle = get_num(w, "ankle", cfg.gait.w_ankle);
            cfg.gait.w_step = get_num(w, "step", cfg.gait.w_step);
        }
    }

    if (j.contains("scenario"))
    {
        const auto& s = j.at("scenario");
        check_keys(s,
                   {"kind", "stand_duration", "tail_duration", "in_place_steps",
                    "forward_steps", "target_speed", "ramp_steps", "step_duration",
                    "ss_fraction", "stop_time", "quasi_static", "identify"},
                   "scenario");
        cfg.kind = scenario_kind_from_string(get_string(s, "kind", to_string(cfg.kind)));
        cfg.stand_duration = get_num(s, "stand_duration", cfg.stand_duration);
        cfg.tail_duration = get_num(s, "tail_duration", cfg.tail_duration);
        cfg.in_place_steps = get_int(s, "in_place_steps", cfg.in_place_steps);
        cfg.forward_steps = get_int(s, "forward_steps", cfg.forward_steps);
        cfg.target_speed = get_num(s, "target_speed", cfg.target_speed);
        cfg.ramp_steps = get_int(s, "ramp_steps", cfg.ramp_steps);
        cfg.gait.step_duration = get_num(s, "step_duration", cfg.gait.step_duration);
        cfg.gait.ss_fraction = get_num(s, "ss_fraction", cfg.gait.ss_fraction);
        cfg.stop_time = get_opt_num(s, "stop_time");
        if (s.contains("quasi_static"))
        {
            const auto& q = s.at("quasi_static");
            check_keys(q, {"steps", "step_length", "ss_duration", "ds_duration",
                           "interior_offset"},
                       "scenario.quasi_static");
            cfg.quasi_static.steps = get_int(q, "steps", cfg.quasi_static.steps);
            cfg.quasi_static.step_length =
                get_num(q, "step_length", cfg.quasi_static.step_length);
            cfg.quasi_static.ss_duration =
                get_num(q, "ss_duration", cfg.quasi_static.ss_duration);
            cfg.quasi_static.ds_duration =
                get_num(q, "ds_duration", cfg.quasi_static.ds_duration);
            cfg.quasi_static.interior_offset =
                get_num(q, "interior_offset", cfg.quasi_static.interior_offset);
        }
        if (s.contains("identify"))
        {
            const auto& idn = s.at("identify");
            check_keys(idn, {"stance_duration", "settle_time", "grid_left", "grid_right"},
                       "scenario.identify");
            cfg.identify.stance_duration =
                get_num(idn, "stance_duration", cfg.identify.stance_duration);
            cfg.identify.settle_time = get_num(idn, "settle_time", cfg.identify.settle_time);
            auto parse_grid = [&](const char* key, double& lo, double& hi, int& n) {
                if (!idn.contains(key) || idn.at(key).is_null())
                {
                    return;
                }
                const auto& g = idn.at(key);
                if (!g.is_array() || g.size() != 3)
                {
                    throw ConfigError("expected [min, max, count]",
                                      std::string("scenario.identify.") + key);
                }
                lo = g.at(0).get<double>();
                hi = g.at(1).get<double>();
                n = g.at(2).get<int>();
            };
            parse_grid("grid_left", cfg.identify.grid.left_min, cfg.identify.grid.left_max,
                       cfg.identify.grid.left_n);
            parse_grid("grid_right", cfg.identify.grid.right_min,
                       cfg.identify.grid.right_max, cfg.identify.grid.right_n);
        }
    }

    if (j.contains("noise"))
    {
        const auto& n = j.at("noise");
        check_keys(n, {"disturbance", "amplitude", "sole_torque_sigma", "sole_force_sigma"},
                   "noise");
        cfg.disturbance.kind = get_string(n, "disturbance", cfg.disturbance.kind);
        cfg.disturbance.amplitude = get_vec<2>(n, "amplitude", cfg.disturbance.amplitude);
        cfg.sole_torque_sigma = get_num(n, "sole_torque_sigma", cfg.sole_torque_sigma);
        cfg.sole_force_sigma = get_num(n, "sole_force_sigma", cfg.sole_force_sigma);
    }

    if (j.contains("seed"))
    {
        cfg.seed = j.at("seed").get<unsigned long long>();
    }

    if (j.contains("output"))
    {
        const auto& o = j.at("output");
        check_keys(o, {"dir", "trace", "summary", "write_trace"}, "output");
        cfg.out_dir = get_string(o, "dir", cfg.out_dir);
        cfg.trace_name = get_string(o, "trace", cfg.trace_name);
        cfg.summary_name = get_string(o, "summary", cfg.summary_name);
        cfg.write_trace = get_bool(o, "write_trace", cfg.write_trace);
    }

    // Keep the two foot-geometry copies in sync: the plant owns the source.
    cfg.gait.foot_half_length = cfg.plant.foot_half_length;
    cfg.gait.foot_half_width = cfg.plant.foot_half_width;

    cfg.validate();
    return cfg;
}

nlohmann::ordered_json ScenarioConfig::to_json() const
{
    ordered_json j;
    j["plant"] = {{"mass", plant.mass},
                  {"leg_mass", plant.leg_mass},
                  {"com_height", plant.com_height},
                  {"gravity", plant.gravity},
                  {"hip_offset_y", plant.hip_offset_y},
                  {"hip_height", plant.hip_height},
                  {"lever_arm", {plant.flex_left.lever(0), plant.flex_left.lever(1),
                                 plant.flex_left.lever(2)}},
                  {"stiffness_left", plant.flex_left.stiffness(0)},
                  {"stiffness_right", plant.flex_right.stiffness(0)},
                  {"damping_left", plant.flex_left.damping(0)},
                  {"damping_right", plant.flex_right.damping(0)},
                  {"flex_inertia", plant.flex_inertia},
                  {"rigid", plant.rigid},
                  {"sim_dt", plant.sim_dt},
                  {"foot_half_length", plant.foot_half_length},
                  {"foot_half_width", plant.foot_half_width}};
    j["controller"] = {{"period", control_period},
                       {"omega_sq", omega_sq ? ordered_json(*omega_sq) : ordered_json()},
                       {"d_max", vec_to_json(d_max)},
                       {"margins", margins ? ordered_json(vec_to_json(*margins))
                                           : ordered_json()},
                       {"gain", gain ? ordered_json({(*gain)(0), (*gain)(1), (*gain)(2)})
                                     : ordered_json()},
                       {"tail_tol", tail_tol},
                       {"lpf_cutoff_hz", lpf_cutoff_hz},
                       {"estimator", estimator},
                       {"assumed_stiffness_left",
                        assumed_k_left ? ordered_json(*assumed_k_left) : ordered_json()},
                       {"assumed_stiffness_right",
                        assumed_k_right ? ordered_json(*assumed_k_right) : ordered_json()},
                       {"saturation_e_bound",
                        saturation_e_bound ? ordered_json(vec_to_json(*saturation_e_bound))
                                           : ordered_json()}};
    j["mpc"] = {{"enabled", mpc_enabled},
                {"period", gait.T_mpc},
                {"horizon", gait.horizon},
                {"replan_period", gait.replan_period},
                {"stepping_x", {gait.stepping_x_min, gait.stepping_x_max}},
                {"stepping_width", {gait.stepping_width_min, gait.stepping_width_max}},
                {"nominal_stance_width", gait.nominal_stance_width},
                {"max_swing_speed", gait.max_swing_speed},
                {"apex_height", gait.apex_height},
                {"weights",
                 {{"velocity", gait.w_velocity},
                  {"jerk", gait.w_jerk},
                  {"ankle", gait.w_ankle},
                  {"step", gait.w_step}}}};
    j["scenario"] = {{"kind", to_string(kind)},
                     {"stand_duration", stand_duration},
                     {"tail_duration", tail_duration},
                     {"in_place_steps", in_place_steps},
                     {"forward_steps", forward_steps},
                     {"target_speed", target_speed},
                     {"ramp_steps", ramp_steps},
                     {"step_duration", gait.step_duration},
                     {"ss_fraction", gait.ss_fraction},
                     {"stop_time", stop_time ? ordered_json(*stop_time) : ordered_json()},
                     {"quasi_static",
                      {{"steps", quasi_static.steps},
                       {"step_length", quasi_static.step_length},
                       {"ss_duration", quasi_static.ss_duration},
                       {"ds_duration", quasi_static.ds_duration},
                       {"interior_offset", quasi_static.interior_offset}}},
                     {"identify",
                      {{"stance_duration", identify.stance_duration},
                       {"settle_time", identify.settle_time},
                       {"grid_left",
                        {identify.grid.left_min, identify.grid.left_max,
                         identify.grid.left_n}},
                       {"grid_right",
                        {identify.grid.right_min, identify.grid.right_max,
                         identify.grid.right_n}}}}};
    j["noise"] = {{"disturbance", disturbance.kind},
                  {"amplitude", vec_to_json(disturbance.amplitude)},
                  {"sole_torque_sigma", sole_torque_sigma},
                  {"sole_force_sigma", sole_force_sigma}};
    j["seed"] = seed;
    j["output"] = {{"dir", out_dir},
                   {"trace", trace_name},
                   {"summary", summary_name},
                   {"write_trace", write_trace}};
    return j;
}

}  // namespace flexwalk
