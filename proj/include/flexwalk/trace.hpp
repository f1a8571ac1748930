#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "flexwalk/centroidal.hpp"

namespace flexwalk
{
/// Support phase tag recorded per tick.
enum class PhaseTag : int
{
    Stand = 0,
    SingleLeft = 1,   // stance on the left foot
    SingleRight = 2,  // stance on the right foot
    Transfer = 3
};

struct TraceRow
{
    double t{0.0};
    std::array<CentroidalState, 2> com_true;
    std::array<CentroidalState, 2> com_est;
    std::array<CentroidalState, 2> com_ref;
    Eigen::Vector2d cop_true{0.0, 0.0};
    Eigen::Vector2d cop_ref{0.0, 0.0};
    Eigen::Vector2d vrp_true{0.0, 0.0};
    Eigen::Vector2d bias{0.0, 0.0};
    Eigen::Vector2d theta_left_true{0.0, 0.0};
    Eigen::Vector2d theta_right_true{0.0, 0.0};
    Eigen::Vector2d theta_left_est{0.0, 0.0};
    Eigen::Vector2d theta_right_est{0.0, 0.0};
    Eigen::Vector2d jerk_cmd{0.0, 0.0};
    PhaseTag phase{PhaseTag::Stand};
    Eigen::Vector2d support_lo{0.0, 0.0};
    Eigen::Vector2d support_hi{0.0, 0.0};
    bool fall{false};
};

/// Uniform-time-base experiment record, one row per stabilizer tick.
struct SimTrace
{
    double dt{0.002};
    std::string scenario;
    unsigned long long seed{0};
    std::vector<TraceRow> rows;

    Eigen::Vector2d cop_error(size_t i) const
    {
        return rows[i].cop_true - rows[i].cop_ref;
    }
};

/// Writes the documented CSV schema (version line, column names, units row,
/// then one row per tick). Byte-stable for identical traces.
void write_trace_csv(const SimTrace& trace, const std::string& path);

/// Reads a CSV produced by write_trace_csv.
SimTrace read_trace_csv(const std::string& path);

/// Sorted-|error| quantile curve: point i holds (fraction of time,
/// error bound), meaning the error stays below the bound for that fraction
/// of the experiment.
std::vector<std::pair<double, double>> error_duration_profile(
    const std::vector<double>& abs_errors);

/// Profile of the CoP tracking error norm of a trace.
std::vector<std::pair<double, double>> error_duration_profile(const SimTrace& trace);

void write_profile_csv(const std::vector<std::pair<double, double>>& profile,
                       const std::string& path);

}  // namespace flexwalk
