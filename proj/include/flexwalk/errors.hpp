#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace flexwalk
{
/// Base class for all controlled failures raised by this library.
class Error : public std::runtime_error
{
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid argument outside a function's mathematical domain.
class DomainError : public Error
{
public:
    using Error::Error;
};

/// Contact configuration with no usable normal force.
class DegenerateContactError : public Error
{
public:
    using Error::Error;
};

/// The reference QP has no feasible point.
class PlannerInfeasibleError : public Error
{
public:
    PlannerInfeasibleError(const std::string& what, std::vector<std::string> violated)
        : Error(what), violated_constraints(std::move(violated))
    {
    }
    std::vector<std::string> violated_constraints;
};

/// Safety margin larger than the available support interval.
class MarginTooLargeError : public Error
{
public:
    using Error::Error;
};

/// Reference requested beyond the planned horizon.
class StalePlanError : public Error
{
public:
    using Error::Error;
};

/// Closed loop A+BK is not strictly stable.
class InstabilityError : public Error
{
public:
    using Error::Error;
};

/// A series or iteration failed to converge within its budget.
class ConvergenceError : public Error
{
public:
    using Error::Error;
};

/// No stabilizing gain could be found to start the search.
class InitializationError : public Error
{
public:
    using Error::Error;
};

/// Saturation interval is empty: support too small for the current error.
class InfeasibleSaturationError : public Error
{
public:
    using Error::Error;
};

/// Euler-angle velocity map is singular (gimbal alignment).
class SingularityError : public Error
{
public:
    using Error::Error;
};

/// Swing trajectory would exceed the allowed foot speed.
class InfeasibleSwingError : public Error
{
public:
    using Error::Error;
};

/// Wrench distribution has no solution inside the friction cones.
class DistributionInfeasibleError : public Error
{
public:
    using Error::Error;
};

/// CoP requested from a sensor reporting no normal force.
class NoContactError : public Error
{
public:
    using Error::Error;
};

/// Stiffness identification contours do not intersect within the grid.
class IdentificationFailedError : public Error
{
public:
    IdentificationFailedError(const std::string& what, double k_left, double k_right)
        : Error(what), nearest_k_left(k_left), nearest_k_right(k_right)
    {
    }
    /// Grid point minimizing the combined contour distance.
    double nearest_k_left;
    double nearest_k_right;
};

/// Simulation state became non-finite.
class SimulationBlowupError : public Error
{
public:
    using Error::Error;
};

/// QP solver failure (infeasible or numerically degenerate problem).
class QpError : public Error
{
public:
    using Error::Error;
};

/// Bad or unknown configuration content. Carries the offending key.
class ConfigError : public Error
{
public:
    ConfigError(const std::string& what, std::string key_in)
        : Error(what + (key_in.empty() ? "" : " (key: " + key_in + ")")), key(std::move(key_in))
    {
    }
    std::string key;
};

}  // namespace flexwalk
