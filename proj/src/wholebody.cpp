#include "flexwalk/wholebody.hpp"

#include <algorithm>
#include <cmath>

#include "flexwalk/errors.hpp"
#include "flexwalk/qp.hpp"
#include "flexwalk/rotations.hpp"

namespace flexwalk
{
namespace
{
// Min-jerk quintic basis on [0, 1] and its scaled derivatives.
double quintic(double tau)
{
    return tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau));
}
double quintic_d(double tau)
{
    return tau * tau * (30.0 + tau * (-60.0 + 30.0 * tau));
}
double quintic_dd(double tau)
{
    return tau * (60.0 + tau * (-180.0 + 120.0 * tau));
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(),  //
        v.z(), 0.0, -v.x(),   //
        -v.y(), v.x(), 0.0;
    return m;
}

}  // namespace

Eigen::Vector3d task_feedback(const Eigen::Vector3d& gamma, const Eigen::Vector3d& gamma_dot,
                              const TaskReference& ref)
{
    return ref.kp * (gamma - ref.value) + ref.kd * (gamma_dot - ref.rate) + ref.accel;
}

SwingSpline::SwingSpline(const Eigen::Vector2d& from, const Eigen::Vector2d& to, double duration,
                         double apex_height, double max_speed)
    : from_(from), to_(to), duration_(duration), apex_(apex_height)
{
    if (!(duration > 0.0) || !(apex_height > 0.0))
    {
        throw DomainError("SwingSpline: duration and apex height must be positive");
    }
    peak_speed_ = 0.0;
    const int samples = 2000;
    for (int i = 0; i <= samples; i++)
    {
        const double t = duration_ * i / samples;
        peak_speed_ = std::max(peak_speed_, at(t).velocity.norm());
    }
    if (peak_speed_ > max_speed)
    {
        throw InfeasibleSwingError("SwingSpline: required peak speed " +
                                   std::to_string(peak_speed_) + " m/s exceeds limit " +
                                   std::to_string(max_speed) + " m/s");
    }
}

SwingSpline::Sample SwingSpline::at(double t) const
{
    const double tc = std::clamp(t, 0.0, duration_);
    const double tau = tc / duration_;
    Sample s;
    const Eigen::Vector2d span = to_ - from_;
    s.position.head<2>() = from_ + span * quintic(tau);
    s.velocity.head<2>() = span * quintic_d(tau) / duration_;
    s.acceleration.head<2>() = span * quintic_dd(tau) / (duration_ * duration_);

    // Vertical: rise to the apex over the first half, return over the second.
    const double half = duration_ / 2.0;
    if (tc <= half)
    {
        const double tz = tc / half;
        s.position.z() = apex_ * quintic(tz);
        s.velocity.z() = apex_ * quintic_d(tz) / half;
        s.acceleration.z() = apex_ * quintic_dd(tz) / (half * half);
    }
    else
    {
        const double tz = (tc - half) / half;
        s.position.z() = apex_ * (1.0 - quintic(tz));
        s.velocity.z() = -apex_ * quintic_d(tz) / half;
        s.acceleration.z() = -apex_ * quintic_dd(tz) / (half * half);
    }
    return s;
}

double waist_yaw_reference(double left_yaw, double right_yaw)
{
    const double yaw = left_yaw + 0.5 * wrap_angle(right_yaw - left_yaw);
    return wrap_angle(yaw);
}

WrenchDistribution distribute_wrench(const Eigen::Vector3d& com_des,
                                     const Eigen::Vector3d& com_acc_des,
                                     const Eigen::Vector3d& angular_momentum_rate_des,
                                     const SupportPhase& phase,
                                     double friction_mu,
                                     double mass,
                                     double gravity)
{
    const Eigen::Vector3d total_force =
        mass * (com_acc_des + Eigen::Vector3d(0.0, 0.0, gravity));
    if (!(total_force.z() > 0.0))
    {
        throw DistributionInfeasibleError(
            "distribute_wrench: total commanded normal force must be positive");
    }
    const double mu_facet = friction_mu / std::sqrt(2.0);

    auto cone_ok = [&](const Eigen::Vector3d& f) {
        return f.z() >= -1e-9 && std::abs(f.x()) <= mu_facet * f.z() + 1e-9 &&
               std::abs(f.y()) <= mu_facet * f.z() + 1e-9;
    };

    WrenchDistribution out;
    if (phase.kind == PhaseKind::SingleSupport)
    {
        const Eigen::Vector3d r(phase.feet[0].position.x(), phase.feet[0].position.y(), 0.0);
        Wrench w;
        w.force = total_force;
        w.torque = angular_momentum_rate_des - (r - com_des).cross(total_force);
        if (!cone_ok(w.force))
        {
            throw DistributionInfeasibleError(
                "distribute_wrench: single-support force outside the friction cone");
        }
        out.single_support = true;
        if (phase.feet[0].foot == Foot::Right)
        {
            out.right = w;
        }
        else
        {
            out.left = w;
        }
        return out;
    }

    // Double support: variables [f_a; tau_a; f_b; tau_b] with a = feet[0].
    const Eigen::Vector3d r_a(phase.feet[0].position.x(), phase.feet[0].position.y(), 0.0);
    const Eigen::Vector3d r_b(phase.feet[1].position.x(), phase.feet[1].position.y(), 0.0);

    Eigen::MatrixXd a_eq = Eigen::MatrixXd::Zero(6, 12);
    Eigen::VectorXd b_eq(6);
    a_eq.block<3, 3>(0, 0).setIdentity();
    a_eq.block<3, 3>(0, 6).setIdentity();
    b_eq.head<3>() = total_force;
    a_eq.block<3, 3>(3, 0) = skew(r_a - com_des);
    a_eq.block<3, 3>(3, 3).setIdentity();
    a_eq.block<3, 3>(3, 6) = skew(r_b - com_des);
    a_eq.block<3, 3>(3, 9).setIdentity();
    b_eq.tail<3>() = angular_momentum_rate_des;

    Eigen::MatrixXd a_in = Eigen::MatrixXd::Zero(10, 12);
    Eigen::VectorXd b_in = Eigen::VectorXd::Zero(10);
    for (int foot = 0; foot < 2; foot++)
    {
        const int col = 6 * foot;
        const int row = 5 * foot;
        a_in(row + 0, col + 2) = -1.0;  // f_z >= 0
        a_in(row + 1, col + 0) = 1.0;   // f_x <= mu f_z
        a_in(row + 1, col + 2) = -mu_facet;
        a_in(row + 2, col + 0) = -1.0;  // -f_x <= mu f_z
        a_in(row + 2, col + 2) = -mu_facet;
        a_in(row + 3, col + 1) = 1.0;
        a_in(row + 3, col + 2) = -mu_facet;
        a_in(row + 4, col + 1) = -1.0;
        a_in(row + 4, col + 2) = -mu_facet;
    }

    const Eigen::MatrixXd hessian = 2.0 * Eigen::MatrixXd::Identity(12, 12);
    QpResult res;
    try
    {
        res = solve_qp(hessian, Eigen::VectorXd::Zero(12), a_eq, b_eq, a_in, b_in);
    }
    catch (const QpError& e)
    {
        throw DistributionInfeasibleError(std::string("distribute_wrench: ") + e.what());
    }

    Wrench w_a{res.x.segment<3>(0), res.x.segment<3>(3)};
    Wrench w_b{res.x.segment<3>(6), res.x.segment<3>(9)};
    out.kkt_residual = res.kkt_residual();
    if (phase.feet[0].foot == Foot::Right)
    {
        out.right = w_a;
        out.left = w_b;
    }
    else
    {
        out.left = w_a;
        out.right = w_b;
    }
    return out;
}

InterfaceReferences interface_references(const std::array<CentroidalState, 2>& x_next,
                                         double com_height,
                                         const SupportPhase& phase,
                                         const SwingContext& swing,
                                         double friction_mu,
                                         double mass,
                                         double gravity)
{
    InterfaceReferences out;
    out.com.value = {x_next[0].pos, x_next[1].pos, com_height};
    out.com.rate = {x_next[0].vel, x_next[1].vel, 0.0};
    out.com.accel = {x_next[0].acc, x_next[1].acc, 0.0};

    // Grounded feet stand at their placements; the swinging foot follows its
    // spline.
    auto grounded = [&](Foot f) -> SwingSpline::Sample {
        SwingSpline::Sample s;
        for (const auto& placement : phase.feet)
        {
            if (placement.foot == f)
            {
                s.position = {placement.position.x(), placement.position.y(), 0.0};
            }
        }
        return s;
    };
    out.left_foot = grounded(Foot::Left);
    out.right_foot = grounded(Foot::Right);
    if (phase.kind == PhaseKind::SingleSupport && swing.spline != nullptr)
    {
        if (swing.foot == Foot::Left)
        {
            out.left_foot = swing.spline->at(swing.time_in_swing);
        }
        else
        {
            out.right_foot = swing.spline->at(swing.time_in_swing);
        }
    }

    out.waist_yaw = waist_yaw_reference(0.0, 0.0);
    out.wrenches = distribute_wrench(out.com.value, out.com.accel,
                                     Eigen::Vector3d::Zero(), phase, friction_mu, mass, gravity);
    return out;
}

}  // namespace flexwalk
