#include "flexwalk/identify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flexwalk/errors.hpp"

namespace flexwalk
{
namespace
{
struct Surface
{
    Eigen::MatrixXd mean;     // mean equilibrium error per grid point
    Eigen::MatrixXd sigma_n;  // standard deviation of that mean
};

FlexParams params_for(double k, const Eigen::Vector3d& lever)
{
    FlexParams p = FlexParams::isotropic(k);
    p.lever = lever;
    return p;
}

/// Mean lateral equilibrium error of one experiment under assumed
/// stiffnesses: re-estimate the deflections from the recorded torques, apply
/// the posture corrections and compare the corrected CoM with the measured
/// CoP.
void evaluate_point(const StanceExperiment& exp, double k_left, double k_right,
                    const Eigen::Vector3d& lever, double lpf_cutoff_hz, double leg_mass,
                    double total_mass, double& mean_out, double& sigma_n_out)
{
    const FlexParams p_left = params_for(k_left, lever);
    const FlexParams p_right = params_for(k_right, lever);
    FlexState s_left, s_right;
    double sum = 0.0, sumsq = 0.0;
    int count = 0;
    const Eigen::Vector3d foot_fk(exp.stance_foot_fk.x(), exp.stance_foot_fk.y(), 0.0);
    for (int t = 0; t < exp.size(); t++)
    {
        s_left = estimate_deflection(exp.tau_meas_left[t], s_left, p_left, exp.dt,
                                     lpf_cutoff_hz);
        s_right = estimate_deflection(exp.tau_meas_right[t], s_right, p_right, exp.dt,
                                      lpf_cutoff_hz);
        if (t < exp.settle_samples)
        {
            continue;
        }
        const Eigen::Vector3d com_fk(exp.com_fk[t].x(), exp.com_fk[t].y(), 0.0);
        const auto corrected = lever_arm_correction(s_left.theta, s_right.theta, p_left,
                                                    p_right, foot_fk, foot_fk, com_fk,
                                                    leg_mass, total_mass);
        const Eigen::Vector2d& theta_stance =
            exp.stance == Foot::Left ? s_left.theta : s_right.theta;
        // Leg odometry anchors the base through the bent stance leg, so the
        // stance delta corrects the CoM once more on top of the mass-weighted
        // correction.
        const Eigen::Vector3d delta_stance = lever_arm_delta(theta_stance, lever);
        const double c_hat_y = corrected.com.y() + delta_stance.y();

        const Eigen::Vector3d& foot_corr =
            exp.stance == Foot::Left ? corrected.foot_left : corrected.foot_right;
        const Eigen::Vector2d p_hat =
            measure_cop(exp.sole_torque[t], exp.sole_force_z[t], foot_corr.head<2>());

        const double err = c_hat_y - p_hat.y();
        sum += err;
        sumsq += err * err;
        count++;
    }
    mean_out = sum / count;
    const double var = std::max(0.0, sumsq / count - mean_out * mean_out);
    sigma_n_out = std::sqrt(var / count);
}

Surface evaluate_surface(const StanceExperiment& exp, const std::vector<double>& grid_left,
                         const std::vector<double>& grid_right, const Eigen::Vector3d& lever,
                         double lpf_cutoff_hz, double leg_mass, double total_mass)
{
    Surface s;
    s.mean.resize(grid_left.size(), grid_right.size());
    s.sigma_n.resize(grid_left.size(), grid_right.size());
    for (size_t i = 0; i < grid_left.size(); i++)
    {
        for (size_t j = 0; j < grid_right.size(); j++)
        {
            evaluate_point(exp, grid_left[i], grid_right[j], lever, lpf_cutoff_hz, leg_mass,
                           total_mass, s.mean(i, j), s.sigma_n(i, j));
        }
    }
    return s;
}

struct Bilinear
{
    double a, b, c, d;  // f(u, v) = a + b u + c v + d u v on the unit cell
    double at(double u, double v) const { return a + b * u + c * v + d * u * v; }
    double du(double v) const { return b + d * v; }
    double dv(double u) const { return c + d * u; }
};

Bilinear cell(const Eigen::MatrixXd& f, int i, int j)
{
    Bilinear q;
    q.a = f(i, j);
    q.b = f(i + 1, j) - f(i, j);
    q.c = f(i, j + 1) - f(i, j);
    q.d = f(i + 1, j + 1) - f(i + 1, j) - f(i, j + 1) + f(i, j);
    return q;
}

struct Intersection
{
    double k_left, k_right;
    double u, v;
    int i, j;
    double det;
};

}  // namespace

Eigen::Vector2d measure_cop(const Eigen::Vector2d& sole_torque, double normal_force,
                            const Eigen::Vector2d& foot_position)
{
    if (!(normal_force > 0.0))
    {
        throw NoContactError("measure_cop: normal force must be positive");
    }
    // S = [[0, -1], [1, 0]] applied to the sole torque.
    return {foot_position.x() - sole_torque.y() / normal_force,
            foot_position.y() + sole_torque.x() / normal_force};
}

StiffnessIdentification identify_stiffness(const StanceExperiment& left_stance,
                                           const StanceExperiment& right_stance,
                                           const StiffnessGrid& grid,
                                           const Eigen::Vector3d& lever,
                                           double lpf_cutoff_hz,
                                           double leg_mass,
                                           double total_mass)
{
    if (grid.left_n < 2 || grid.right_n < 2)
    {
        throw DomainError("identify_stiffness: grid needs at least 2 points per axis");
    }
    StiffnessIdentification out;
    out.grid_left.resize(grid.left_n);
    out.grid_right.resize(grid.right_n);
    for (int i = 0; i < grid.left_n; i++)
    {
        out.grid_left[i] =
            grid.left_min + (grid.left_max - grid.left_min) * i / (grid.left_n - 1);
    }
    for (int j = 0; j < grid.right_n; j++)
    {
        out.grid_right[j] =
            grid.right_min + (grid.right_max - grid.right_min) * j / (grid.right_n - 1);
    }

    const Surface f_left = evaluate_surface(left_stance, out.grid_left, out.grid_right, lever,
                                            lpf_cutoff_hz, leg_mass, total_mass);
    const Surface f_right = evaluate_surface(right_stance, out.grid_left, out.grid_right,
                                             lever, lpf_cutoff_hz, leg_mass, total_mass);
    out.error_left_stance = f_left.mean;
    out.error_right_stance = f_right.mean;

    // Intersect the zero contours of both surfaces, cell by cell.
    std::vector<Intersection> hits;
    for (int i = 0; i + 1 < grid.left_n; i++)
    {
        for (int j = 0; j + 1 < grid.right_n; j++)
        {
            const Bilinear f1 = cell(f_left.mean, i, j);
            const Bilinear f2 = cell(f_right.mean, i, j);
            // Eliminate v: (a2 + b2 u)(c1 + d1 u) = (a1 + b1 u)(c2 + d2 u).
            const double qa = f2.b * f1.d - f1.b * f2.d;
            const double qb = f2.a * f1.d + f2.b * f1.c - f1.a * f2.d - f1.b * f2.c;
            const double qc = f2.a * f1.c - f1.a * f2.c;
            std::vector<double> roots;
            if (std::abs(qa) < 1e-18 * (std::abs(qb) + std::abs(qc)))
            {
                if (qb != 0.0)
                {
                    roots.push_back(-qc / qb);
                }
            }
            else
            {
                const double disc = qb * qb - 4.0 * qa * qc;
                if (disc >= 0.0)
                {
                    const double sq = std::sqrt(disc);
                    roots.push_back((-qb + sq) / (2.0 * qa));
                    roots.push_back((-qb - sq) / (2.0 * qa));
                }
            }
            for (double u : roots)
            {
                if (u < -1e-9 || u > 1.0 + 1e-9)
                {
                    continue;
                }
                double v;
                const double denom1 = f1.c + f1.d * u;
                const double denom2 = f2.c + f2.d * u;
                if (std::abs(denom1) >= std::abs(denom2) && denom1 != 0.0)
                {
                    v = -(f1.a + f1.b * u) / denom1;
                }
                else if (denom2 != 0.0)
                {
                    v = -(f2.a + f2.b * u) / denom2;
                }
                else
                {
                    continue;
                }
                if (v < -1e-9 || v > 1.0 + 1e-9)
                {
                    continue;
                }
                Intersection hit;
                hit.u = std::clamp(u, 0.0, 1.0);
                hit.v = std::clamp(v, 0.0, 1.0);
                hit.i = i;
                hit.j = j;
                hit.k_left = out.grid_left[i] +
                             hit.u * (out.grid_left[i + 1] - out.grid_left[i]);
                hit.k_right = out.grid_right[j] +
                              hit.v * (out.grid_right[j + 1] - out.grid_right[j]);
                hit.det = f1.du(hit.v) * f2.dv(hit.u) - f1.dv(hit.u) * f2.du(hit.v);
                bool duplicate = false;
                for (const auto& h : hits)
                {
                    if (std::abs(h.k_left - hit.k_left) < 1e-6 &&
                        std::abs(h.k_right - hit.k_right) < 1e-6)
                    {
                        duplicate = true;
                        break;
                    }
                }
                if (!duplicate)
                {
                    hits.push_back(hit);
                }
            }
        }
    }

    if (hits.empty())
    {
        // Report the grid point closest to satisfying both conditions.
        double best = std::numeric_limits<double>::max();
        double k_l = out.grid_left.front(), k_r = out.grid_right.front();
        for (int i = 0; i < grid.left_n; i++)
        {
            for (int j = 0; j < grid.right_n; j++)
            {
                const double miss = std::hypot(f_left.mean(i, j), f_right.mean(i, j));
                if (miss < best)
                {
                    best = miss;
                    k_l = out.grid_left[i];
                    k_r = out.grid_right[j];
                }
            }
        }
        throw IdentificationFailedError(
            "identify_stiffness: zero contours do not intersect within the grid "
            "(closest point k_left = " +
                std::to_string(k_l) + ", k_right = " + std::to_string(k_r) + ")",
            k_l, k_r);
    }

    // Best-conditioned intersection wins.
    const Intersection* best = &hits.front();
    for (const auto& h : hits)
    {
        if (std::abs(h.det) > std::abs(best->det))
        {
            best = &h;
        }
    }
    out.k_left = best->k_left;
    out.k_right = best->k_right;

    // Propagate the noise of the surface means through the local Jacobian.
    const double dk_l = out.grid_left[best->i + 1] - out.grid_left[best->i];
    const double dk_r = out.grid_right[best->j + 1] - out.grid_right[best->j];
    const Bilinear f1 = cell(f_left.mean, best->i, best->j);
    const Bilinear f2 = cell(f_right.mean, best->i, best->j);
    Eigen::Matrix2d jac;
    jac << f1.du(best->v) / dk_l, f1.dv(best->u) / dk_r,  //
        f2.du(best->v) / dk_l, f2.dv(best->u) / dk_r;
    const Eigen::Matrix2d jac_inv = jac.inverse();
    const double sig_l = f_left.sigma_n(best->i, best->j);
    const double sig_r = f_right.sigma_n(best->i, best->j);
    out.band_left =
        2.0 * (std::abs(jac_inv(0, 0)) * sig_l + std::abs(jac_inv(0, 1)) * sig_r);
    out.band_right =
        2.0 * (std::abs(jac_inv(1, 0)) * sig_l + std::abs(jac_inv(1, 1)) * sig_r);
    return out;
}

}  // namespace flexwalk
