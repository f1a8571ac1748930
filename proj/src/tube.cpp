#include "flexwalk/tube.hpp"

#include <algorithm>
#include <cmath>

#include "flexwalk/errors.hpp"

namespace flexwalk
{
namespace
{
double operator_norm(const Eigen::Matrix3d& m)
{
    return Eigen::JacobiSVD<Eigen::Matrix3d>(m).singularValues()(0);
}

/// Contraction estimate: the smallest power-of-two q with ||(A+BK)^q|| < 0.5,
/// together with S = sum-of-norms cover of all powers below q and the norm at
/// q. Gives the geometric tail factor
///   sum_{j>=0} ||A_K^j|| <= S / (1 - ||A_K^q||).
struct TailFactor
{
    double factor{0.0};  // sum_{j>=0} ||A_K^j|| upper bound
};

TailFactor contraction_tail_factor(const Eigen::Matrix3d& a_k)
{
    constexpr int kMaxDoublings = 21;  // powers up to 2^21 > 1e6 terms
    double norm1 = operator_norm(a_k);
    if (norm1 < 0.5)
    {
        return {1.0 / (1.0 - norm1)};
    }
    // S covers powers a < q; every a < 2q splits as a = b + c*q with b < q,
    // c in {0,1}, so the cover update is S <- S (1 + ||A_K^q||).
    double cover = 1.0 + norm1;
    Eigen::Matrix3d power = a_k * a_k;
    for (int k = 1; k < kMaxDoublings; k++)
    {
        const double norm_q = operator_norm(power);
        if (norm_q < 0.5)
        {
            return {cover / (1.0 - norm_q)};
        }
        cover *= 1.0 + norm_q;
        power = power * power;
    }
    throw ConvergenceError(
        "mrpi bound: no contracting power of A+BK found within 2^21 steps");
}

}  // namespace

double spectral_radius(const Eigen::Matrix3d& m)
{
    return m.eigenvalues().cwiseAbs().maxCoeff();
}

double mrpi_support_bound(const Eigen::RowVector3d& c_row,
                          const Eigen::RowVector3d& K,
                          const SystemMatrices& sys,
                          const DisturbanceBound& d,
                          double tail_tol)
{
    if (d.d_max < 0.0)
    {
        throw DomainError("mrpi bound: d_max must be nonnegative");
    }
    const Eigen::Matrix3d a_k = sys.A + sys.B * K;
    const double rho = spectral_radius(a_k);
    if (!(rho < 1.0))
    {
        throw InstabilityError("mrpi bound: A+BK is not strictly stable");
    }
    if (d.d_max == 0.0)
    {
        return 0.0;
    }

    const TailFactor tail = contraction_tail_factor(a_k);
    const double b_norm = sys.B.norm();

    constexpr long kMaxTerms = 1000000;
    Eigen::RowVector3d w = c_row;
    double sum = 0.0;
    for (long i = 0; i < kMaxTerms; i++)
    {
        const double tail_bound = d.d_max * w.norm() * b_norm * tail.factor;
        if (tail_bound <= tail_tol)
        {
            return d.d_max * sum + tail_bound;
        }
        sum += std::abs(w * sys.B);
        w = w * a_k;
    }
    throw ConvergenceError("mrpi bound: series tail failed to contract within 10^6 terms");
}

double mrpi_vrp_bound(const Eigen::RowVector3d& K,
                      const SystemMatrices& sys,
                      const DisturbanceBound& d,
                      double tail_tol)
{
    return mrpi_support_bound(sys.V, K, sys, d, tail_tol);
}

Eigen::Vector3d mrpi_state_box(const Eigen::RowVector3d& K,
                               const SystemMatrices& sys,
                               const DisturbanceBound& d,
                               double tail_tol)
{
    Eigen::Vector3d box;
    for (int i = 0; i < 3; i++)
    {
        Eigen::RowVector3d selector = Eigen::RowVector3d::Zero();
        selector(i) = 1.0;
        box(i) = mrpi_support_bound(selector, K, sys, d, tail_tol);
    }
    return box;
}

TubeGain certify_gain(const Eigen::RowVector3d& K,
                      const SystemMatrices& sys,
                      const DisturbanceBound& d,
                      double tail_tol)
{
    TubeGain gain;
    gain.K = K;
    gain.spectral_radius = spectral_radius(sys.A + sys.B * K);
    gain.v_tilde_max = mrpi_vrp_bound(K, sys, d, tail_tol);
    gain.omega_box = mrpi_state_box(K, sys, d, tail_tol);
    return gain;
}

Eigen::RowVector3d place_poles(const SystemMatrices& sys, const Eigen::Vector3d& poles)
{
    // Ackermann: K_std = [0 0 1] Mc^{-1} phi(A) for the u = -Kx convention.
    Eigen::Matrix3d controllability;
    controllability.col(0) = sys.B;
    controllability.col(1) = sys.A * sys.B;
    controllability.col(2) = sys.A * sys.A * sys.B;

    const Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d phi =
        (sys.A - poles(0) * eye) * (sys.A - poles(1) * eye) * (sys.A - poles(2) * eye);

    const Eigen::RowVector3d last_row = Eigen::RowVector3d(0.0, 0.0, 1.0) *
                                        controllability.fullPivLu().inverse();
    return -(last_row * phi);
}

Eigen::RowVector3d deadbeat_gain(const SystemMatrices& sys)
{
    return place_poles(sys, Eigen::Vector3d::Zero());
}

TubeGain optimize_gain(const SystemMatrices& sys,
                       const DisturbanceBound& d,
                       std::optional<Eigen::RowVector3d> seed_K,
                       double tail_tol,
                       const NelderMeadOptions& nm)
{
    Eigen::RowVector3d seed;
    bool have_seed = false;
    if (seed_K && spectral_radius(sys.A + sys.B * (*seed_K)) < 1.0 - 1e-6)
    {
        seed = *seed_K;
        have_seed = true;
    }
    if (!have_seed)
    {
        const Eigen::RowVector3d db = deadbeat_gain(sys);
        if (!(spectral_radius(sys.A + sys.B * db) < 1.0 - 1e-6))
        {
            throw InitializationError("optimize_gain: no stabilizing seed found");
        }
        seed = db;
    }

    // Normalize the search to d_max = 1; the bound is linear in d_max.
    const DisturbanceBound unit{1.0};
    const double unit_tol = tail_tol / std::max(d.d_max, 1.0);
    auto objective = [&](const Eigen::VectorXd& k_vec) -> double {
        const Eigen::RowVector3d K = k_vec.transpose();
        const double rho = spectral_radius(sys.A + sys.B * K);
        if (!(rho < 1.0 - 1e-6))
        {
            return 1e9 * (1.0 + rho);
        }
        try
        {
            return mrpi_vrp_bound(K, sys, unit, unit_tol);
        }
        catch (const ConvergenceError&)
        {
            return 1e9 * (1.0 + rho);
        }
    };

    const NelderMeadResult best = nelder_mead(objective, seed.transpose(), nm);
    return certify_gain(best.x.transpose(), sys, d, tail_tol);
}

SaturationLimits saturation_limits(const Eigen::Vector3d& x_tilde_hat,
                                   const Eigen::Vector3d& x_ref_next,
                                   double n_next,
                                   double p_min,
                                   double p_max,
                                   double e_u_min,
                                   double e_u_max,
                                   const Eigen::RowVector3d& K,
                                   const SystemMatrices& sys)
{
    (void)K;
    const double vb = sys.vb();
    const double phi = sys.V * (sys.A * x_tilde_hat + x_ref_next);
    const double q_min = (p_min - n_next - phi) / vb;
    const double q_max = (p_max - n_next - phi) / vb;
    SaturationLimits limits;
    limits.lower = std::min(q_min, q_max) - e_u_min;
    limits.upper = std::max(q_min, q_max) - e_u_max;
    if (limits.lower > limits.upper)
    {
        throw InfeasibleSaturationError(
            "saturation_limits: support too small for the current tracking error");
    }
    return limits;
}

StabilizeResult stabilize_step(const CentroidalState& x_hat,
                               const CentroidalState& x_ref,
                               double u_ref,
                               const Eigen::RowVector3d& K,
                               const SaturationLimits& limits,
                               const SystemMatrices& sys)
{
    if (!(limits.lower <= limits.upper))
    {
        throw DomainError("stabilize_step: saturation limits must be ordered");
    }
    StabilizeResult out;
    out.feedback_raw = K * (x_hat.vec() - x_ref.vec());
    const double sat = std::clamp(out.feedback_raw, limits.lower, limits.upper);
    out.saturated = sat != out.feedback_raw;
    out.jerk = u_ref + sat;
    out.x_hat_next = step_dynamics(x_hat, out.jerk, sys);
    return out;
}

}  // namespace flexwalk
