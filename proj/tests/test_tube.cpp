#include "flexwalk/tube.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "flexwalk/errors.hpp"

namespace fw = flexwalk;

namespace
{
fw::SystemMatrices stab_sys()
{
    return fw::SystemMatrices::make(0.002, 11.276);
}

// Exact truncated series for a nilpotent closed loop.
double nilpotent_three_term_sum(const Eigen::RowVector3d& c_row, const Eigen::RowVector3d& K,
                                const fw::SystemMatrices& sys, double d_max)
{
    const Eigen::Matrix3d a_k = sys.A + sys.B * K;
    return d_max * (std::abs(c_row * sys.B) + std::abs(c_row * (a_k * sys.B)) +
                    std::abs(c_row * (a_k * a_k * sys.B)));
}
}  // namespace

TEST(PlacePoles, DeadbeatIsNilpotent)
{
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::deadbeat_gain(sys);
    const Eigen::Matrix3d a_k = sys.A + sys.B * K;
    // A numerically nilpotent matrix has eigenvalues of order eps^(1/3).
    EXPECT_LT(fw::spectral_radius(a_k), 1e-2);
    EXPECT_LT((a_k * a_k * a_k).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(PlacePoles, RealPolesLand)
{
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::place_poles(sys, {0.5, 0.6, 0.7});
    const Eigen::Vector3cd eigs = (sys.A + sys.B * K).eigenvalues();
    std::vector<double> mags;
    for (int i = 0; i < 3; i++)
    {
        EXPECT_NEAR(eigs(i).imag(), 0.0, 1e-6);
        mags.push_back(eigs(i).real());
    }
    std::sort(mags.begin(), mags.end());
    EXPECT_NEAR(mags[0], 0.5, 1e-6);
    EXPECT_NEAR(mags[1], 0.6, 1e-6);
    EXPECT_NEAR(mags[2], 0.7, 1e-6);
}

TEST(MrpiBound, DeadbeatMatchesExactSum)
{
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::deadbeat_gain(sys);
    const fw::DisturbanceBound d{1000.0};
    const double bound = fw::mrpi_vrp_bound(K, sys, d, 1e-12);
    const double exact = nilpotent_three_term_sum(sys.V, K, sys, d.d_max);
    EXPECT_NEAR(bound, exact, 1e-12 * exact);
}

TEST(MrpiBound, UnstableClosedLoopThrows)
{
    auto sys = stab_sys();
    EXPECT_THROW(fw::mrpi_vrp_bound(Eigen::RowVector3d::Zero(), sys, {1.0}, 1e-9),
                 fw::InstabilityError);
}

TEST(MrpiBound, LinearInDisturbance)
{
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::place_poles(sys, {0.5, 0.6, 0.7});
    const double tol = 1e-13;
    const double v1 = fw::mrpi_vrp_bound(K, sys, {1.0}, tol);
    const double v_lambda = fw::mrpi_vrp_bound(K, sys, {137.5}, 137.5 * tol);
    EXPECT_NEAR(v_lambda, 137.5 * v1, 1e-12 * v_lambda);
}

TEST(MrpiBound, PaperMarginRatioStructure)
{
    // 5370 / 3222 and 2.5 / 1.5 are both exactly 5/3; linearity in d_max must
    // reproduce the ratio exactly.
    EXPECT_EQ(5370 * 3, 3222 * 5);
    EXPECT_EQ(2.5 * 3.0, 1.5 * 5.0);
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::place_poles(sys, {0.5, 0.6, 0.7});
    const double vx = fw::mrpi_vrp_bound(K, sys, {5370.0}, 1e-10);
    const double vy = fw::mrpi_vrp_bound(K, sys, {3222.0}, 0.6e-10);
    EXPECT_NEAR(vx / vy, 5.0 / 3.0, 1e-12 * (5.0 / 3.0));
}

TEST(MrpiBound, RolloutOracle)
{
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::place_poles(sys, {0.5, 0.6, 0.7});
    const fw::DisturbanceBound d{1000.0};
    const double bound = fw::mrpi_vrp_bound(K, sys, d, 1e-9);
    const Eigen::Matrix3d a_k = sys.A + sys.B * K;

    const int horizon = 500;
    // Extremal sequence: sign-matched to the impulse response coefficients.
    std::vector<double> coeff(horizon);
    {
        Eigen::RowVector3d w = sys.V;
        for (int i = 0; i < horizon; i++)
        {
            coeff[i] = w * sys.B;
            w = w * a_k;
        }
    }
    double brute_max = 0.0;
    {
        Eigen::Vector3d x = Eigen::Vector3d::Zero();
        for (int j = 0; j < horizon; j++)
        {
            const double e = d.d_max * (coeff[horizon - 1 - j] >= 0.0 ? 1.0 : -1.0);
            x = a_k * x + sys.B * e;
            brute_max = std::max(brute_max, std::abs(sys.V * x));
        }
    }
    // Random bang-bang sequences.
    std::mt19937 rng(123);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 2000; trial++)
    {
        Eigen::Vector3d x = Eigen::Vector3d::Zero();
        for (int j = 0; j < horizon; j++)
        {
            const double e = coin(rng) ? d.d_max : -d.d_max;
            x = a_k * x + sys.B * e;
            brute_max = std::max(brute_max, std::abs(sys.V * x));
        }
    }
    EXPECT_LE(brute_max, bound * (1.0 + 1e-12));
    EXPECT_GE(brute_max, 0.99 * bound);
}

TEST(MrpiStateBox, DeadbeatExactAndZeroDisturbance)
{
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::deadbeat_gain(sys);
    const Eigen::Vector3d box = fw::mrpi_state_box(K, sys, {1000.0}, 1e-12);
    for (int i = 0; i < 3; i++)
    {
        Eigen::RowVector3d sel = Eigen::RowVector3d::Zero();
        sel(i) = 1.0;
        EXPECT_NEAR(box(i), nilpotent_three_term_sum(sel, K, sys, 1000.0),
                    1e-12 * std::max(1.0, box(i)));
    }
    const Eigen::Vector3d zero_box = fw::mrpi_state_box(K, sys, {0.0}, 1e-12);
    EXPECT_EQ(zero_box, Eigen::Vector3d::Zero());
}

TEST(MrpiStateBox, ContainsRolloutCloud)
{
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::place_poles(sys, {0.3, 0.5, 0.8});
    const fw::DisturbanceBound d{500.0};
    const Eigen::Vector3d box = fw::mrpi_state_box(K, sys, d, 1e-9);
    const Eigen::Matrix3d a_k = sys.A + sys.B * K;
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> dist(-d.d_max, d.d_max);
    for (int trial = 0; trial < 1000; trial++)
    {
        Eigen::Vector3d x = Eigen::Vector3d::Zero();
        for (int j = 0; j < 400; j++)
        {
            x = a_k * x + sys.B * dist(rng);
            for (int c = 0; c < 3; c++)
            {
                ASSERT_LE(std::abs(x(c)), box(c) + 1e-9);
            }
        }
    }
}

TEST(MrpiBound, TubeGainInvariants)
{
    auto sys = stab_sys();
    const fw::DisturbanceBound d{125.0};
    const fw::TubeGain gain = fw::certify_gain(fw::place_poles(sys, {0.5, 0.6, 0.7}), sys, d, 1e-9);
    EXPECT_LT(gain.spectral_radius, 1.0);
    EXPECT_GE(gain.v_tilde_max, std::abs(sys.vb()) * d.d_max);
    for (int i = 0; i < 3; i++)
    {
        EXPECT_GE(gain.omega_box(i), std::abs(sys.B(i)) * d.d_max);
    }
}

TEST(OptimizeGain, BeatsDeadbeatAndSeedDeterministically)
{
    auto sys = stab_sys();
    const fw::DisturbanceBound d{1000.0};
    const double tail_tol = 1e-9;
    const fw::TubeGain opt = fw::optimize_gain(sys, d, std::nullopt, tail_tol);
    EXPECT_LT(opt.spectral_radius, 1.0);

    const double v_deadbeat = fw::mrpi_vrp_bound(fw::deadbeat_gain(sys), sys, d, tail_tol);
    EXPECT_LE(opt.v_tilde_max, v_deadbeat * (1.0 + 1e-9) + 2.0 * tail_tol);

    const Eigen::RowVector3d seed = fw::place_poles(sys, {0.5, 0.6, 0.7});
    const fw::TubeGain opt_seeded = fw::optimize_gain(sys, d, seed, tail_tol);
    const double v_seed = fw::mrpi_vrp_bound(seed, sys, d, tail_tol);
    EXPECT_LE(opt_seeded.v_tilde_max, v_seed * (1.0 + 1e-9) + 2.0 * tail_tol);

    const fw::TubeGain repeat = fw::optimize_gain(sys, d, seed, tail_tol);
    EXPECT_EQ(opt_seeded.K, repeat.K);
    EXPECT_EQ(opt_seeded.v_tilde_max, repeat.v_tilde_max);
}

TEST(SaturationLimits, SymmetricCase)
{
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::place_poles(sys, {0.5, 0.6, 0.7});
    const auto limits = fw::saturation_limits(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(),
                                              0.0, -0.11, 0.11, -100.0, 100.0, K, sys);
    EXPECT_NEAR(limits.lower, -limits.upper, 1e-9);
    EXPECT_LT(limits.lower, 0.0);
}

TEST(SaturationLimits, ZeroWidthSupportWithZeroBounds)
{
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::place_poles(sys, {0.5, 0.6, 0.7});
    const auto limits = fw::saturation_limits(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(),
                                              0.0, 0.04, 0.04, 0.0, 0.0, K, sys);
    EXPECT_NEAR(limits.lower, limits.upper, 1e-12);
}

TEST(SaturationLimits, NumericSpotCase)
{
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::place_poles(sys, {0.5, 0.6, 0.7});
    const Eigen::Vector3d x_tilde(0.01, 0.0, 0.0);
    const Eigen::Vector3d x_ref_next = Eigen::Vector3d::Zero();
    const double e_lo = -100.0, e_hi = 100.0;
    const auto limits =
        fw::saturation_limits(x_tilde, x_ref_next, 0.0, -0.11, 0.11, e_lo, e_hi, K, sys);

    // Independent evaluation of the limit formulas.
    const double vb = 0.002 * 0.002 * 0.002 / 6.0 - 0.002 / 11.276;
    const double phi = 0.01;  // V A x_tilde for this state; V x_ref_next = 0
    const double q_min = (-0.11 - phi) / vb;
    const double q_max = (0.11 - phi) / vb;
    EXPECT_NEAR(limits.lower, std::min(q_min, q_max) - e_lo, 1e-9);
    EXPECT_NEAR(limits.upper, std::max(q_min, q_max) - e_hi, 1e-9);
    EXPECT_LT(limits.lower, limits.upper);
}

TEST(SaturationLimits, SupportTooSmallThrows)
{
    // The disturbance bound moves the VRP by |VB| * 5370 ~ 0.95 m per tick,
    // far beyond a 0.22 m support: no admissible command exists.
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::place_poles(sys, {0.5, 0.6, 0.7});
    EXPECT_THROW(fw::saturation_limits(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), 0.0,
                                       -0.11, 0.11, -5370.0, 5370.0, K, sys),
                 fw::InfeasibleSaturationError);
}

TEST(SaturationLimits, GuaranteesNextVrpInSupport)
{
    // For any admissible command and any disturbance inside its bounds, the
    // successor VRP must stay inside [p_min, p_max].
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::place_poles(sys, {0.5, 0.6, 0.7});
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int trial = 0; trial < 500; trial++)
    {
        const Eigen::Vector3d x_tilde(0.002 * unit(rng), 0.01 * unit(rng), 0.2 * unit(rng));
        const Eigen::Vector3d x_ref_next(0.01 * unit(rng), 0.05 * unit(rng), 0.3 * unit(rng));
        const double n_next = 0.002 * unit(rng);
        const double p_c = 0.02 * unit(rng);
        const double p_min = p_c - 0.11, p_max = p_c + 0.11;
        const double e_bound = 50.0 + 50.0 * std::abs(unit(rng));
        fw::SaturationLimits limits;
        try
        {
            limits = fw::saturation_limits(x_tilde, x_ref_next, n_next, p_min, p_max, -e_bound,
                                           e_bound, K, sys);
        }
        catch (const fw::InfeasibleSaturationError&)
        {
            continue;
        }
        for (double sat : {limits.lower, limits.upper, 0.5 * (limits.lower + limits.upper)})
        {
            for (double e : {-e_bound, e_bound, 0.0})
            {
                const Eigen::Vector3d x_tilde_next =
                    sys.A * x_tilde + sys.B * (sat + e);
                const double vrp_next = sys.V * (x_tilde_next + x_ref_next) + n_next;
                EXPECT_LE(vrp_next, p_max + 1e-9);
                EXPECT_GE(vrp_next, p_min - 1e-9);
            }
        }
    }
}

TEST(StabilizeStep, ZeroErrorPassesReferenceThrough)
{
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::place_poles(sys, {0.5, 0.6, 0.7});
    const fw::CentroidalState x_ref{0.05, 0.2, -0.1};
    const auto out = fw::stabilize_step(x_ref, x_ref, 3.0, K, {-10.0, 10.0}, sys);
    EXPECT_DOUBLE_EQ(out.jerk, 3.0);
    EXPECT_FALSE(out.saturated);
    const auto expected = fw::step_dynamics(x_ref, 3.0, sys);
    EXPECT_DOUBLE_EQ(out.x_hat_next.pos, expected.pos);
}

TEST(StabilizeStep, ClampsAtUpperLimit)
{
    auto sys = stab_sys();
    const Eigen::RowVector3d K = fw::place_poles(sys, {0.5, 0.6, 0.7});
    const fw::CentroidalState x_hat{0.1, 0.0, 0.0};
    const fw::CentroidalState x_ref{0.0, 0.0, 0.0};
    const double raw = K * (x_hat.vec() - x_ref.vec());
    fw::SaturationLimits limits{-std::abs(raw) * 2.0, std::abs(raw) * 0.5};
    if (raw < 0)
    {
        limits = {raw * 0.5, -raw * 2.0};
        const auto out = fw::stabilize_step(x_hat, x_ref, 1.0, K, limits, sys);
        EXPECT_DOUBLE_EQ(out.jerk, 1.0 + limits.lower);
        EXPECT_TRUE(out.saturated);
    }
    else
    {
        const auto out = fw::stabilize_step(x_hat, x_ref, 1.0, K, limits, sys);
        EXPECT_DOUBLE_EQ(out.jerk, 1.0 + limits.upper);
        EXPECT_TRUE(out.saturated);
    }
}

TEST(StabilizeStep, DisturbedRolloutStaysInsideVrpBound)
{
    auto sys = stab_sys();
    const fw::DisturbanceBound d{125.0};
    const fw::TubeGain gain = fw::certify_gain(fw::place_poles(sys, {0.5, 0.6, 0.7}), sys, d, 1e-9);
    const Eigen::Matrix3d a_k = sys.A + sys.B * gain.K;
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> dist(-d.d_max, d.d_max);
    Eigen::Vector3d x_tilde = Eigen::Vector3d::Zero();
    for (int j = 0; j < 20000; j++)
    {
        x_tilde = a_k * x_tilde + sys.B * dist(rng);
        ASSERT_LE(std::abs(sys.V * x_tilde), gain.v_tilde_max + 1e-9);
    }
}

TEST(RpiContainment, SuccessorsOfReachableStatesStayBounded)
{
    // States sampled from disturbed rollouts lie in the invariant set; with an
    // extremal disturbance their successors must still satisfy the VRP bound.
    auto sys = stab_sys();
    const fw::DisturbanceBound d{125.0};
    const double tail_tol = 1e-9;
    const fw::TubeGain gain =
        fw::certify_gain(fw::place_poles(sys, {0.4, 0.6, 0.75}), sys, d, tail_tol);
    const Eigen::Matrix3d a_k = sys.A + sys.B * gain.K;
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> dist(-d.d_max, d.d_max);
    Eigen::Vector3d x_tilde = Eigen::Vector3d::Zero();
    int checked = 0;
    for (int j = 0; j < 10000; j++)
    {
        x_tilde = a_k * x_tilde + sys.B * dist(rng);
        for (double e : {-d.d_max, d.d_max})
        {
            const Eigen::Vector3d successor = a_k * x_tilde + sys.B * e;
            ASSERT_LE(std::abs(sys.V * successor), gain.v_tilde_max + tail_tol + 1e-12);
            for (int c = 0; c < 3; c++)
            {
                ASSERT_LE(std::abs(successor(c)), gain.omega_box(c) + tail_tol + 1e-12);
            }
            checked++;
        }
    }
    EXPECT_EQ(checked, 20000);
}
