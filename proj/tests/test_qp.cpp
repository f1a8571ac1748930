#include "flexwalk/qp.hpp"

#include <gtest/gtest.h>

#include <random>

#include "flexwalk/errors.hpp"

namespace fw = flexwalk;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(QpSolver, UnconstrainedMinimum)
{
    MatrixXd H = MatrixXd::Identity(3, 3) * 2.0;
    VectorXd g(3);
    g << -2.0, 4.0, 0.0;
    auto res = fw::solve_qp(H, g, MatrixXd(0, 3), VectorXd(0), MatrixXd(0, 3), VectorXd(0));
    EXPECT_NEAR(res.x(0), 1.0, 1e-12);
    EXPECT_NEAR(res.x(1), -2.0, 1e-12);
    EXPECT_NEAR(res.x(2), 0.0, 1e-12);
    EXPECT_LT(res.kkt_residual(), 1e-10);
}

TEST(QpSolver, EqualityOnly)
{
    // min 0.5 ||x||^2 s.t. x0 + x1 = 2 -> x = (1, 1)
    MatrixXd H = MatrixXd::Identity(2, 2);
    VectorXd g = VectorXd::Zero(2);
    MatrixXd Aeq(1, 2);
    Aeq << 1.0, 1.0;
    VectorXd beq(1);
    beq << 2.0;
    auto res = fw::solve_qp(H, g, Aeq, beq, MatrixXd(0, 2), VectorXd(0));
    EXPECT_NEAR(res.x(0), 1.0, 1e-12);
    EXPECT_NEAR(res.x(1), 1.0, 1e-12);
    EXPECT_LT(res.kkt_residual(), 1e-10);
}

TEST(QpSolver, ActiveInequality)
{
    // min 0.5 (x-3)^2 s.t. x <= 1 -> x = 1, dual = 2
    MatrixXd H(1, 1);
    H << 1.0;
    VectorXd g(1);
    g << -3.0;
    MatrixXd Ain(1, 1);
    Ain << 1.0;
    VectorXd bin(1);
    bin << 1.0;
    auto res = fw::solve_qp(H, g, MatrixXd(0, 1), VectorXd(0), Ain, bin);
    EXPECT_NEAR(res.x(0), 1.0, 1e-12);
    EXPECT_NEAR(res.ineq_duals(0), 2.0, 1e-12);
    EXPECT_LT(res.kkt_residual(), 1e-10);
}

// Reference problem with a known solution, used as an external oracle.
TEST(QpSolver, ReferenceProblemSixVariables)
{
    const int n = 6;
    MatrixXd H = MatrixXd::Identity(n, n);
    VectorXd g(n);
    g << 1., 2., 3., 4., 5., 6.;

    MatrixXd Aeq(3, n);
    Aeq << 1., -1., 1., 0., 3., 1.,  //
        -1., 0., -3., -4., 5., 6.,   //
        2., 5., 3., 0., 1., 0.;
    VectorXd beq(3);
    beq << 1., 2., 3.;

    MatrixXd Aineq(2, n);
    Aineq << 0., 1., 0., 1., 2., -1.,  //
        -1., 0., 2., 1., 1., 0.;
    VectorXd bineq(2);
    bineq << -1., 2.5;

    VectorXd lower(n), upper(n);
    lower << -1000., -10000., 0., -1000., -1000., -1000.;
    upper << 10000., 100., 1.5, 100., 100., 1000.;

    // Stack the general rows and the box bounds as inequalities.
    MatrixXd Ain(2 + 2 * n, n);
    VectorXd bin(2 + 2 * n);
    Ain.topRows(2) = Aineq;
    bin.head(2) = bineq;
    Ain.middleRows(2, n) = MatrixXd::Identity(n, n);
    bin.segment(2, n) = upper;
    Ain.bottomRows(n) = -MatrixXd::Identity(n, n);
    bin.tail(n) = -lower;

    auto res = fw::solve_qp(H, g, Aeq, beq, Ain, bin);

    VectorXd expected(n);
    expected << 1.7975426, -0.3381487, 0.1633880, -4.9884023, 0.6054943, -3.1155623;
    for (int i = 0; i < n; i++)
    {
        EXPECT_NEAR(res.x(i), expected(i), 1e-6) << "component " << i;
    }
    EXPECT_LT(res.kkt_residual(), 1e-8);
}

TEST(QpSolver, InfeasibleThrows)
{
    MatrixXd H = MatrixXd::Identity(1, 1);
    VectorXd g = VectorXd::Zero(1);
    MatrixXd Ain(2, 1);
    Ain << 1.0, -1.0;
    VectorXd bin(2);
    bin << -1.0, -1.0;  // x <= -1 and x >= 1
    EXPECT_THROW(fw::solve_qp(H, g, MatrixXd(0, 1), VectorXd(0), Ain, bin), fw::QpError);
}

TEST(QpSolver, NotPositiveDefiniteThrows)
{
    MatrixXd H(2, 2);
    H << 1.0, 0.0, 0.0, -1.0;
    VectorXd g = VectorXd::Zero(2);
    EXPECT_THROW(fw::solve_qp(H, g, MatrixXd(0, 2), VectorXd(0), MatrixXd(0, 2), VectorXd(0)),
                 fw::QpError);
}

// Randomized property check against a projected-gradient oracle: KKT residuals
// must be tiny and the objective no worse than feasible reference points.
TEST(QpSolver, RandomProblemsSatisfyKkt)
{
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 100; trial++)
    {
        const int n = 4 + trial % 5;
        MatrixXd M(n, n);
        for (int i = 0; i < n; i++)
            for (int j = 0; j < n; j++)
            {
                M(i, j) = dist(rng);
            }
        MatrixXd H = M * M.transpose() + 0.5 * MatrixXd::Identity(n, n);
        VectorXd g(n);
        for (int i = 0; i < n; i++)
        {
            g(i) = dist(rng);
        }
        // Box plus a couple of random halfspaces through a known feasible point.
        VectorXd x_feas(n);
        for (int i = 0; i < n; i++)
        {
            x_feas(i) = 0.3 * dist(rng);
        }
        const int m = 2 * n + 2;
        MatrixXd Ain(m, n);
        VectorXd bin(m);
        Ain.topRows(n) = MatrixXd::Identity(n, n);
        Ain.middleRows(n, n) = -MatrixXd::Identity(n, n);
        for (int i = 0; i < n; i++)
        {
            bin(i) = 1.0;
            bin(n + i) = 1.0;
        }
        for (int k = 0; k < 2; k++)
        {
            for (int i = 0; i < n; i++)
            {
                Ain(2 * n + k, i) = dist(rng);
            }
            bin(2 * n + k) = Ain.row(2 * n + k).dot(x_feas) + 0.1;
        }

        auto res = fw::solve_qp(H, g, MatrixXd(0, n), VectorXd(0), Ain, bin);
        EXPECT_LT(res.kkt_residual(), 1e-8) << "trial " << trial;
        EXPECT_GE(res.ineq_duals.minCoeff(), -1e-12);
        // Optimality vs. the known feasible point.
        const double f_feas = 0.5 * x_feas.dot(H * x_feas) + g.dot(x_feas);
        const double f_sol = 0.5 * res.x.dot(H * res.x) + g.dot(res.x);
        EXPECT_LE(f_sol, f_feas + 1e-9);
    }
}
