#include "flexwalk/centroidal.hpp"

#include <gtest/gtest.h>

#include <random>

#include "flexwalk/errors.hpp"

namespace fw = flexwalk;

TEST(OmegaFromHeight, DirectFormula)
{
    EXPECT_DOUBLE_EQ(fw::omega_from_height(1.0, 9.81), 9.81);
    EXPECT_NEAR(fw::omega_from_height(0.87, 9.81), 11.276, 1e-3);
    EXPECT_THROW(fw::omega_from_height(0.0, 9.81), fw::DomainError);
    EXPECT_THROW(fw::omega_from_height(0.87, -1.0), fw::DomainError);
}

TEST(StepDynamics, UnitJerkFromRest)
{
    auto sys = fw::SystemMatrices::make(0.1, 11.276);
    auto x = fw::step_dynamics({0, 0, 0}, 1.0, sys);
    EXPECT_NEAR(x.pos, 1.6667e-4, 1e-8);
    EXPECT_NEAR(x.vel, 5e-3, 1e-12);
    EXPECT_NEAR(x.acc, 0.1, 1e-12);
}

TEST(StepDynamics, CoastingPreservesVelocity)
{
    auto sys = fw::SystemMatrices::make(0.5, 11.276);
    auto x = fw::step_dynamics({1, 2, 0}, 0.0, sys);
    EXPECT_DOUBLE_EQ(x.pos, 2.0);
    EXPECT_DOUBLE_EQ(x.vel, 2.0);
    EXPECT_DOUBLE_EQ(x.acc, 0.0);
}

// Oracle: closed-form constant-jerk motion integrated symbolically.
static fw::CentroidalState constant_jerk_oracle(const fw::CentroidalState& x0, double u, double t)
{
    fw::CentroidalState out;
    out.pos = x0.pos + x0.vel * t + 0.5 * x0.acc * t * t + u * t * t * t / 6.0;
    out.vel = x0.vel + x0.acc * t + 0.5 * u * t * t;
    out.acc = x0.acc + u * t;
    return out;
}

TEST(StepDynamics, MatchesConstantJerkOracle)
{
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::uniform_real_distribution<double> tdist(0.001, 0.5);
    for (int trial = 0; trial < 200; trial++)
    {
        const double T = tdist(rng);
        auto sys = fw::SystemMatrices::make(T, 11.276);
        fw::CentroidalState x0{dist(rng), dist(rng), dist(rng)};
        const double u = 10.0 * dist(rng);
        auto stepped = fw::step_dynamics(x0, u, sys);
        auto oracle = constant_jerk_oracle(x0, u, T);
        EXPECT_NEAR(stepped.pos, oracle.pos, 1e-12 * std::max(1.0, std::abs(oracle.pos)));
        EXPECT_NEAR(stepped.vel, oracle.vel, 1e-12 * std::max(1.0, std::abs(oracle.vel)));
        EXPECT_NEAR(stepped.acc, oracle.acc, 1e-12 * std::max(1.0, std::abs(oracle.acc)));
    }
}

TEST(StepDynamics, ComposedStepsEqualSingleClosedForm)
{
    const double T = 0.02;
    auto sys = fw::SystemMatrices::make(T, 11.276);
    const double u = 0.7;
    fw::CentroidalState x{0.3, -0.1, 0.05};
    const int k = 25;
    fw::CentroidalState stepped = x;
    for (int i = 0; i < k; i++)
    {
        stepped = fw::step_dynamics(stepped, u, sys);
    }
    auto oracle = constant_jerk_oracle(x, u, k * T);
    EXPECT_NEAR(stepped.pos, oracle.pos, 1e-12 * std::max(1.0, std::abs(oracle.pos)));
    EXPECT_NEAR(stepped.vel, oracle.vel, 1e-12 * std::max(1.0, std::abs(oracle.vel)));
    EXPECT_NEAR(stepped.acc, oracle.acc, 1e-12 * std::max(1.0, std::abs(oracle.acc)));
}

TEST(Vrp, Output)
{
    auto sys = fw::SystemMatrices::make(0.1, 10.0);
    EXPECT_DOUBLE_EQ(fw::vrp({1, 0, 0}, sys), 1.0);
    EXPECT_DOUBLE_EQ(fw::vrp({1, 0, 5}, sys), 0.5);
    EXPECT_DOUBLE_EQ(fw::vrp({0, 3, 0}, fw::SystemMatrices::make(0.1, 4.0)), 0.0);
}

TEST(Vrp, SuperpositionAcrossStep)
{
    // vrp(step(x, u)) - vrp(x) must be linear in (x, u).
    auto sys = fw::SystemMatrices::make(0.05, 11.276);
    auto delta = [&](const fw::CentroidalState& x, double u) {
        return fw::vrp(fw::step_dynamics(x, u, sys), sys) - fw::vrp(x, sys);
    };
    fw::CentroidalState xa{0.2, -0.4, 1.0};
    fw::CentroidalState xb{-1.0, 0.3, -2.0};
    const double ua = 3.0, ub = -7.0;
    fw::CentroidalState xsum{xa.pos + xb.pos, xa.vel + xb.vel, xa.acc + xb.acc};
    EXPECT_NEAR(delta(xsum, ua + ub), delta(xa, ua) + delta(xb, ub), 1e-12);
}

TEST(Dcm, Values)
{
    EXPECT_DOUBLE_EQ(fw::dcm({1, 0, 0}, 2.0), 1.0);
    EXPECT_DOUBLE_EQ(fw::dcm({1, 2, 0}, 2.0), 2.0);
    const double omega = 3.0, c = 0.3;
    EXPECT_DOUBLE_EQ(fw::dcm({c, -omega * c, 0}, omega), 0.0);
    EXPECT_THROW(fw::dcm({1, 1, 0}, 0.0), fw::DomainError);
}

TEST(BiasTerm, StaticStanceVanishes)
{
    auto sys = fw::SystemMatrices::make(0.002, 11.276);
    fw::CentroidalInputs in;
    in.mass = 90.0;
    in.contacts.push_back({{0.1, 0.0, 0.0}, {0.0, 0.0, 882.9}});
    auto n = fw::bias_term({0.0, 0.0}, 0.87, 0.0, in, sys);
    EXPECT_NEAR(n.x(), 0.0, 1e-15);
    EXPECT_NEAR(n.y(), 0.0, 1e-15);
}

TEST(BiasTerm, MatchedOmegaCancelsAccelTerms)
{
    // With omega^2 = g/c_z and coplanar contacts at height zero, the first two
    // terms cancel for any lateral acceleration.
    const double c_z = 0.87, g = 9.81;
    auto sys = fw::SystemMatrices::make(0.002, fw::omega_from_height(c_z, g));
    fw::CentroidalInputs in;
    in.mass = 90.0;
    in.gravity = g;
    in.contacts.push_back({{0.0, 0.0, 0.0}, {12.0, -4.0, 600.0}});
    in.contacts.push_back({{0.3, 0.1, 0.0}, {-3.0, 9.0, 300.0}});
    auto n = fw::bias_term({1.7, -0.6}, c_z, 0.0, in, sys);
    EXPECT_NEAR(n.x(), 0.0, 1e-12);
    EXPECT_NEAR(n.y(), 0.0, 1e-12);
}

TEST(BiasTerm, ContactHeightTerm)
{
    auto sys = fw::SystemMatrices::make(0.002, 11.276);
    fw::CentroidalInputs in;
    in.mass = 90.0;
    in.contacts.push_back({{0.0, 0.0, 0.02}, {10.0, 0.0, 100.0}});
    auto n = fw::bias_term({0.0, 0.0}, 0.87, 0.0, in, sys);
    EXPECT_NEAR(n.x(), 2e-3, 1e-15);
    EXPECT_NEAR(n.y(), 0.0, 1e-15);
}

TEST(BiasTerm, InvariantUnderForceScaling)
{
    auto sys = fw::SystemMatrices::make(0.002, 12.5);
    fw::CentroidalInputs in;
    in.mass = 95.0;
    in.angular_momentum_rate = {0.4, -0.2};
    in.contacts.push_back({{0.05, -0.02, 0.015}, {3.0, 1.0, 400.0}});
    in.contacts.push_back({{-0.1, 0.08, 0.01}, {-1.0, 2.0, 500.0}});
    auto n1 = fw::bias_term({0.3, -0.8}, 0.87, 0.1, in, sys);
    for (auto& contact : in.contacts)
    {
        contact.force *= 3.7;
    }
    auto n2 = fw::bias_term({0.3, -0.8}, 0.87, 0.1, in, sys);
    EXPECT_NEAR(n1.x(), n2.x(), 1e-14);
    EXPECT_NEAR(n1.y(), n2.y(), 1e-14);
}

TEST(BiasTerm, DegenerateContact)
{
    auto sys = fw::SystemMatrices::make(0.002, 11.276);
    fw::CentroidalInputs in;
    in.mass = 90.0;
    in.contacts.push_back({{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}});
    EXPECT_THROW(fw::bias_term({0.0, 0.0}, 0.87, 0.0, in, sys), fw::DegenerateContactError);
}

TEST(SystemMatrices, Invariants)
{
    auto sys = fw::SystemMatrices::make(0.002, 11.276);
    EXPECT_NEAR(sys.vb(), 0.002 * 0.002 * 0.002 / 6.0 - 0.002 / 11.276, 1e-18);
    EXPECT_LT(sys.vb(), 0.0);
    EXPECT_THROW(fw::SystemMatrices::make(-0.1, 11.276), fw::DomainError);
    EXPECT_THROW(fw::SystemMatrices::make(0.1, 0.0), fw::DomainError);
}

TEST(VelocityConservation, ZeroJerkZeroAccel)
{
    auto sys = fw::SystemMatrices::make(0.3, 11.276);
    fw::CentroidalState x{0.0, 1.3, 0.0};
    for (int i = 0; i < 50; i++)
    {
        x = fw::step_dynamics(x, 0.0, sys);
        EXPECT_DOUBLE_EQ(x.vel, 1.3);
    }
}
