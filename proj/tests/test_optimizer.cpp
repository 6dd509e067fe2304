#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "qfb/bfgs.hpp"
#include "qfb/fit.hpp"
#include "qfb/optimizer.hpp"

using namespace qfb;

TEST(Bfgs, Quadratic) {
    Bfgs b([](const Eigen::VectorXd& x) { return std::pow(x[0] - 0.3, 2) + 4 * std::pow(x[1] + 0.2, 2); },
           {.fd_step = 1e-3, .max_evaluations = 200, .step_tolerance = 1e-8});
    const auto r = b.minimize(Eigen::Vector2d(1.0, 1.0));
    EXPECT_NEAR(r.x[0], 0.3, 1e-5);
    EXPECT_NEAR(r.x[1], -0.2, 1e-5);
    EXPECT_LE(r.evaluations, 200u);
}

TEST(Bfgs, Rosenbrock) {
    Bfgs b([](const Eigen::VectorXd& x) {
        return std::pow(1 - x[0], 2) + 100 * std::pow(x[1] - x[0] * x[0], 2);
    }, {.fd_step = 1e-5, .max_evaluations = 3000, .gradient_tolerance = 1e-9, .step_tolerance = 1e-12});
    const auto r = b.minimize(Eigen::Vector2d(-1.2, 1.0));
    EXPECT_NEAR(r.x[0], 1.0, 1e-3);
    EXPECT_NEAR(r.x[1], 1.0, 2e-3);
}

TEST(Bfgs, NeverWorseThanStart) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int trial = 0; trial < 50; ++trial) {
        // Rough objective: a quadratic with a staircase on top.
        Bfgs b([](const Eigen::VectorXd& x) {
            return x.squaredNorm() + 0.05 * std::floor(10 * std::sin(7 * x[0]));
        }, {.max_evaluations = 25});
        const Eigen::Vector2d x0(u(rng), u(rng));
        const auto r = b.minimize(x0);
        EXPECT_LE(r.value, r.initial_value);
        EXPECT_LE(r.evaluations, 25u);
    }
}

namespace {

SimParams small_run() {
    SimParams p;
    p.k = 1.0;
    p.gamma = 0.1;
    p.nT = 0.1;
    p.omega = 10.0;
    p.dt = 2e-3;
    p.t_burn = 2.0;
    p.t_avg = 3.0;
    p.seed = 99;
    return p;
}

}  // namespace

TEST(Optimizer, DeterministicAndNotWorse) {
    const SimParams p = small_run();
    OptimizeOptions o;
    o.n_traj = 40;
    o.budget = 20;
    o.frozen[0] = true;
    const ProtocolCoefficients init{0.0, -0.3, 0.0, 0.0};
    const auto a = optimize_coefficients(p, init, 1, o);
    const auto b = optimize_coefficients(p, init, 1, o);
    EXPECT_EQ(a.coefficients, b.coefficients);
    EXPECT_EQ(a.estimate.epsilon_mean, b.estimate.epsilon_mean);
    EXPECT_LE(a.crn_best, a.crn_initial);
    EXPECT_EQ(a.coefficients.c0, 0.0);
    EXPECT_EQ(a.coefficients.c2, 0.0);
    EXPECT_LE(a.evaluations, 20u);
    // The CRN objective at the start equals a plain ensemble on the same seeds.
    const CrnObjective f(p, 40, 0);
    EXPECT_EQ(f(init), a.crn_initial);
    // The reported estimate uses fresh noise.
    EXPECT_NE(a.estimate.seed, p.seed);
}

TEST(Optimizer, Preconditions) {
    const SimParams p = small_run();
    OptimizeOptions o;
    o.budget = 10;
    EXPECT_THROW(optimize_coefficients(p, {}, 1, o), ConfigError);
    o.budget = 20;
    EXPECT_THROW(optimize_coefficients(p, {}, 2, o), ConfigError);
    o.frozen = {true, true, true, true};
    EXPECT_THROW(optimize_coefficients(p, {}, 3, o), ConfigError);
    EXPECT_THROW(sweep_switch_point(p, {30, 40, 50, 60}, 10, {}), ConfigError);
    EXPECT_THROW(sweep_switch_point(p, {30}, 10, {}), ConfigError);
}

TEST(Optimizer, C0ScanEndpoints) {
    std::vector<C0ScanPoint> scan{{0, 1.0, 0}, {0.5, 2.0, 0}, {1.0, 3.0, 0}};
    EXPECT_TRUE(c0_minimum_at_endpoint(scan));
    scan[1].epsilon = 0.5;
    EXPECT_FALSE(c0_minimum_at_endpoint(scan));
}

TEST(Fit, NoiselessRoundTrip) {
    std::vector<C1Point> pts;
    for (int i = 0; i <= 30; i += 2) pts.push_back({double(i), c1_model(i, 0.5, 0.186, 0.476)});
    const auto f = fit_c1_curve(pts);
    EXPECT_NEAR(f.A, 0.5, 1e-6);
    EXPECT_NEAR(f.B, 0.186, 1e-6);
    EXPECT_NEAR(f.r, 0.476, 1e-6);
    EXPECT_NEAR(f.m, 0.0, 1e-9);
    EXPECT_NEAR(f.sigma, 0.0, 1e-9);
}

TEST(Fit, OrderInvariant) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> n(0.0, 0.007);
    std::vector<C1Point> pts;
    for (int i = 0; i <= 30; ++i) pts.push_back({double(i), c1_model(i, 0.479, 0.211, 0.705) + n(rng)});
    const auto a = fit_c1_curve(pts);
    std::shuffle(pts.begin(), pts.end(), rng);
    const auto b = fit_c1_curve(pts);
    EXPECT_EQ(a.A, b.A);
    EXPECT_EQ(a.B, b.B);
    EXPECT_EQ(a.r, b.r);
    EXPECT_EQ(a.sigma, b.sigma);
}

TEST(Fit, JitterScaleRecovered) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 0.007);
    std::vector<C1Point> pts;
    for (int i = 0; i <= 60; ++i) pts.push_back({0.5 * i, c1_model(0.5 * i, 0.5, 0.186, 0.476) + n(rng)});
    const auto f = fit_c1_curve(pts);
    EXPECT_NEAR(f.sigma, 0.007, 0.0035);
    EXPECT_NEAR(f.m, 0.0, 0.003);
}

TEST(Fit, Preconditions) {
    EXPECT_THROW(fit_c1_curve({{0, -0.5}, {10, -0.68}}), ConfigError);
    EXPECT_THROW(fit_c1_curve({{0, -0.5}, {0, -0.5}, {10, -0.68}, {10, -0.68}}), ConfigError);
    EXPECT_THROW(fit_c1_curve({{0, -0.5}, {5, NAN}, {10, -0.68}, {20, -0.7}}), ConfigError);
}
