#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "qfb/polar.hpp"
#include "qfb/sme.hpp"

using namespace qfb;

namespace {

// Ito moments of (theta, a) over one literal Euler step of the density
// matrix, by quadrature over dW. As dt -> 0 these converge to the drift and
// squared diffusion of the reduced equations.
struct PolarMoments {
    double drift_theta, drift_a, var_theta, var_a;
};

PolarMoments literal_moments(PolarState p, double alpha, double k, double dt) {
    const auto q = oracle::gauss_hermite(40);
    const auto b = from_polar(p);
    const auto rho = oracle::rho_of(b.ax, b.ay, b.az);
    const auto rhs = oracle::sme_rhs(rho, alpha, 0.0, k, 0.0, 0.0);
    auto moved = [&](double z) {
        const oracle::Mat2 next = rho + rhs.drift * dt + rhs.noise * (std::sqrt(dt) * z);
        const auto nb = oracle::bloch_of(next);
        const double a = std::hypot(nb.x, nb.z);
        const double theta = std::atan2(nb.x, -nb.z);
        return Eigen::Vector2d(std::remainder(theta - p.theta, 2 * pi), a - p.a);
    };
    const Eigen::Vector2d m = oracle::expect(q, moved);
    const Eigen::Vector2d v = oracle::expect(q, [&](double z) {
        return Eigen::Vector2d(moved(z).array().square());
    });
    return {m[0] / dt, m[1] / dt, v[0] / dt, v[1] / dt};
}

}  // namespace

TEST(Polar, TargetIsAFixedPoint) {
    const auto f = polar_coefficients({1.0, 0.0}, 0.0, 0.0, 1.0);
    EXPECT_EQ(f.dtheta_dt, 0.0);
    EXPECT_EQ(f.da_dt, 0.0);
    EXPECT_EQ(f.g_theta, 0.0);
    EXPECT_EQ(f.g_a, 0.0);
}

TEST(Polar, QuarterAngleAtTarget) {
    const auto f = polar_coefficients({1.0, 0.0}, pi / 4, 0.0, 1.0);
    // Ito drift of theta pushes towards alpha; a pure state stays pure.
    EXPECT_NEAR(f.dtheta_dt, 2.0, 1e-14);
    EXPECT_NEAR(f.g_theta, 2.0, 1e-14);
    EXPECT_EQ(f.da_dt, 0.0);
    EXPECT_EQ(f.g_a, 0.0);
    const auto m = literal_moments({1.0, 0.0}, pi / 4, 1.0, 1e-7);
    EXPECT_NEAR(m.drift_theta, f.dtheta_dt, 1e-4);
    EXPECT_NEAR(m.var_theta, f.g_theta * f.g_theta, 1e-4);
    EXPECT_NEAR(m.drift_a, 0.0, 1e-4);
}

TEST(Polar, CoefficientsMatchLiteralSme) {
    for (const auto& [a, theta, alpha, k] :
         {std::tuple{0.9, 0.1, 0.5, 1.0}, std::tuple{0.5, -0.3, 1.2, 0.7},
          std::tuple{0.99, 2.0, -2.5, 1.0}, std::tuple{0.3, 0.0, pi / 2, 2.0}}) {
        const auto f = polar_coefficients({a, theta}, alpha, 0.0, k);
        const auto m = literal_moments({a, theta}, alpha, k, 1e-7);
        const double scale = 1e-4 * k / (a * a * a);
        EXPECT_NEAR(m.drift_theta, f.dtheta_dt, scale) << a << ' ' << theta << ' ' << alpha;
        EXPECT_NEAR(m.drift_a, f.da_dt, scale) << a << ' ' << theta << ' ' << alpha;
        EXPECT_NEAR(m.var_theta, f.g_theta * f.g_theta, scale);
        EXPECT_NEAR(m.var_a, f.g_a * f.g_a, scale);
        EXPECT_GE(f.da_dt, 0.0);
    }
}

TEST(Polar, DriftMatchesSmeStepSamples) {
    // 10^6 antithetic pairs of sme_step at gamma = 0 per state point.
    SimParams p;
    p.k = 1.0;
    p.gamma = 0.0;
    p.nT = 0.0;
    p.dt = 1e-4;
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n(0.0, std::sqrt(p.dt));
    for (const auto& [a, theta, alpha] :
         {std::tuple{0.9, 0.1, 0.5}, std::tuple{0.6, -0.4, 0.8}, std::tuple{0.8, 0.3, -1.0}}) {
        const PolarState s{a, theta};
        const auto f = polar_coefficients(s, alpha, 0.0, p.k);
        const int pairs = 1000000;
        double st = 0, st2 = 0, sa = 0, sa2 = 0;
        for (int i = 0; i < pairs; ++i) {
            const double dW = n(rng);
            const auto up = sme_step(s, {alpha}, 0.0, p, dW).state;
            const auto down = sme_step(s, {alpha}, 0.0, p, -dW).state;
            const double dth = 0.5 * (up.theta + down.theta) - theta;
            const double da = 0.5 * (up.a + down.a) - a;
            st += dth;
            st2 += dth * dth;
            sa += da;
            sa2 += da * da;
        }
        const double mt = st / pairs, ma = sa / pairs;
        const double se_t = std::sqrt((st2 / pairs - mt * mt) / pairs) / p.dt;
        const double se_a = std::sqrt((sa2 / pairs - ma * ma) / pairs) / p.dt;
        // Bias of the step is O(dt) in the rates.
        EXPECT_NEAR(mt / p.dt, f.dtheta_dt, 3 * se_t + 20 * p.dt) << a << ' ' << theta;
        EXPECT_NEAR(ma / p.dt, f.da_dt, 3 * se_a + 20 * p.dt) << a << ' ' << theta;
    }
}

TEST(Polar, FirstOrderExpansionNearPurity) {
    const double delta = 0.01;
    const double k = 1.0;
    for (double alpha : {0.05, 0.2, -0.3}) {
        const auto f = polar_coefficients({1.0 - delta, 0.0}, alpha, 0.0, k);
        const double r8 = std::sqrt(8 * k);
        EXPECT_NEAR(f.dtheta_dt, 2 * k * std::sin(2 * alpha) * (1 - 4 * delta), 20 * delta * delta);
        EXPECT_NEAR(f.g_theta, r8 * std::sin(alpha) * (1 + delta), 5 * delta * delta);
        EXPECT_NEAR(f.da_dt, 8 * k * delta * std::sin(alpha) * std::sin(alpha), 20 * delta * delta);
        EXPECT_NEAR(f.g_a, 2 * delta * r8 * std::cos(alpha), 5 * delta * delta);
    }
}

TEST(Polar, AlignedMeasurementHasNoThetaNoise) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> len(1e-3, 1.0), ang(-pi, pi);
    for (int i = 0; i < 1000; ++i) {
        const PolarState p{len(rng), ang(rng)};
        const auto f = polar_coefficients(p, p.theta, 0.0, 1.0);
        EXPECT_EQ(f.g_theta, 0.0);
        EXPECT_EQ(f.dtheta_dt, 0.0);
        const auto next = polar_step(p, p.theta, 0.0, 1.0, 1e-3, 0.05);
        EXPECT_EQ(next.theta, p.theta);
    }
}

TEST(Polar, RotationOnly) {
    PolarState p{0.8, 0.5};
    const double omega = 10.0, dt = 1e-3;
    for (int n = 0; n < 40; ++n) {
        const auto next = polar_step(p, 0.0, omega, 0.0, dt, 0.1);
        EXPECT_NEAR(std::abs(p.theta) - std::abs(next.theta), omega * dt, 1e-12);
        EXPECT_EQ(next.a, 0.8);
        p = next;
    }
}

TEST(Polar, SingularAtTinyLength) {
    EXPECT_THROW(polar_coefficients({1e-7, 0.0}, 0.3, 0.0, 1.0), std::domain_error);
    EXPECT_THROW(polar_step({0.0, 0.0}, 0.3, 0.0, 1.0, 1e-3, 0.0), std::domain_error);
}

TEST(Polar, SharedNoiseConvergesLinearly) {
    // gamma = 0, same Brownian paths: the reduced and full models agree to O(dt).
    auto mean_gap = [](double dt) {
        SimParams p;
        p.k = 1.0;
        p.gamma = 0.0;
        p.dt = dt;
        const double fine = 1e-5;
        const int sub = static_cast<int>(std::lround(dt / fine));
        double total = 0.0;
        const int paths = 20;
        for (int path = 0; path < paths; ++path) {
            WienerSource w(3, path);
            PolarState full{0.99, 0.3}, reduced{0.99, 0.3};
            double gap = 0.0;
            for (int n = 0; n < static_cast<int>(std::lround(1.0 / dt)); ++n) {
                double dW = 0.0;
                for (int j = 0; j < sub; ++j) dW += w.increment(fine);
                full = sme_step(full, {-0.5 * full.theta}, 0.0, p, dW).state;
                reduced = polar_step(reduced, -0.5 * reduced.theta, 0.0, p.k, dt, dW);
                gap = std::max({gap, std::abs(std::remainder(full.theta - reduced.theta, 2 * pi)),
                                std::abs(full.a - reduced.a)});
            }
            total += std::log(gap);
        }
        return std::exp(total / paths);
    };
    const double g4 = mean_gap(4e-4), g2 = mean_gap(2e-4), g1 = mean_gap(1e-4);
    EXPECT_GT(g4 / g2, 1.5) << g4 << ' ' << g2 << ' ' << g1;
    EXPECT_GT(g2 / g1, 1.5) << g4 << ' ' << g2 << ' ' << g1;
    EXPECT_LT(g4 / g2, 2.7) << g4 << ' ' << g2 << ' ' << g1;
    EXPECT_LT(g2 / g1, 2.7) << g4 << ' ' << g2 << ' ' << g1;
}

TEST(ThetaSquared, FixedPointExamples) {
    EXPECT_NEAR(theta2_steady_state(-0.5, 1.0, 0.1, 0.1), 0.019047619047619046, 1e-16);
    EXPECT_NEAR(theta2_steady_state(0.0, 1.0, 0.1, 0.1), 0.4, 1e-15);
    EXPECT_DOUBLE_EQ(theta2_steady_state(-1.0, 1.0, 0.1, 0.1), theta2_steady_state(0.0, 1.0, 0.1, 0.1));
    EXPECT_THROW(theta2_steady_state(0.2, 1.0, 0.1, 0.1), std::domain_error);
    for (double c1 = -1.0; c1 <= 0.0; c1 += 0.0625) {
        EXPECT_NEAR(theta2_steady_state(c1, 1.0, 0.1, 0.1), theta2_steady_state(-1.0 - c1, 1.0, 0.1, 0.1),
                    1e-15);
    }
}

TEST(ThetaSquared, MomentStepFixedPoint) {
    const double star = theta2_steady_state(-0.5, 1.0, 0.1, 0.1);
    EXPECT_NEAR(theta2_moment_step(star, -0.5, 0.0, 1.0, 0.1, 0.1, 1e-3), star, 1e-12);
    double x = 0.0;
    for (int n = 0; n < 20000; ++n) x = theta2_moment_step(x, -0.5, 0.0, 1.0, 0.1, 0.1, 1e-3);
    EXPECT_NEAR(x, star, 1e-12);
    double y = 0.3;
    for (int n = 0; n < 20000; ++n) y = theta2_moment_step(y, -0.5, 0.0, 1.0, 0.1, 0.0, 1e-3);
    EXPECT_LT(y, 1e-12);
    EXPECT_THROW(theta2_moment_step(-1e-3, -0.5, 0.0, 1.0, 0.1, 0.1, 1e-3), std::invalid_argument);
    EXPECT_GE(theta2_moment_step(1e-6, -0.5, 100.0, 1.0, 0.1, 0.0, 1e-3), 0.0);
}

TEST(ThetaSquared, GridArgminAtMinusHalf) {
    double best = 0, best_c1 = 0;
    for (int i = 0; i <= 1000; ++i) {
        const double c1 = -1.0 + i * 1e-3;
        const double v = theta2_steady_state(c1, 1.0, 0.1, 0.1);
        if (i == 0 || v < best) {
            best = v;
            best_c1 = c1;
        }
    }
    EXPECT_NEAR(best_c1, -0.5, 1e-3 + 1e-12);
}
