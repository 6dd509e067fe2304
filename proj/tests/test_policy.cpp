#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qfb/polar.hpp"
#include "qfb/policy.hpp"

using namespace qfb;

TEST(Policy, MeasurementAngleExamples) {
    EXPECT_NEAR(measurement_angle(0.2, {0.0, -0.5, 0.0, 0.0}), -0.1, 1e-16);
    EXPECT_DOUBLE_EQ(measurement_angle(0.37, {0.0, 1.0, 0.0, 0.0}), 0.37);
    EXPECT_DOUBLE_EQ(measurement_angle(0.01, {pi / 2, 0.0, 0.0, 0.0}), pi / 2);
    EXPECT_NEAR(measurement_angle(0.5, {0.1, 0.2, 0.3, 0.4}), 0.1 + 0.1 + 0.075 + 0.05, 1e-15);
    EXPECT_NEAR(measurement_angle(3.0, {pi, 1.0, 0.0, 0.0}), 3.0 - pi, 1e-15);
}

TEST(Policy, AlignedLawRemovesThetaNoise) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> len(0.01, 1.0), ang(-pi, pi);
    const auto aligned = ControlPolicy::aligned(0.0);
    for (int i = 0; i < 1000; ++i) {
        const PolarState p{len(rng), ang(rng)};
        EXPECT_EQ(polar_coefficients(p, measurement_angle(p.theta, {0, 1, 0, 0}), 0, 1).g_theta, 0.0);
        const double alpha = aligned(p, 1e-3).alpha;
        EXPECT_NEAR(std::sin(alpha - p.theta), 0.0, 1e-15);
    }
}

TEST(Policy, LawIsEvaluatedOnReflectedAngle) {
    const auto law = ControlPolicy::law({0.0, -0.5, 0.0, 0.0}, 0.0);
    EXPECT_NEAR(law({1.0, 0.2}, 1e-3).alpha, 0.1, 1e-16);
    const auto right = ControlPolicy::law({pi / 2, -0.7, 0.0, 0.0}, 0.0);
    EXPECT_NEAR(right({1.0, 0.01}, 1e-3).alpha, pi / 2 + 0.007, 1e-15);
}

TEST(Policy, PublishedCoefficients) {
    const PublishedProtocol row;
    const auto at0 = published_coefficients(0.0, 1.0, row);
    EXPECT_EQ(at0.c0, 0.0);
    EXPECT_DOUBLE_EQ(at0.c1, -0.5);
    EXPECT_NEAR(published_coefficients(10.0, 1.0, row).c1, -0.68440679665206539, 1e-15);
    EXPECT_EQ(published_coefficients(10.0, 1.0, row).c0, 0.0);
    EXPECT_EQ(published_coefficients(50.0, 1.0, row).c0, pi / 2);
    EXPECT_EQ(published_coefficients(45.0, 1.0, row).c0, pi / 2);
    EXPECT_EQ(published_coefficients(44.999, 1.0, row).c0, 0.0);
    // Rates in units of k.
    EXPECT_EQ(published_coefficients(20.0, 2.0, row), published_coefficients(10.0, 1.0, row));
    EXPECT_THROW(published_coefficients(-1.0, 1.0, row), ConfigError);
}

TEST(Policy, PublishedC1IsMonotoneAndBounded) {
    const PublishedProtocol row;
    double prev = published_c1(0.0, row);
    for (double w = 0.05; w < 200.0; w += 0.05) {
        const double c1 = published_c1(w, row);
        if (w < 30.0) EXPECT_LT(c1, prev);
        EXPECT_LE(c1, prev);
        EXPECT_GE(c1, -row.A - row.B);
        EXPECT_LE(c1, -row.A);
        prev = c1;
    }
    // Continuous except at the switch.
    for (double w = 0.0; w < 100.0; w += 0.01) {
        const auto a = published_coefficients(w, 1.0, row);
        const auto b = published_coefficients(w + 0.01, 1.0, row);
        EXPECT_LT(std::abs(a.c1 - b.c1), 0.01);
        if (a.c0 != b.c0) EXPECT_TRUE(w < row.switch_ratio && w + 0.01 >= row.switch_ratio);
    }
}

TEST(Policy, TableRows) {
    EXPECT_EQ(PublishedProtocol::for_gamma(0.2).A, 0.479);
    EXPECT_EQ(PublishedProtocol::for_gamma(0.3).r, 0.529);
    EXPECT_EQ(PublishedProtocol::for_gamma(0.1).B, 0.186);
    EXPECT_THROW(PublishedProtocol::for_gamma(0.15), ConfigError);
    PublishedProtocol bad;
    bad.switch_ratio = 80;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Policy, FeedbackRotation) {
    EXPECT_EQ(feedback_rotation(0.0, 20.0, 1e-4), 0.0);
    EXPECT_EQ(feedback_rotation(0.5, 20.0, 1e-4), 20.0);
    EXPECT_EQ(feedback_rotation(-0.5, 20.0, 1e-4), -20.0);
    EXPECT_NEAR(feedback_rotation(1e-6, 50.0, 1e-4), 0.01, 1e-15);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ang(-pi, pi), w(0.0, 100.0);
    for (int i = 0; i < 10000; ++i) {
        const double theta = ang(rng), omega = w(rng), dt = 1e-3;
        const double mu = feedback_rotation(theta, omega, dt);
        EXPECT_LE(std::abs(mu), omega);
        // Rotation alone never overshoots the target.
        const double next = theta - mu * dt;
        EXPECT_LE(std::abs(next), std::abs(theta) + 1e-15);
        EXPECT_GE(next * theta, -1e-15);
    }
}

TEST(Policy, Validation) {
    EXPECT_THROW(ControlPolicy::law({4.0, 0, 0, 0}, 1.0), ConfigError);
    EXPECT_THROW(ControlPolicy::law({0, NAN, 0, 0}, 1.0), ConfigError);
    EXPECT_THROW(ControlPolicy::law({}, -1.0), ConfigError);
    try {
        ControlPolicy::law({0, 0, INFINITY, 0}, 1.0);
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "c2");
    }
}
