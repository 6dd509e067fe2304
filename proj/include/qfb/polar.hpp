#pragma once

// Reduced dynamics of (theta, a) for a measurement at angle alpha and a
// signed feedback rotation mu. With phi = alpha - theta and one shared dW:
//
//   d theta = [-mu + 2k sin(2 phi) (3 - 2/a^2)] dt + sqrt(8k) sin(phi) / a dW
//   d a     = 4k sin^2(phi) (1 - a^2) / a dt     + sqrt(8k) cos(phi) (1 - a^2) dW
//
// These follow from the Bloch-form SME by Ito's rule. The length drift is
// non-negative and vanishes for pure states, which is what keeps an efficient
// measurement from mixing a pure state.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qfb/bloch.hpp"

namespace qfb {

struct PolarDrift {
    double dtheta_dt = 0.0;
    double da_dt = 0.0;
    double g_theta = 0.0;
    double g_a = 0.0;
};

/// Smallest Bloch length the reduced model accepts.
inline constexpr double polar_min_length = 1e-6;

namespace detail {
inline void require_length(double a) {
    if (!(a > polar_min_length)) {
        throw std::domain_error("polar model is singular at a=" + std::to_string(a) +
                                "; use the full SME");
    }
}
}  // namespace detail

inline PolarDrift polar_coefficients(PolarState p, double alpha, double mu, double k) {
    detail::require_length(p.a);
    const double phi = alpha - p.theta;
    const double s = std::sin(phi);
    const double c = std::cos(phi);
    const double a = p.a;
    const double root = std::sqrt(8.0 * k);
    const double mixed = 1.0 - a * a;
    return {
        -mu + 4.0 * k * s * c * (3.0 - 2.0 / (a * a)),
        4.0 * k * s * s * mixed / a,
        root * s / a,
        root * c * mixed,
    };
}

/// One step of the reduced equations. The measurement part is a Milstein
/// step (one noise, so no Levy areas) and the rotation is exact. a is clamped
/// to [0, 1] and theta wrapped.
inline PolarState polar_step(PolarState p, double alpha, double mu, double k, double dt, double dW) {
    const PolarDrift f = polar_coefficients(p, alpha, 0.0, k);
    const double phi = alpha - p.theta;
    const double s = std::sin(phi);
    const double c = std::cos(phi);
    const double a = p.a;
    const double mixed = 1.0 - a * a;
    // (g . grad) g for the shared noise, with alpha frozen over the step.
    const double corr_theta = -8.0 * k * s * c * (2.0 - a * a) / (a * a);
    const double corr_a = 8.0 * k * mixed * (s * s / a - 2.0 * a * c * c);
    const double ito = 0.5 * (dW * dW - dt);

    double theta = p.theta + f.dtheta_dt * dt + f.g_theta * dW + corr_theta * ito - mu * dt;
    double next_a = a + f.da_dt * dt + f.g_a * dW + corr_a * ito;
    next_a = std::clamp(next_a, 0.0, 1.0);
    return {next_a, next_a == 0.0 ? 0.0 : wrap_angle(theta)};
}

/// Averaged small-angle model of <theta^2> for the law alpha = c1 (-theta)
/// near the target, stepped explicitly:
///
///   d<theta^2> = {4 gamma nT - 2 omega <|theta|> + [8k c1 (c1 + 1) - gamma] <theta^2>} dt
///
/// For omega > 0, <|theta|> is closed with the Gaussian value
/// sqrt(2 <theta^2> / pi); only omega = 0 is exact within the model. The result
/// is floored at 0.
inline double theta2_moment_step(double theta2, double c1, double omega, double k, double gamma,
                                 double nT, double dt) {
    if (!(theta2 >= 0.0)) throw std::invalid_argument("theta2_moment_step: theta2 must be >= 0");
    const double mean_abs = std::sqrt(2.0 * theta2 / pi);
    const double rate = 4.0 * gamma * nT - 2.0 * omega * mean_abs +
                        (8.0 * k * c1 * (c1 + 1.0) - gamma) * theta2;
    return std::max(0.0, theta2 + rate * dt);
}

/// Fixed point of the omega = 0 moment equation, 4 gamma nT / (gamma - 8k c1 (c1 + 1)).
inline double theta2_steady_state(double c1, double k, double gamma, double nT) {
    const double denom = gamma - 8.0 * k * c1 * (c1 + 1.0);
    if (!(denom > 0.0)) {
        throw std::domain_error("theta2_steady_state: c1=" + std::to_string(c1) +
                                " cannot confine theta without feedback");
    }
    return 4.0 * gamma * nT / denom;
}

}  // namespace qfb
