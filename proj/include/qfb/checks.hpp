#pragma once

// Self-checks run by `qfb check`: each compares an integrator against an
// independent reference and reports pass or fail.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "qfb/bloch.hpp"
#include "qfb/polar.hpp"
#include "qfb/rng.hpp"
#include "qfb/sme.hpp"

namespace qfb {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

/// Max over t in [0, 1/k] of the |theta| and |a| gaps between the full and
/// reduced models fed the same Brownian path, geometric mean over `paths`
/// paths (rare near-chaotic paths dominate an arithmetic mean).
/// gamma = 0, law alpha = -theta/2, start (a, theta) = (0.99, 0.3): close
/// enough to purity that no path visits the a -> 0 singularity of the
/// reduced model.
inline double shared_noise_gap(double dt, std::uint64_t seed, int paths = 40) {
    SimParams p;
    p.k = 1.0;
    p.gamma = 0.0;
    p.nT = 0.0;
    p.dt = dt;
    const double fine = 1e-5;
    const int sub = static_cast<int>(std::lround(dt / fine));
    double total = 0.0;
    for (int path = 0; path < paths; ++path) {
        WienerSource w(seed, static_cast<std::uint64_t>(path));
        PolarState full{0.99, 0.3};
        PolarState reduced = full;
        double gap = 0.0;
        for (long n = 0; n < std::lround(1.0 / dt); ++n) {
            double dW = 0.0;
            for (int j = 0; j < sub; ++j) dW += w.increment(fine);
            full = sme_step(full, {-0.5 * full.theta}, 0.0, p, dW).state;
            reduced = polar_step(reduced, -0.5 * reduced.theta, 0.0, p.k, dt, dW);
            gap = std::max({gap, std::abs(std::remainder(full.theta - reduced.theta, 2.0 * pi)),
                            std::abs(full.a - reduced.a)});
        }
        total += std::log(gap);
    }
    return std::exp(total / paths);
}

/// Thermal Bloch vector after time t from the 4x4 Lindblad superoperator.
inline BlochVector thermal_reference(BlochVector b0, double gamma, double nT, double t) {
    using M2 = Eigen::Matrix2cd;
    M2 lower;
    lower << 0, 0, 1, 0;
    auto dissipator = [](const M2& c, const M2& rho) -> M2 {
        return 2.0 * c * rho * c.adjoint() - c.adjoint() * c * rho - rho * c.adjoint() * c;
    };
    Eigen::Matrix4cd L;
    for (int col = 0; col < 4; ++col) {
        M2 basis = M2::Zero();
        basis(col % 2, col / 2) = 1.0;
        const M2 out = 0.5 * gamma * (nT + 1.0) * dissipator(lower, basis) +
                       0.5 * gamma * nT * dissipator(lower.adjoint(), basis);
        for (int row = 0; row < 4; ++row) L(row, col) = out(row % 2, row / 2);
    }
    const auto rho = density_matrix(b0);
    Eigen::Vector4cd v;
    v << rho[0][0], rho[1][0], rho[0][1], rho[1][1];
    const Eigen::Vector4cd w = (L * t).exp() * v;
    DensityMatrix r{{{w[0], w[2]}, {w[1], w[3]}}};
    return bloch_from_density(r);
}

}  // namespace detail

inline std::vector<CheckResult> run_checks() {
    std::vector<CheckResult> out;
    auto fmt = [](auto... xs) {
        std::ostringstream os;
        os.precision(6);
        (os << ... << xs);
        return os.str();
    };

    {
        const double g4 = detail::shared_noise_gap(4e-4, 11);
        const double g2 = detail::shared_noise_gap(2e-4, 11);
        const double g1 = detail::shared_noise_gap(1e-4, 11);
        const bool ok = g4 / g2 > 1.5 && g4 / g2 < 2.7 && g2 / g1 > 1.5 && g2 / g1 < 2.7;
        out.push_back({"sme_vs_polar_shared_noise", ok,
                       fmt("geometric-mean max gap ", g4, " / ", g2, " / ", g1, " at dt 4e-4 / 2e-4 / 1e-4")});
    }
    {
        SimParams p;
        p.k = 0.0;
        p.gamma = 0.1;
        p.nT = 0.1;
        p.dt = 1e-3;
        const SmeIntegrator step(p);
        const BlochVector b0 = from_polar({0.5, 1.0});
        BlochVector b = b0;
        double worst = 0.0;
        for (int n = 1; n <= 200000; ++n) {
            b = step.step(b, {0.0}, 0.0, 0.0).state;
            if (n % 20000 == 0) {
                const auto ref = detail::thermal_reference(b0, p.gamma, p.nT, n * p.dt);
                worst = std::max({worst, std::abs(b.ax - ref.ax), std::abs(b.az - ref.az)});
            }
        }
        const double target = -1.0 / (1.0 + 2.0 * p.nT);
        const bool ok = worst < 1e-9 && std::abs(b.az - target) < 1e-6;
        out.push_back({"thermal_fixed_point", ok,
                       fmt("az=", b.az, " target ", target, ", max deviation from exp(Lt) ", worst)});
    }
    {
        const double star = theta2_steady_state(-0.5, 1.0, 0.1, 0.1);
        double x = 0.0;
        for (int n = 0; n < 100000; ++n) x = theta2_moment_step(x, -0.5, 0.0, 1.0, 0.1, 0.1, 1e-3);
        const bool ok = std::abs(x - star) < 1e-12 && std::abs(star - 0.04 / 2.1) < 1e-15;
        out.push_back({"theta2_fixed_point", ok, fmt("iterated ", x, " closed form ", star)});
    }
    return out;
}

}  // namespace qfb
