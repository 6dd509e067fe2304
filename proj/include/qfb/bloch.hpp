#pragma once

// Qubit state representations on the Bloch sphere.
//
// The target (ground) state sits at the south pole, (0, 0, -1). Polar
// coordinates measure the angle theta from that pole inside the xz-plane,
// so that rho = (I + a (sin(theta) sx - cos(theta) sz)) / 2.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qfb {

inline constexpr double pi = std::numbers::pi;

/// Tolerance on |a| - 1 and on stray y-components.
inline constexpr double bloch_tolerance = 1e-9;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double x) noexcept {
    if (x > -pi && x <= pi) return x;
    double r = std::remainder(x, 2.0 * pi);
    if (r <= -pi) r += 2.0 * pi;
    return r;
}

/// sgn with sgn(0) = 0.
inline constexpr double sign(double x) noexcept {
    return static_cast<double>((0.0 < x) - (x < 0.0));
}

struct BlochVector {
    double ax = 0.0;
    double ay = 0.0;
    double az = 0.0;

    double norm() const noexcept { return std::sqrt(ax * ax + ay * ay + az * az); }

    friend bool operator==(const BlochVector&, const BlochVector&) = default;
};

struct PolarState {
    double a = 0.0;      // Bloch-vector length in [0, 1]
    double theta = 0.0;  // angle from the ground state, (-pi, pi]

    /// Builds a state with theta wrapped and a checked against [0, 1].
    static PolarState make(double a, double theta) {
        if (!(a >= 0.0 && a <= 1.0 + bloch_tolerance)) {
            throw std::invalid_argument("PolarState: length a=" + std::to_string(a) +
                                        " outside [0, 1]");
        }
        return {std::min(a, 1.0), a == 0.0 ? 0.0 : wrap_angle(theta)};
    }

    friend bool operator==(const PolarState&, const PolarState&) = default;
};

inline BlochVector from_polar(PolarState p) noexcept {
    return {p.a * std::sin(p.theta), 0.0, -p.a * std::cos(p.theta)};
}

/// Converts an xz-plane Bloch vector to polar form. Throws if the vector has a
/// y-component beyond tolerance or a length above one beyond tolerance.
inline PolarState to_polar(BlochVector b) {
    if (std::abs(b.ay) > bloch_tolerance) {
        throw std::invalid_argument("to_polar: state not in the xz-plane (ay=" +
                                    std::to_string(b.ay) + ")");
    }
    const double a = std::hypot(b.ax, b.az);
    if (a > 1.0 + bloch_tolerance) {
        throw std::invalid_argument("to_polar: |a|=" + std::to_string(a) + " exceeds 1");
    }
    if (a == 0.0) return {0.0, 0.0};
    return {std::min(a, 1.0), wrap_angle(std::atan2(b.ax, -b.az))};
}

/// Removes the y-component with a rotation about z. The in-plane component
/// comes back non-negative; callers that need the sign of theta keep it
/// themselves.
inline BlochVector rotate_to_xz(BlochVector b) noexcept {
    return {std::hypot(b.ax, b.ay), 0.0, b.az};
}

/// Probability of finding the qubit outside the ground state,
/// (1 - a cos(theta)) / 2, written without the cancellation near the target.
inline double error_probability(PolarState p) noexcept {
    const double s = std::sin(0.5 * p.theta);
    return 0.5 * (1.0 - p.a) + p.a * s * s;
}

/// Thermal steady state of the damping channel with occupation nT.
inline PolarState thermal_equilibrium(double nT) {
    if (!(nT >= 0.0)) throw std::invalid_argument("thermal_equilibrium: nT must be >= 0");
    if (std::isinf(nT)) return {0.0, 0.0};
    return {1.0 / (1.0 + 2.0 * nT), 0.0};
}

/// Excited-state population of the thermal state.
inline double thermal_excited_population(double nT) noexcept {
    return std::isinf(nT) ? 0.5 : nT / (1.0 + 2.0 * nT);
}

using DensityMatrix = std::array<std::array<std::complex<double>, 2>, 2>;

/// rho = (I + a.sigma)/2 in the sz eigenbasis (row 0 is the +1 eigenvector).
inline DensityMatrix density_matrix(BlochVector b) noexcept {
    using c = std::complex<double>;
    return {{{c{0.5 * (1.0 + b.az), 0.0}, c{0.5 * b.ax, -0.5 * b.ay}},
             {c{0.5 * b.ax, 0.5 * b.ay}, c{0.5 * (1.0 - b.az), 0.0}}}};
}

inline BlochVector bloch_from_density(const DensityMatrix& rho) noexcept {
    return {2.0 * rho[1][0].real(), 2.0 * rho[1][0].imag(),
            (rho[0][0] - rho[1][1]).real()};
}

}  // namespace qfb
