#pragma once

// Feedback protocols: the measurement-angle law, the published piecewise
// protocol, and the bounded rotation speed.
//
// Angle convention of the law. The coefficients act on the state angle taken
// with the orientation opposite to the measurement angle, i.e. the law is
// evaluated at -theta:
//
//     alpha = c0 + c1 (-theta) + c2 theta^2 + c3 (-theta)^3.
//
// In this convention the published coefficients are negative (c1 = -1/2 is
// the optimum without feedback), and the aligned measurement alpha = theta is
// c1 = -1. measurement_angle() itself is the plain polynomial; the reflection
// happens in ControlPolicy.

#include <array>
#include <cmath>
#include <string>

#include "qfb/bloch.hpp"
#include "qfb/errors.hpp"
#include "qfb/sme.hpp"

namespace qfb {

struct ProtocolCoefficients {
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;

    std::array<double, 4> as_array() const noexcept { return {c0, c1, c2, c3}; }
    static ProtocolCoefficients from_array(const std::array<double, 4>& c) noexcept {
        return {c[0], c[1], c[2], c[3]};
    }

    void validate() const {
        const auto c = as_array();
        for (int i = 0; i < 4; ++i) {
            if (!std::isfinite(c[i])) throw ConfigError("c" + std::to_string(i), "must be finite");
        }
        if (std::abs(c0) > pi + 1e-12) throw ConfigError("c0", "|c0| must be <= pi");
    }

    friend bool operator==(const ProtocolCoefficients&, const ProtocolCoefficients&) = default;
};

/// alpha = c0 + c1 theta + c2 theta^2 + c3 theta^3, wrapped to (-pi, pi].
///
/// c0 enters without a sign flip: for |c0| = pi/2 the angles +-pi/2 + c1 theta
/// name the same observable up to its sign, so the right-angle measurement
/// tracks either side of the Bloch vector automatically.
inline double measurement_angle(double theta, const ProtocolCoefficients& c) noexcept {
    return wrap_angle(c.c0 + theta * (c.c1 + theta * (c.c2 + theta * c.c3)));
}

/// Fit parameters of c1(omega) = -A - B (1 - exp(-r omega / k)), one row per
/// damping rate, with the fit residual mean m and spread sigma.
struct PublishedProtocol {
    double A = 0.500;
    double B = 0.186;
    double r = 0.476;
    double m = 0.002;
    double sigma = 0.007;
    double switch_ratio = 45.0;  // omega/k where c0 jumps from 0 to pi/2
    double gamma_table = 0.1;    // gamma/k this row was fitted at

    void validate() const {
        if (!(A > 0.0)) throw ConfigError("A", "must be > 0");
        if (!(B > 0.0)) throw ConfigError("B", "must be > 0");
        if (!(r > 0.0)) throw ConfigError("r", "must be > 0");
        if (!(switch_ratio >= 30.0 && switch_ratio <= 60.0)) {
            throw ConfigError("switch_ratio", "must lie in [30, 60]");
        }
    }

    /// Tabulated rows for gamma/k in {0.1, 0.2, 0.3}. Other rates need
    /// explicit parameters.
    static PublishedProtocol for_gamma(double gamma_over_k) {
        struct Row { double g, A, B, r, m, s; };
        static constexpr Row rows[] = {
            {0.1, 0.500, 0.186, 0.476, 0.002, 0.007},
            {0.2, 0.479, 0.211, 0.705, -0.005, 0.011},
            {0.3, 0.478, 0.217, 0.529, 0.001, 0.008},
        };
        for (const auto& row : rows) {
            if (std::abs(gamma_over_k - row.g) < 1e-9) {
                return {row.A, row.B, row.r, row.m, row.s, 45.0, row.g};
            }
        }
        throw ConfigError("gamma",
                          "no tabulated protocol for gamma/k=" + std::to_string(gamma_over_k) +
                              "; supply A, B, r or run the optimizer");
    }
};

/// c1 of the published law at a given feedback strength.
inline double published_c1(double omega_over_k, const PublishedProtocol& proto) noexcept {
    return -proto.A - proto.B * (1.0 - std::exp(-proto.r * omega_over_k));
}

inline ProtocolCoefficients published_coefficients(double omega, double k,
                                                   const PublishedProtocol& proto) {
    if (!(omega >= 0.0)) throw ConfigError("omega", "must be >= 0");
    if (!(k > 0.0)) throw ConfigError("k", "must be > 0");
    const double ratio = omega / k;
    return {ratio < proto.switch_ratio ? 0.0 : pi / 2.0, published_c1(ratio, proto), 0.0, 0.0};
}

/// Signed rotation speed towards the target, limited so that one step never
/// rotates past theta = 0.
inline double feedback_rotation(double theta, double omega, double dt) noexcept {
    return sign(theta) * std::min(omega, std::abs(theta) / dt);
}

/// A complete feedback protocol: the angle law plus the bounded rotation.
class ControlPolicy {
public:
    ControlPolicy() = default;

    static ControlPolicy law(const ProtocolCoefficients& coeffs, double omega) {
        coeffs.validate();
        if (!(omega >= 0.0)) throw ConfigError("omega", "must be >= 0");
        ControlPolicy p;
        p.coeffs_ = coeffs;
        p.omega_ = omega;
        return p;
    }

    /// Measures in the eigenbasis of the state, alpha = theta.
    static ControlPolicy aligned(double omega) { return law({0.0, -1.0, 0.0, 0.0}, omega); }

    static ControlPolicy published(double omega, double k, const PublishedProtocol& proto) {
        proto.validate();
        return law(published_coefficients(omega, k, proto), omega);
    }

    Control operator()(PolarState s, double dt) const noexcept {
        return {measurement_angle(-s.theta, coeffs_), feedback_rotation(s.theta, omega_, dt)};
    }

    const ProtocolCoefficients& coefficients() const noexcept { return coeffs_; }
    double omega() const noexcept { return omega_; }

private:
    ProtocolCoefficients coeffs_{};
    double omega_ = 0.0;
};

}  // namespace qfb
