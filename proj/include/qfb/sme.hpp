#pragma once

// Stochastic master equation for a continuously monitored qubit with thermal
// damping and a feedback rotation about y, integrated in Bloch-vector form.
//
// Superoperators and their Bloch images (m is the measured axis):
//   -k[s_m,[s_m,rho]]                  ->  -4k (a - m (m.a))
//   sqrt(2k) H[s_m] rho dW             ->  sqrt(8k) (m - (m.a) a) dW
//   thermal damping, rates g(n+1), g n ->  d ax = -(g/2)(1+2n) ax
//                                           d az = -g(1+2n) az - g
//   H = (mu/2) s_y                      ->  rotation of theta by -mu dt

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "qfb/bloch.hpp"
#include "qfb/errors.hpp"
#include "qfb/params.hpp"
#include "qfb/rng.hpp"

namespace qfb {

/// Measured observable s_alpha = sin(alpha) sx - cos(alpha) sz.
struct MeasurementAxis {
    double alpha = 0.0;

    static MeasurementAxis make(double alpha) noexcept { return {wrap_angle(alpha)}; }

    BlochVector direction() const noexcept { return {std::sin(alpha), 0.0, -std::cos(alpha)}; }
};

struct StepResult {
    PolarState state;
    double dy = 0.0;  // measurement-record increment
    double dW = 0.0;  // Wiener increment consumed
};

/// Control applied over one step: measurement angle and signed rotation speed.
/// Positive mu rotates theta towards negative values.
struct Control {
    double alpha = 0.0;
    double mu = 0.0;
};

/// Anything that maps the current state and step size to a Control.
template <typename P>
concept Policy = requires(const P& p, PolarState s, double dt) {
    { p(s, dt) } -> std::convertible_to<Control>;
};

/// <s_alpha> = a cos(alpha - theta).
inline double expectation_sigma_alpha(PolarState p, MeasurementAxis axis) noexcept {
    return p.a * std::cos(axis.alpha - p.theta);
}

/// Drift and diffusion of the Bloch vector for measurement plus thermal
/// damping, without the Hamiltonian part. This is the literal Ito form; the
/// integrator below uses a positivity-preserving map with the same expansion.
struct BlochIncrement {
    BlochVector drift;
    BlochVector diffusion;
};

inline BlochIncrement bloch_increment(BlochVector b, MeasurementAxis axis, double k, double gamma,
                                      double nT) noexcept {
    const BlochVector m = axis.direction();
    const double ma = m.ax * b.ax + m.ay * b.ay + m.az * b.az;
    const double dephase = 4.0 * k;
    const double transverse = 0.5 * gamma * (1.0 + 2.0 * nT);
    const double longitudinal = gamma * (1.0 + 2.0 * nT);
    const double root = std::sqrt(8.0 * k);
    return {
        {-dephase * (b.ax - m.ax * ma) - transverse * b.ax,
         -dephase * (b.ay - m.ay * ma) - transverse * b.ay,
         -dephase * (b.az - m.az * ma) - longitudinal * b.az - gamma},
        {root * (m.ax - ma * b.ax), root * (m.ay - ma * b.ay), root * (m.az - ma * b.az)},
    };
}

/// Steps the Bloch vector for one dt with precomputed thermal factors.
///
/// The measurement acts through the Kraus operator
///   M = (1 - 2k dt + k dY^2) I + sqrt(2k) dY s_m,   dY = sqrt(8k) <s_m> dt + dW,
/// followed by renormalization. Its Ito expansion reproduces the SME
/// through O(dt) including the dW^2 correction, and it maps states to states,
/// so pure states stay pure instead of being clipped at |a| = 1. Thermal
/// damping is applied as its exact affine flow, and the Hamiltonian as an
/// exact rotation.
class SmeIntegrator {
public:
    explicit SmeIntegrator(const SimParams& params)
        : k_(params.k), dt_(params.dt), root_(std::sqrt(8.0 * params.k)) {
        const double rate = params.gamma * (1.0 + 2.0 * params.nT);
        transverse_ = std::exp(-0.5 * rate * params.dt);
        longitudinal_ = std::exp(-rate * params.dt);
        az_eq_ = -1.0 / (1.0 + 2.0 * params.nT);
    }

    struct Result {
        BlochVector state;
        double dy;
    };

    /// mu is the signed rotation speed: theta -> theta - mu dt.
    Result step(BlochVector b, MeasurementAxis axis, double mu, double dW) const noexcept {
        const BlochVector m = axis.direction();
        const double ma = m.ax * b.ax + m.ay * b.ay + m.az * b.az;
        const double dY = root_ * ma * dt_ + dW;

        BlochVector out = b;
        if (k_ > 0.0) {
            const double alpha = 1.0 - 2.0 * k_ * dt_ + k_ * dY * dY;
            const double beta = std::sqrt(2.0 * k_) * dY;
            const double a2 = alpha * alpha - beta * beta;
            const double cross = 2.0 * alpha * beta;
            const double along = 2.0 * beta * beta * ma;
            const double trace = alpha * alpha + beta * beta + cross * ma;
            out = {(a2 * b.ax + cross * m.ax + along * m.ax) / trace,
                   (a2 * b.ay + cross * m.ay + along * m.ay) / trace,
                   (a2 * b.az + cross * m.az + along * m.az) / trace};
        }

        out.ax *= transverse_;
        out.ay *= transverse_;
        out.az = az_eq_ + (out.az - az_eq_) * longitudinal_;

        if (mu != 0.0) {
            // (x, -z) = a (sin theta, cos theta); rotate theta by -mu dt.
            const double c = std::cos(mu * dt_);
            const double s = std::sin(mu * dt_);
            const double x = out.ax;
            const double u = -out.az;
            out.ax = x * c - u * s;
            out.az = -(u * c + x * s);
        }
        return {out, k_ > 0.0 ? dY / root_ : 0.0};
    }

private:
    double k_;
    double dt_;
    double root_;
    double transverse_ = 1.0;
    double longitudinal_ = 1.0;
    double az_eq_ = -1.0;
};

namespace detail {

[[noreturn]] inline void blow_up(PolarState p, MeasurementAxis axis, double mu, double dW) {
    std::ostringstream os;
    os << std::setprecision(17) << "sme_step: non-finite state from a=" << p.a
       << " theta=" << p.theta << " alpha=" << axis.alpha << " mu=" << mu << " dW=" << dW;
    throw NumericalError(os.str());
}

/// Back to the xz-plane: y removed by a z-rotation that keeps the sign of ax,
/// length clamped to 1.
inline BlochVector settle_bloch(BlochVector b) noexcept {
    const double side = b.ax < 0.0 ? -1.0 : 1.0;
    BlochVector plane = rotate_to_xz(b);
    plane.ax *= side;
    const double a2 = plane.ax * plane.ax + plane.az * plane.az;
    if (a2 > 1.0) {
        const double s = 1.0 / std::sqrt(a2);
        plane.ax *= s;
        plane.az *= s;
    }
    return plane;
}

/// Polar form of an xz-plane vector; theta = 0 at the origin.
inline PolarState polar_of(BlochVector plane) noexcept {
    const double a = std::sqrt(plane.ax * plane.ax + plane.az * plane.az);
    if (a == 0.0) return {0.0, 0.0};
    return {std::min(a, 1.0), std::atan2(plane.ax, -plane.az)};
}

inline PolarState settle(BlochVector b) noexcept { return polar_of(settle_bloch(b)); }

inline bool finite(BlochVector b) noexcept {
    return std::isfinite(b.ax) && std::isfinite(b.ay) && std::isfinite(b.az);
}

}  // namespace detail

/// One step of the monitored, damped, driven qubit from a polar state. See
/// SmeIntegrator for the scheme. dy is the record increment
/// <s_alpha> dt + dW / sqrt(8k), reported as 0 when k = 0.
inline StepResult sme_step(PolarState p, MeasurementAxis axis, double mu, const SimParams& params,
                           double dW) {
    if (std::abs(mu) > params.omega * (1.0 + 1e-12)) {
        throw std::invalid_argument("sme_step: |mu| exceeds omega");
    }
    const SmeIntegrator integrator(params);
    const auto r = integrator.step(from_polar(p), axis, mu, dW);
    if (!detail::finite(r.state) || !std::isfinite(r.dy)) detail::blow_up(p, axis, mu, dW);
    return {detail::settle(r.state), r.dy, dW};
}

/// One row of a recorded path.
struct PathSample {
    double t = 0.0;
    double a = 0.0;
    double theta = 0.0;
    double alpha = 0.0;
    double mu = 0.0;
    double dy = 0.0;
    double epsilon = 0.0;
};

struct TrajectoryOptions {
    std::size_t path_stride = 0;  // 0: no path
};

struct TrajectorySummary {
    double epsilon_mean = 0.0;         // time average over the averaging window
    double epsilon_first_half = 0.0;
    double epsilon_second_half = 0.0;
    double theta2_mean = 0.0;          // time average of theta^2 over the window
    PolarState final_state;
    std::size_t steps = 0;
    std::vector<PathSample> path;
};

/// Number of steps covering a duration.
inline std::size_t steps_for(double duration, double dt) {
    return static_cast<std::size_t>(std::llround(duration / dt));
}

/// Runs one trajectory from p0 for t_burn + t_avg and time-averages the error
/// probability over the window after the burn-in.
template <Policy P>
TrajectorySummary simulate_trajectory(PolarState p0, const P& policy, const SimParams& params,
                                      WienerSource& noise, TrajectoryOptions options = {}) {
    params.validate();
    if (params.t_avg < 10.0 * params.dt) {
        throw ConfigError("t_avg", "averaging window shorter than 10 steps");
    }
    const std::size_t n_burn = steps_for(params.t_burn, params.dt);
    const std::size_t n_avg = steps_for(params.t_avg, params.dt);
    const std::size_t half = n_avg / 2;
    const std::size_t n_total = n_burn + n_avg;

    TrajectorySummary out;
    if (options.path_stride > 0) out.path.reserve(n_total / options.path_stride + 2);

    const SmeIntegrator integrator(params);
    double sum_first = 0.0;
    double sum_second = 0.0;
    double sum_theta2 = 0.0;
    PolarState state = p0;
    BlochVector bloch = from_polar(p0);
    for (std::size_t n = 0; n < n_total; ++n) {
        const Control u = policy(state, params.dt);
        if (std::abs(u.mu) > params.omega * (1.0 + 1e-12)) {
            throw std::invalid_argument("simulate_trajectory: policy returned |mu| > omega");
        }
        const MeasurementAxis axis = MeasurementAxis::make(u.alpha);
        const double dW = noise.increment(params.dt);
        const auto r = integrator.step(bloch, axis, u.mu, dW);
        if (!detail::finite(r.state)) detail::blow_up(state, axis, u.mu, dW);

        if (options.path_stride > 0 && n % options.path_stride == 0) {
            out.path.push_back({static_cast<double>(n) * params.dt, state.a, state.theta, axis.alpha,
                                u.mu, r.dy, error_probability(state)});
        }
        bloch = detail::settle_bloch(r.state);
        state = detail::polar_of(bloch);
        if (n >= n_burn) {
            const double eps = error_probability(state);
            (n - n_burn < half ? sum_first : sum_second) += eps;
            sum_theta2 += state.theta * state.theta;
        }
    }
    if (options.path_stride > 0 && n_total % options.path_stride == 0) {
        out.path.push_back({static_cast<double>(n_total) * params.dt, state.a, state.theta, 0.0,
                            0.0, 0.0, error_probability(state)});
    }

    out.epsilon_mean = (sum_first + sum_second) / static_cast<double>(n_avg);
    out.epsilon_first_half = half > 0 ? sum_first / static_cast<double>(half) : 0.0;
    out.epsilon_second_half = sum_second / static_cast<double>(n_avg - half);
    out.theta2_mean = sum_theta2 / static_cast<double>(n_avg);
    out.final_state = state;
    out.steps = n_total;
    return out;
}

/// Writes a path as CSV with header t,a,theta,alpha,mu,dy,epsilon.
inline void write_path_csv(std::ostream& os, const std::vector<PathSample>& path) {
    os << "t,a,theta,alpha,mu,dy,epsilon\n";
    os << std::setprecision(17);
    for (const auto& s : path) {
        os << s.t << ',' << s.a << ',' << s.theta << ',' << s.alpha << ',' << s.mu << ',' << s.dy
           << ',' << s.epsilon << '\n';
    }
}

}  // namespace qfb
