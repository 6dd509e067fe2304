#pragma once

// Protocol search: coefficient optimization on frozen noise, the c0 switch
// sweep over feedback strength.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "qfb/bfgs.hpp"
#include "qfb/ensemble.hpp"
#include "qfb/errors.hpp"
#include "qfb/policy.hpp"
#include "qfb/rng.hpp"

namespace qfb {

struct OptimizeOptions {
    std::size_t n_traj = 1000;
    std::size_t budget = 40;        // objective evaluations
    double fd_step = 1e-2;
    std::array<bool, 4> frozen{};   // per coefficient
    unsigned workers = 0;
};

struct OptimizationResult {
    ProtocolCoefficients coefficients;
    EnsembleEstimate estimate;      // re-evaluated on fresh noise
    double crn_initial = 0.0;       // objective at the starting point
    double crn_best = 0.0;          // objective at the returned point
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Seed for the unbiased re-evaluation after a search on `seed`.
inline std::uint64_t fresh_seed(std::uint64_t seed) noexcept { return mix64(seed ^ 0x5eedf00dULL); }

/// Common-random-number objective: the ensemble error of a coefficient set,
/// always on the same trajectories, so it is a deterministic function.
class CrnObjective {
public:
    CrnObjective(SimParams params, std::size_t n_traj, unsigned workers)
        : params_(params), n_traj_(n_traj), workers_(workers) {}

    EnsembleEstimate estimate(const ProtocolCoefficients& c) const {
        ProtocolCoefficients w = c;
        w.c0 = wrap_angle(w.c0);
        EnsembleOptions opts;
        opts.workers = workers_;
        return estimate_steady_error(params_, ControlPolicy::law(w, params_.omega), n_traj_, opts);
    }

    double operator()(const ProtocolCoefficients& c) const { return estimate(c).epsilon_mean; }

private:
    SimParams params_;
    std::size_t n_traj_;
    unsigned workers_;
};

/// Minimizes the steady-state error over c0..c_degree (minus frozen ones)
/// with BFGS on frozen noise, then re-evaluates the result on fresh noise.
/// `converged` is false when the budget ran out first; the best point found
/// is returned either way.
inline OptimizationResult optimize_coefficients(const SimParams& params,
                                                const ProtocolCoefficients& init, int degree,
                                                const OptimizeOptions& options) {
    params.validate();
    init.validate();
    if (degree != 1 && degree != 3) throw ConfigError("degree", "must be 1 or 3");
    if (options.budget < 20) throw ConfigError("budget", "must allow at least 20 evaluations");
    if (!(options.fd_step > 0.0)) throw ConfigError("fd_step", "must be > 0");

    std::vector<int> free;
    for (int i = 0; i <= degree; ++i) {
        if (!options.frozen[static_cast<std::size_t>(i)]) free.push_back(i);
    }
    if (free.empty()) throw ConfigError("frozen", "no free coefficients");

    const CrnObjective objective(params, options.n_traj, options.workers);
    auto base = init.as_array();
    for (int i = degree + 1; i < 4; ++i) base[static_cast<std::size_t>(i)] = 0.0;
    auto expand = [&](const Eigen::VectorXd& x) {
        auto c = base;
        for (std::size_t j = 0; j < free.size(); ++j) c[static_cast<std::size_t>(free[j])] = x[static_cast<Eigen::Index>(j)];
        return ProtocolCoefficients::from_array(c);
    };

    Eigen::VectorXd x0(static_cast<Eigen::Index>(free.size()));
    for (std::size_t j = 0; j < free.size(); ++j) x0[static_cast<Eigen::Index>(j)] = base[static_cast<std::size_t>(free[j])];

    BfgsOptions bo;
    bo.fd_step = options.fd_step;
    bo.max_evaluations = options.budget;
    Bfgs bfgs([&](const Eigen::VectorXd& x) { return objective(expand(x)); }, bo);
    const BfgsResult r = bfgs.minimize(x0);

    OptimizationResult out;
    out.coefficients = expand(r.x);
    out.coefficients.c0 = wrap_angle(out.coefficients.c0);
    out.crn_initial = r.initial_value;
    out.crn_best = r.value;
    out.evaluations = r.evaluations;
    out.converged = r.converged;

    SimParams fresh = params;
    fresh.seed = fresh_seed(params.seed);
    out.estimate = CrnObjective(fresh, options.n_traj, options.workers).estimate(out.coefficients);
    return out;
}

struct C0ScanPoint {
    double c0 = 0.0;
    double epsilon = 0.0;
    double std_error = 0.0;
};

/// Coarse scan of c0 over [0, pi/2] at fixed c1 (same noise at every point).
inline std::vector<C0ScanPoint> scan_c0(const SimParams& params, double c1, std::size_t points,
                                        std::size_t n_traj, unsigned workers = 0) {
    if (points < 2) throw ConfigError("points", "need at least 2 scan points");
    const CrnObjective objective(params, n_traj, workers);
    std::vector<C0ScanPoint> out;
    for (std::size_t i = 0; i < points; ++i) {
        const double c0 = 0.5 * pi * static_cast<double>(i) / static_cast<double>(points - 1);
        const auto e = objective.estimate({c0, c1, 0.0, 0.0});
        out.push_back({c0, e.epsilon_mean, e.std_error});
    }
    return out;
}

/// True when the scan minimum sits at c0 = 0 or c0 = pi/2.
inline bool c0_minimum_at_endpoint(const std::vector<C0ScanPoint>& scan) {
    const auto best = std::min_element(scan.begin(), scan.end(),
                                       [](const auto& a, const auto& b) { return a.epsilon < b.epsilon; });
    return best == scan.begin() || best == scan.end() - 1;
}

struct ProtocolSearch {
    std::vector<C0ScanPoint> scan;
    bool discrete_c0 = false;
    OptimizationResult best;
};

/// Full search at one feedback strength: a coarse c0 scan, then c1 optimized
/// with c0 held at 0 and at pi/2 when the scan puts the minimum at an
/// endpoint, or a joint (c0, c1) search otherwise.
inline ProtocolSearch optimize_protocol(const SimParams& params, double c1_start,
                                        std::size_t scan_points, const OptimizeOptions& options) {
    ProtocolSearch out;
    out.scan = scan_c0(params, c1_start, scan_points, options.n_traj, options.workers);
    out.discrete_c0 = c0_minimum_at_endpoint(out.scan);
    if (out.discrete_c0) {
        OptimizeOptions o = options;
        o.frozen[0] = true;
        std::optional<OptimizationResult> best;
        for (double c0 : {0.0, pi / 2.0}) {
            auto r = optimize_coefficients(params, {c0, c1_start, 0.0, 0.0}, 1, o);
            if (!best || r.crn_best < best->crn_best) best = r;
        }
        out.best = *best;
    } else {
        const auto best = std::min_element(out.scan.begin(), out.scan.end(),
                                           [](const auto& a, const auto& b) { return a.epsilon < b.epsilon; });
        out.best = optimize_coefficients(params, {best->c0, c1_start, 0.0, 0.0}, 1, options);
    }
    return out;
}

struct SwitchPoint {
    double omega_over_k = 0.0;
    double c1 = 0.0;
    EnsembleEstimate at_zero;       // c0 = 0
    EnsembleEstimate at_right;      // c0 = pi/2
    double difference = 0.0;        // eps(c0 = 0) - eps(c0 = pi/2), paired
    double difference_std_error = 0.0;
};

struct SwitchEstimate {
    std::vector<SwitchPoint> points;
    std::optional<double> crossing_omega_over_k;
};

/// Where along omega the right-angle protocol overtakes c0 = 0. Both use the
/// published c1(omega) and share noise at each grid point; the crossing is the
/// first sign change of the difference, linearly interpolated.
inline SwitchEstimate sweep_switch_point(const SimParams& params,
                                         const std::vector<double>& omega_over_k_grid,
                                         std::size_t n_traj, const PublishedProtocol& proto,
                                         const EnsembleOptions& options = {}) {
    if (omega_over_k_grid.size() < 2) throw ConfigError("omega_grid", "need at least 2 points");
    std::vector<double> grid = omega_over_k_grid;
    std::sort(grid.begin(), grid.end());
    if (grid.front() > 20.0 || grid.back() < 70.0) {
        throw ConfigError("omega_grid", "must span at least [20, 70] in units of k");
    }
    SwitchEstimate out;
    for (double ratio : grid) {
        SimParams p = params;
        p.omega = ratio * params.k;
        const double c1 = published_c1(ratio, proto);
        const auto zero = ControlPolicy::law({0.0, c1, 0.0, 0.0}, p.omega);
        const auto right = ControlPolicy::law({pi / 2.0, c1, 0.0, 0.0}, p.omega);
        const auto paired = paired_difference(p, zero, right, n_traj, options);
        out.points.push_back({ratio, c1, paired.a, paired.b, paired.mean_difference, paired.std_error});
    }
    for (std::size_t j = 0; j + 1 < out.points.size(); ++j) {
        const double d0 = out.points[j].difference;
        const double d1 = out.points[j + 1].difference;
        if (d0 < 0.0 && d1 >= 0.0) {
            const double w0 = out.points[j].omega_over_k;
            const double w1 = out.points[j + 1].omega_over_k;
            out.crossing_omega_over_k = w0 + (w1 - w0) * (-d0) / (d1 - d0);
            break;
        }
    }
    return out;
}

}  // namespace qfb
