#pragma once

// Trajectory ensembles for steady-state error estimates.
//
// Trajectory i always draws its noise from stream (seed, i). Results are
// stored by index and reduced in index order, so estimates are bit-identical
// for any worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "qfb/bloch.hpp"
#include "qfb/errors.hpp"
#include "qfb/params.hpp"
#include "qfb/policy.hpp"
#include "qfb/rng.hpp"
#include "qfb/sme.hpp"

namespace qfb {

struct EnsembleEstimate {
    double epsilon_mean = 0.0;
    double std_error = 0.0;
    std::size_t n_traj = 0;
    double t_burn = 0.0;
    double t_avg = 0.0;
    std::uint64_t seed = 0;
    // Window halves, for stationarity checks.
    double first_half_mean = 0.0;
    double second_half_mean = 0.0;
    double half_difference_std_error = 0.0;
    double theta2_mean = 0.0;
    double theta2_std_error = 0.0;
};

struct PairedEstimate {
    double mean_difference = 0.0;  // eps_A - eps_B
    double std_error = 0.0;
    EnsembleEstimate a;
    EnsembleEstimate b;
};

struct EnsembleOptions {
    unsigned workers = 0;                  // 0: hardware concurrency
    std::optional<PolarState> initial;     // default: thermal state
    std::uint64_t first_index = 0;         // offset into the stream space
};

/// Sample mean and standard error of the mean, summed in index order.
struct MeanAndError {
    double mean = 0.0;
    double std_error = 0.0;
};

inline MeanAndError mean_and_error(const std::vector<double>& xs) {
    const auto n = static_cast<double>(xs.size());
    if (xs.empty()) return {};
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / n;
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

inline unsigned resolve_workers(unsigned requested, std::size_t jobs) {
    unsigned w = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(w, std::max<std::size_t>(jobs, 1)));
}

/// Runs job(i) for i in [0, n) on a bounded pool. The first exception thrown
/// by any job is rethrown after all workers stop.
template <typename Job>
void parallel_for(std::size_t n, unsigned workers, Job&& job) {
    const unsigned w = resolve_workers(workers, n);
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(w);
    for (unsigned t = 0; t < w; ++t) pool.emplace_back(worker);
    pool.clear();
    if (error) std::rethrow_exception(error);
}

/// Runs n trajectories and returns their summaries in index order. Numerical
/// failures are rethrown with the trajectory index and seed attached.
template <Policy P>
std::vector<TrajectorySummary> run_ensemble(const SimParams& params, const P& policy,
                                            std::size_t n_traj, const EnsembleOptions& options = {}) {
    params.validate();
    const PolarState p0 = options.initial.value_or(thermal_equilibrium(params.nT));
    std::vector<TrajectorySummary> out(n_traj);
    parallel_for(n_traj, options.workers, [&](std::size_t i) {
        const std::uint64_t index = options.first_index + i;
        WienerSource noise(params.seed, index);
        try {
            out[i] = simulate_trajectory(p0, policy, params, noise);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " [trajectory " + std::to_string(index) +
                                 ", seed " + std::to_string(params.seed) + "]");
        }
    });
    return out;
}

inline EnsembleEstimate summarize(const std::vector<TrajectorySummary>& runs,
                                  const SimParams& params) {
    std::vector<double> eps, first, second, diff, theta2;
    eps.reserve(runs.size());
    for (const auto& r : runs) {
        eps.push_back(r.epsilon_mean);
        first.push_back(r.epsilon_first_half);
        second.push_back(r.epsilon_second_half);
        diff.push_back(r.epsilon_first_half - r.epsilon_second_half);
        theta2.push_back(r.theta2_mean);
    }
    const auto e = mean_and_error(eps);
    const auto t2 = mean_and_error(theta2);
    EnsembleEstimate est;
    est.epsilon_mean = e.mean;
    est.std_error = e.std_error;
    est.n_traj = runs.size();
    est.t_burn = params.t_burn;
    est.t_avg = params.t_avg;
    est.seed = params.seed;
    est.first_half_mean = mean_and_error(first).mean;
    est.second_half_mean = mean_and_error(second).mean;
    est.half_difference_std_error = mean_and_error(diff).std_error;
    est.theta2_mean = t2.mean;
    est.theta2_std_error = t2.std_error;
    return est;
}

/// Steady-state error: per-trajectory time averages over the window, then the
/// mean and standard error across trajectories.
template <Policy P>
EnsembleEstimate estimate_steady_error(const SimParams& params, const P& policy,
                                       std::size_t n_traj, const EnsembleOptions& options = {}) {
    if (n_traj < 2) throw ConfigError("n_traj", "must be >= 2");
    return summarize(run_ensemble(params, policy, n_traj, options), params);
}

/// Runs two policies on identical noise streams and estimates eps_A - eps_B.
template <Policy PA, Policy PB>
PairedEstimate paired_difference(const SimParams& params, const PA& a, const PB& b,
                                 std::size_t n_traj, const EnsembleOptions& options = {}) {
    if (n_traj < 2) throw ConfigError("n_traj", "must be >= 2");
    const auto runs_a = run_ensemble(params, a, n_traj, options);
    const auto runs_b = run_ensemble(params, b, n_traj, options);
    std::vector<double> diff(n_traj);
    for (std::size_t i = 0; i < n_traj; ++i) diff[i] = runs_a[i].epsilon_mean - runs_b[i].epsilon_mean;
    const auto d = mean_and_error(diff);
    return {d.mean, d.std_error, summarize(runs_a, params), summarize(runs_b, params)};
}

/// Heuristic burn-in max(10/gamma_eff, 5 pi/omega, 10/k), gamma_eff =
/// gamma (1 + 2 nT). Terms with a vanishing rate drop out; a t_burn set
/// explicitly in a run configuration takes precedence.
inline double burn_in_heuristic(const SimParams& params) {
    double t = params.k > 0.0 ? 10.0 / params.k : 0.0;
    const double gamma_eff = params.gamma * (1.0 + 2.0 * params.nT);
    if (gamma_eff > 0.0) t = std::max(t, 10.0 / gamma_eff);
    if (params.omega > 0.0 && std::isfinite(params.omega)) t = std::max(t, 5.0 * pi / params.omega);
    return t;
}

/// Ensemble-mean error as a function of time, binned, for stationarity checks.
struct ProfileBin {
    double t_mid = 0.0;
    double mean = 0.0;
    double std_error = 0.0;
};

template <Policy P>
std::vector<ProfileBin> epsilon_profile(const SimParams& params, const P& policy,
                                        std::size_t n_traj, std::size_t bins,
                                        const EnsembleOptions& options = {}) {
    params.validate();
    if (bins == 0) throw ConfigError("bins", "must be > 0");
    const std::size_t n_total = steps_for(params.t_burn + params.t_avg, params.dt);
    const std::size_t stride = std::max<std::size_t>(1, n_total / (bins * 16));
    const PolarState p0 = options.initial.value_or(thermal_equilibrium(params.nT));
    std::vector<std::vector<double>> per_traj(n_traj, std::vector<double>(bins, 0.0));
    parallel_for(n_traj, options.workers, [&](std::size_t i) {
        WienerSource noise(params.seed, options.first_index + i);
        const auto r = simulate_trajectory(p0, policy, params, noise, {stride});
        std::vector<std::size_t> counts(bins, 0);
        const double total = params.t_burn + params.t_avg;
        for (const auto& s : r.path) {
            auto b = static_cast<std::size_t>(s.t / total * static_cast<double>(bins));
            b = std::min(b, bins - 1);
            per_traj[i][b] += s.epsilon;
            ++counts[b];
        }
        for (std::size_t b = 0; b < bins; ++b) {
            if (counts[b] > 0) per_traj[i][b] /= static_cast<double>(counts[b]);
        }
    });
    std::vector<ProfileBin> out(bins);
    const double width = (params.t_burn + params.t_avg) / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        std::vector<double> xs(n_traj);
        for (std::size_t i = 0; i < n_traj; ++i) xs[i] = per_traj[i][b];
        const auto m = mean_and_error(xs);
        out[b] = {(static_cast<double>(b) + 0.5) * width, m.mean, m.std_error};
    }
    return out;
}

/// Weighted least-squares slope of the profile over [t_from, inf), with its
/// standard error.
inline MeanAndError profile_slope(const std::vector<ProfileBin>& bins, double t_from) {
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (const auto& b : bins) {
        if (b.t_mid < t_from) continue;
        const double w = b.std_error > 0.0 ? 1.0 / (b.std_error * b.std_error) : 1.0;
        sw += w;
        swx += w * b.t_mid;
        swy += w * b.mean;
        swxx += w * b.t_mid * b.t_mid;
        swxy += w * b.t_mid * b.mean;
    }
    const double det = sw * swxx - swx * swx;
    if (!(det > 0.0)) return {};
    return {(sw * swxy - swx * swy) / det, std::sqrt(sw / det)};
}

/// Header of the ensemble results CSV.
inline constexpr const char* ensemble_csv_header =
    "omega_over_k,c0,c1,c2,c3,gamma,nT,n_traj,dt,t_burn,t_avg,epsilon_mean,std_error,seed,"
    "config_hash";

inline void write_ensemble_row(std::ostream& os, const SimParams& params,
                               const ProtocolCoefficients& c, const EnsembleEstimate& e,
                               const std::string& config_hash) {
    os << std::setprecision(17) << params.omega / params.k << ',' << c.c0 << ',' << c.c1 << ','
       << c.c2 << ',' << c.c3 << ',' << params.gamma << ',' << params.nT << ',' << e.n_traj << ','
       << params.dt << ',' << e.t_burn << ',' << e.t_avg << ',' << e.epsilon_mean << ','
       << e.std_error << ',' << e.seed << ',' << config_hash << '\n';
}

}  // namespace qfb
