#pragma once

// Small dense BFGS with central finite-difference gradients and a
// backtracking Armijo line search, for objectives that are expensive and
// only piecewise smooth (Monte Carlo estimates on frozen noise).

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>

namespace qfb {

struct BfgsOptions {
    double fd_step = 1e-2;          // central-difference half-width
    std::size_t max_evaluations = 40;
    double gradient_tolerance = 1e-8;
    double step_tolerance = 1e-3;   // stop when a step moves less than this
    double initial_step = 0.25;     // cap on the first step length
};

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double initial_value = 0.0;
    std::size_t evaluations = 0;
    std::size_t iterations = 0;
    bool converged = false;
};

class Bfgs {
public:
    using Objective = std::function<double(const Eigen::VectorXd&)>;

    Bfgs(Objective f, BfgsOptions options) : f_(std::move(f)), options_(options) {}

    BfgsResult minimize(Eigen::VectorXd x) {
        BfgsResult out;
        evaluations_ = 0;
        best_value_ = std::numeric_limits<double>::infinity();
        const auto n = x.size();
        double fx = eval(x);
        out.initial_value = fx;

        Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);  // inverse Hessian
        Eigen::VectorXd g;
        if (!gradient(x, g)) return finish(out, false);
        bool first = true;

        while (evaluations_ < options_.max_evaluations) {
            ++out.iterations;
            if (g.norm() < options_.gradient_tolerance) return finish(out, true);
            Eigen::VectorXd dir = -h * g;
            if (dir.dot(g) >= 0.0) {
                h.setIdentity();
                dir = -g;
            }
            double step = 1.0;
            if (first && dir.norm() > options_.initial_step) step = options_.initial_step / dir.norm();

            // Backtracking with the Armijo condition.
            bool accepted = false;
            Eigen::VectorXd trial;
            double ft = 0.0;
            while (evaluations_ < options_.max_evaluations) {
                trial = x + step * dir;
                ft = eval(trial);
                if (ft <= fx + 1e-4 * step * g.dot(dir)) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
                if (step * dir.norm() < 0.25 * options_.step_tolerance) break;
            }
            if (!accepted) return finish(out, (step * dir.norm()) < options_.step_tolerance);

            const Eigen::VectorXd s = trial - x;
            x = trial;
            fx = ft;
            if (s.norm() < options_.step_tolerance) return finish(out, true);

            Eigen::VectorXd g_next;
            if (!gradient(x, g_next)) return finish(out, false);
            const Eigen::VectorXd y = g_next - g;
            const double sy = s.dot(y);
            if (first && sy > 0.0) {
                h *= sy / y.squaredNorm();
            }
            if (sy > 1e-12 * s.norm() * y.norm()) {
                const double rho = 1.0 / sy;
                const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
                h = (eye - rho * s * y.transpose()) * h * (eye - rho * y * s.transpose()) +
                    rho * s * s.transpose();
            }
            g = g_next;
            first = false;
        }
        return finish(out, false);
    }

private:
    // Every evaluation, line-search and gradient probes included, competes
    // for the returned point.
    double eval(const Eigen::VectorXd& x) {
        ++evaluations_;
        const double v = f_(x);
        if (v < best_value_) {
            best_value_ = v;
            best_x_ = x;
        }
        return v;
    }

    bool gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        const auto n = x.size();
        if (evaluations_ + 2 * static_cast<std::size_t>(n) > options_.max_evaluations) return false;
        g.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd lo = x, hi = x;
            lo[i] -= options_.fd_step;
            hi[i] += options_.fd_step;
            g[i] = (eval(hi) - eval(lo)) / (2.0 * options_.fd_step);
        }
        return true;
    }

    BfgsResult finish(BfgsResult& out, bool converged) const {
        out.x = best_x_;
        out.value = best_value_;
        out.evaluations = evaluations_;
        out.converged = converged;
        return out;
    }

    Objective f_;
    BfgsOptions options_;
    std::size_t evaluations_ = 0;
    Eigen::VectorXd best_x_;
    double best_value_ = std::numeric_limits<double>::infinity();
};

}  // namespace qfb
