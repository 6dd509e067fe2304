#pragma once

// Least-squares fit of the saturating law c1(w) = -A - B (1 - exp(-r w)),
// w = omega/k, with residual statistics.

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "qfb/errors.hpp"

namespace qfb {

struct C1Point {
    double omega_over_k = 0.0;
    double c1 = 0.0;
};

struct C1Fit {
    double A = 0.0;
    double B = 0.0;
    double r = 0.0;
    double m = 0.0;      // mean residual (data - model)
    double sigma = 0.0;  // standard deviation of the residuals
};

inline double c1_model(double w, double A, double B, double r) noexcept {
    return -A - B * (1.0 - std::exp(-r * w));
}

namespace detail {

struct C1Residuals {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const std::vector<C1Point>* points;

    int inputs() const { return 3; }
    int values() const { return static_cast<int>(points->size()); }

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
        for (std::size_t i = 0; i < points->size(); ++i) {
            const auto& p = (*points)[i];
            fvec[static_cast<Eigen::Index>(i)] = c1_model(p.omega_over_k, x[0], x[1], x[2]) - p.c1;
        }
        return 0;
    }

    int df(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
        for (std::size_t i = 0; i < points->size(); ++i) {
            const double w = (*points)[i].omega_over_k;
            const double e = std::exp(-x[2] * w);
            const auto row = static_cast<Eigen::Index>(i);
            jac(row, 0) = -1.0;
            jac(row, 1) = -(1.0 - e);
            jac(row, 2) = -x[1] * w * e;
        }
        return 0;
    }
};

}  // namespace detail

/// Fits (A, B, r) by Levenberg-Marquardt from several starting rates and
/// keeps the best. Input order does not matter. Throws ConfigError for fewer
/// than 4 points or 3 distinct abscissae, NumericalError when the fit is
/// rank-deficient at its solution.
inline C1Fit fit_c1_curve(std::vector<C1Point> points) {
    if (points.size() < 4) throw ConfigError("points", "need at least 4 (omega/k, c1) points");
    std::set<double> distinct;
    for (const auto& p : points) {
        if (!std::isfinite(p.omega_over_k) || !std::isfinite(p.c1)) {
            throw ConfigError("points", "non-finite point");
        }
        distinct.insert(p.omega_over_k);
    }
    if (distinct.size() < 3) throw ConfigError("points", "need at least 3 distinct omega/k values");
    std::sort(points.begin(), points.end(), [](const C1Point& a, const C1Point& b) {
        return a.omega_over_k < b.omega_over_k || (a.omega_over_k == b.omega_over_k && a.c1 < b.c1);
    });

    const double w_max = points.back().omega_over_k;
    const double a0 = -points.front().c1;
    const double b0 = -points.back().c1 - a0;

    detail::C1Residuals functor{&points};
    Eigen::VectorXd best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (double scale : {0.1, 0.5, 2.0, 5.0, 20.0}) {
        Eigen::VectorXd x(3);
        x << a0, b0 == 0.0 ? 0.1 : b0, scale / std::max(w_max, 1e-9);
        Eigen::LevenbergMarquardt<detail::C1Residuals> lm(functor);
        lm.parameters.ftol = 1e-15;
        lm.parameters.xtol = 1e-15;
        lm.parameters.maxfev = 4000;
        lm.minimize(x);
        Eigen::VectorXd f(points.size());
        functor(x, f);
        const double cost = f.squaredNorm();
        if (std::isfinite(cost) && x.allFinite() && cost < best_cost) {
            best_cost = cost;
            best = x;
        }
    }

    Eigen::VectorXd f(points.size());
    Eigen::MatrixXd jac(points.size(), 3);
    if (best.size() != 3) throw NumericalError("fit_c1_curve: no finite solution");
    functor(best, f);
    functor.df(best, jac);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
    const auto sv = svd.singularValues();
    if (!(best[2] > 0.0) || sv[2] <= 1e-10 * sv[0]) {
        std::ostringstream os;
        os << "fit_c1_curve: rank-deficient fit (A=" << best[0] << ", B=" << best[1]
           << ", r=" << best[2] << ", rms residual=" << std::sqrt(f.squaredNorm() / f.size())
           << ", singular values " << sv.transpose() << ")";
        throw NumericalError(os.str());
    }

    C1Fit out{best[0], best[1], best[2], 0.0, 0.0};
    const auto n = static_cast<double>(points.size());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) sum += -f[i];
    out.m = sum / n;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) ss += (-f[i] - out.m) * (-f[i] - out.m);
    out.sigma = std::sqrt(ss / (n - 1.0));
    return out;
}

}  // namespace qfb
