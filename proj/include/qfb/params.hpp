#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "qfb/errors.hpp"

namespace qfb {

/// Physical rates and integration controls. Rates are in units of the
/// measurement strength when k = 1.
struct SimParams {
    double k = 1.0;       // measurement strength; 0 switches the measurement off
    double gamma = 0.1;   // thermal damping rate
    double nT = 0.1;      // thermal occupation
    double omega = 0.0;   // maximum feedback rotation speed
    double dt = 1e-4;     // integration step
    double t_burn = 0.0;  // discarded transient
    double t_avg = 1.0;   // averaging window
    std::uint64_t seed = 1;

    /// Largest rate the explicit step has to resolve.
    double fastest_rate() const noexcept {
        return std::max({k, gamma * (nT + 1.0), omega});
    }

    /// Throws ConfigError naming the first offending field.
    void validate() const {
        auto require = [](bool ok, const char* field, const char* what) {
            if (!ok) throw ConfigError(field, what);
        };
        require(std::isfinite(k) && k >= 0.0, "k", "must be finite and >= 0");
        require(std::isfinite(gamma) && gamma >= 0.0, "gamma", "must be finite and >= 0");
        require(std::isfinite(nT) && nT >= 0.0, "nT", "must be finite and >= 0");
        require(std::isfinite(omega) && omega >= 0.0, "omega", "must be finite and >= 0");
        require(std::isfinite(dt) && dt > 0.0, "dt", "must be finite and > 0");
        require(std::isfinite(t_burn) && t_burn >= 0.0, "t_burn", "must be finite and >= 0");
        require(std::isfinite(t_avg) && t_avg > 0.0, "t_avg", "must be finite and > 0");
        require(dt * fastest_rate() <= 0.1 + 1e-12, "dt",
                "dt * max(k, gamma*(nT+1), omega) must be <= 0.1");
    }
};

}  // namespace qfb
