#pragma once

#include <stdexcept>
#include <string>

namespace qfb {

/// A parameter or configuration value failed validation. `field()` names it.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Integration produced a non-finite value or otherwise blew up.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qfb
