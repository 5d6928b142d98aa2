#pragma once

#include <stdexcept>
#include <string>

namespace thinnet {

// Bad input: malformed config, violated precondition, CFL breach.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A solver failed to converge or produced a nonphysical state.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
    double residual = 0.0;
    NumericalError(const std::string& what, double r) : std::runtime_error(what), residual(r) {}
};

// Velocity changes sign where a single sign is required.
struct SignChangeError : ConfigError {
    using ConfigError::ConfigError;
};

// Neumann data incompatible with the right-hand side.
struct CompatibilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inputs assembled from inconsistent stages.
struct ConsistencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A quantity that must stay positive did not.
struct PositivityError : ConfigError {
    using ConfigError::ConfigError;
};

// Query outside the represented geometry.
struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace thinnet
