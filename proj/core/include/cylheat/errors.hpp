#pragma once

#include <stdexcept>
#include <string>

namespace cylheat {

// Input outside the mathematical domain of an operation (alpha, t <= 0, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Exponent or parameter combination violating a stated precondition.
struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Iteration or quadrature that did not reach its tolerance.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Requested regime that the numerics deliberately do not cover.
struct UnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cylheat
