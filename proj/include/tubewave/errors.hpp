#pragma once

#include <stdexcept>
#include <string>

namespace tubewave {

/// Invalid arguments or inconsistent inputs (CLI exit code 2).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A field or report failed a validation rule (CLI exit code 2).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative solver or quadrature exhausted its budget (CLI exit code 3).
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

namespace detail {
inline void require(bool condition, const std::string& message) {
    if (!condition) throw InputError(message);
}
}  // namespace detail

}  // namespace tubewave
