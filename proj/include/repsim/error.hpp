#ifndef REPSIM_ERROR_HPP
#define REPSIM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace repsim {

/// Base for every failure raised by the library. Carries a short category
/// tag ("shape", "io", "format", "numeric", ...) so the CLI can print a
/// single machine-parseable line.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

/// Bad input data: malformed files, shape disagreements, non-finite values.
class DataError : public Error {
public:
    using Error::Error;
};

/// Numerically pathological input (non-convergence, degenerate covariance).
class NumericError : public Error {
public:
    explicit NumericError(const std::string& message) : Error("numeric", message) {}
};

/// Filesystem failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io", message) {}
};

} // namespace repsim

#endif // REPSIM_ERROR_HPP
