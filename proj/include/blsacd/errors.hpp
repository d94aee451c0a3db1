#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blsacd {

/// Argument outside the mathematical domain of a function (x < 0, invalid nu, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Quadrature or root finding did not reach its tolerance.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The median recursion overflowed; `step()` is the 1-based time index.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (t=" + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Malformed input files, schema violations, bad tapes.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace blsacd
