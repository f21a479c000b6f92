#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gplc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Point or matrix dimensions do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent user input (bad spec, bad file, bad config value).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Cholesky factorization of a covariance failed even after jitter.
class SingularCovariance : public Error {
public:
    SingularCovariance(std::size_t leading_minor, const std::string& what)
        : Error(what), leading_minor_(leading_minor) {}

    /// 1-based order of the first leading minor that is not positive.
    [[nodiscard]] std::size_t leading_minor() const noexcept { return leading_minor_; }

private:
    std::size_t leading_minor_;
};

/// The replication budget cannot satisfy the allocation constraints.
class InfeasibleBudget : public Error {
public:
    using Error::Error;
};

} // namespace gplc
