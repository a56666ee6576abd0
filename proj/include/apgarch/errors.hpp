#pragma once

#include <stdexcept>
#include <string>

namespace apgarch {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vector lengths disagree with the declared model order.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A parameter constraint does not hold. `constraint()` names it, e.g. "omega>0".
class ConstraintViolation : public Error {
public:
    explicit ConstraintViolation(std::string constraint)
        : Error("constraint violated: " + constraint), constraint_(std::move(constraint)) {}

    const std::string& constraint() const noexcept { return constraint_; }

private:
    std::string constraint_;
};

/// The volatility recursion left the representable range (explosive region).
class NonFiniteVolatility : public Error {
public:
    using Error::Error;
};

class LagTooLarge : public Error {
public:
    using Error::Error;
};

/// Symmetric factorization failed or the condition number exceeded the limit.
class SingularMatrix : public Error {
public:
    using Error::Error;
};

/// Input data could not be read or transformed.
class DataError : public Error {
public:
    using Error::Error;
};

/// Preconditions of an operation are not met by otherwise well-formed input.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Monte Carlo study stopped because too many replications failed.
class StudyAborted : public Error {
public:
    using Error::Error;
};

}  // namespace apgarch
