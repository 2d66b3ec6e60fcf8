#pragma once

#include <stdexcept>
#include <string>

namespace jsoq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A rate is non-positive or non-finite.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// The requested operation needs rho < 1.
class Unstable : public Error {
public:
    Unstable(const std::string& what, double rho) : Error(what), rho_(rho) {}
    double rho() const noexcept { return rho_; }

private:
    double rho_;
};

/// An argument lies outside the domain of a root solver or estimator.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A quadratic discriminant went negative where a real root is required.
class NumericalDomainError : public DomainError {
public:
    using DomainError::DomainError;
};

/// A recursion coefficient has a vanishing denominator.
class DegenerateParameter : public Error {
public:
    using Error::Error;
};

/// The series did not reach the requested tolerance within the term budget,
/// or an evaluation came out negative beyond truncation noise.
class TruncationError : public Error {
public:
    TruncationError(const std::string& what, double achieved) : Error(what), achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// A stationary field was asked for a state outside its support.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// The truncated-chain solve failed its residual gate.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual) : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Internal consistency check failed (e.g. non-positive normalization constant).
class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace jsoq
