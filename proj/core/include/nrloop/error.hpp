#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nrloop {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model or argument violates a documented invariant (bad labels,
/// non-positive linewidths, inconsistent drives, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A closed-form expression was evaluated outside its domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: singular systems, non-convergence, rank deficiency.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The mode-coupling matrix cannot be solved at a given probe offset.
class SingularMatrixError : public NumericalError {
public:
    SingularMatrixError(const std::string& what, double probe_offset, double condition)
        : NumericalError(what), probe_offset_(probe_offset), condition_(condition) {}

    double probe_offset() const noexcept { return probe_offset_; }
    double condition() const noexcept { return condition_; }

private:
    double probe_offset_;
    double condition_;
};

/// Iterative solver ran out of budget. Carries the best iterate seen.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, std::vector<double> best_point, double best_value)
        : NumericalError(what), best_point_(std::move(best_point)), best_value_(best_value) {}

    const std::vector<double>& best_point() const noexcept { return best_point_; }
    double best_value() const noexcept { return best_value_; }

private:
    std::vector<double> best_point_;
    double best_value_;
};

/// A least-squares problem has fewer observations than unknowns, or a
/// design matrix whose columns cannot be told apart.
class IllPosedFitError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace nrloop
