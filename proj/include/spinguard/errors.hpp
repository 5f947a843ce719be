#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace spinguard {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class UnsupportedOperator : public Error {
public:
    using Error::Error;
};

/// Raised when a selected level pair has no transverse matrix element.
class ForbiddenTransition : public Error {
public:
    using Error::Error;
};

class DivisionByZero : public Error {
public:
    using Error::Error;
};

class SequenceError : public Error {
public:
    using Error::Error;
};

/// The ODE integrator could not meet its error estimate.
class IntegrationFailure : public Error {
public:
    IntegrationFailure(const std::string& what, double t_reached)
        : Error(what + " (integration stopped at t = " + std::to_string(t_reached) + " us)"),
          t_reached_(t_reached) {}

    double t_reached() const noexcept { return t_reached_; }

private:
    double t_reached_;
};

/// Least-squares fit did not converge; carries the best parameters seen.
class FitFailure : public Error {
public:
    FitFailure(const std::string& what, std::vector<double> best_params, double best_residual)
        : Error(what), best_params_(std::move(best_params)), best_residual_(best_residual) {}

    const std::vector<double>& best_params() const noexcept { return best_params_; }
    double best_residual() const noexcept { return best_residual_; }

private:
    std::vector<double> best_params_;
    double best_residual_;
};

/// Configuration error; `key()` names the offending entry.
class ValidationError : public Error {
public:
    ValidationError(std::string key, const std::string& what)
        : Error(key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

} // namespace spinguard
