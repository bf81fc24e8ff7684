#pragma once

#include <stdexcept>
#include <string>

namespace asolv {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed DSL source. Carries the byte offset of the first bad token.
class SyntaxError : public Error {
public:
    SyntaxError(const std::string& msg, std::size_t offset)
        : Error(msg + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Evaluation left the domain of a function (log of non-positive,
/// division by zero, ...). Names the offending subexpression.
class DomainError : public Error {
public:
    DomainError(const std::string& what, const std::string& subexpr)
        : Error(what + " in subexpression '" + subexpr + "'") {}
};

/// |det J| fell below the floor: the family is parameter-degenerate here.
class SingularJacobian : public Error {
public:
    using Error::Error;
};

/// Fitted decay exponent of the forcing integrand is >= -1.
class NonConvergentTail : public Error {
public:
    using Error::Error;
};

/// No T in the search ladder makes both Lipschitz factors < 1/2.
class ThresholdNotFound : public Error {
public:
    using Error::Error;
};

/// Picard iteration hit max_iters with non-decreasing increments.
class NoConvergence : public Error {
public:
    using Error::Error;
};

/// A Picard iterate left the weighted-norm ball of radius K.
class BallEscape : public Error {
public:
    using Error::Error;
};

/// Step size underflow in the reference integrator.
class StepUnderflow : public Error {
public:
    using Error::Error;
};

/// Trajectory left the declared state-space domain hint.
class DomainExit : public Error {
public:
    using Error::Error;
};

/// Problem file failed schema or cross-field validation.
class ValidationError : public Error {
public:
    using Error::Error;
};

} // namespace asolv
